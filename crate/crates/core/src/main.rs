fn main() {
    std::process::exit(trajrisk::cli::main_with_args(std::env::args_os()));
}
