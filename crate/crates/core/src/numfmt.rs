//! Fixed score formatting shared by every emitter: six decimals, trailing zeros trimmed.

use serde::Serializer;

pub fn fmt_score(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_score).unwrap_or_default()
}

/// Value as printed, parsed back, so JSON output carries the same precision as CSV.
pub fn round_score(x: f64) -> f64 {
    fmt_score(x).parse().unwrap_or(x)
}

pub fn ser_score<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_score(*x))
}

pub fn ser_opt_score<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_score(*v)),
        None => s.serialize_none(),
    }
}
