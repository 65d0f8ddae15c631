//! Minimal SVG 1.1 step plots for staircases.

use std::fmt::Write as _;

use crate::metrics::Staircase;
use crate::numfmt::fmt_score;

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 44.0;

fn px(x: f64) -> String {
    format!("{x:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick positions covering `[lo, hi]`, about five of them.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn x_range(s: &Staircase, unit: bool) -> (f64, f64) {
    if unit {
        return (0.0, 1.0);
    }
    let lo = s.steps.first().map_or(0.0, |p| p.threshold).min(0.0);
    let hi = s.steps.last().map_or(1.0, |p| p.threshold);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Draws one plot into the box at (`ox`, `oy`) of size `w` × `h`.
fn plot(out: &mut String, s: Option<&Staircase>, title: &str, unit: bool, ox: f64, oy: f64, w: f64, h: f64) {
    let (x0, y0) = (ox + LEFT, oy + TOP);
    let (pw, ph) = (w - LEFT - RIGHT, h - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        px(ox + w / 2.0),
        px(oy + 18.0),
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        px(x0),
        px(y0),
        px(pw),
        px(ph)
    );
    let Some(s) = s else {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="12" fill="#888">no data</text>"##,
            px(x0 + pw / 2.0),
            px(y0 + ph / 2.0)
        );
        return;
    };
    let (lo, hi) = x_range(s, unit);
    let sx = |v: f64| x0 + (v - lo) / (hi - lo) * pw;
    let sy = |f: f64| y0 + ph - f * ph;

    for t in ticks(lo, hi) {
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#444"/><text x="{x}" y="{}" text-anchor="middle" font-size="10">{}</text>"##,
            px(y0 + ph),
            px(y0 + ph + 4.0),
            px(y0 + ph + 16.0),
            fmt_score(t),
            x = px(sx(t)),
        );
    }
    for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#444"/><text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"##,
            px(x0 - 4.0),
            px(x0),
            px(x0 - 6.0),
            px(sy(f) + 3.5),
            fmt_score(f),
            y = px(sy(f)),
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">score</text>"#,
        px(x0 + pw / 2.0),
        px(y0 + ph + 32.0)
    );

    let mut d = String::new();
    for (i, step) in s.steps.iter().enumerate() {
        let x = px(sx(step.threshold));
        if i == 0 {
            let _ = write!(d, "M{x},{}", px(sy(step.fraction)));
        } else {
            let _ = write!(d, " H{x} V{}", px(sy(step.fraction)));
        }
    }
    let _ = write!(d, " V{}", px(sy(1.0)));
    if let Some(last) = s.steps.last() {
        if sx(last.threshold) < x0 + pw {
            let _ = write!(d, " H{}", px(x0 + pw));
        }
    }
    let _ = writeln!(out, r##"<path d="{d}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##);
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        px(w),
        px(h),
        px(w),
        px(h)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Step plot of one staircase; `unit` fixes the x axis to [0, 1].
pub fn render_staircase_svg(s: &Staircase, title: &str, unit: bool) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-size="11">fraction of trajectories below</text>"#,
        px(H / 2.0),
        px(H / 2.0)
    );
    plot(&mut out, Some(s), title, unit, 0.0, 0.0, W, H);
    out.push_str("</svg>\n");
    out
}

pub struct PanelCell<'a> {
    pub row: usize,
    pub col: usize,
    pub title: String,
    pub staircase: Option<&'a Staircase>,
}

/// Grid of step plots, `rows` × `cols`, one per cell.
pub fn render_staircase_panel_svg(title: &str, rows: usize, cols: usize, cells: &[PanelCell<'_>], unit: bool) -> String {
    let (cw, ch) = (W * 0.75, H * 0.75);
    let banner = 30.0;
    let (w, h) = (cw * cols as f64, banner + ch * rows as f64);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#,
        px(w / 2.0),
        escape(title)
    );
    for c in cells {
        plot(
            &mut out,
            c.staircase,
            &c.title,
            unit,
            c.col as f64 * cw,
            banner + c.row as f64 * ch,
            cw,
            ch,
        );
    }
    out.push_str("</svg>\n");
    out
}
