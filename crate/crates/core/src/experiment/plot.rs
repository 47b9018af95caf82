//! Static SVG renderings: per-coordinate trace and ACF panels, and the
//! log-scale trajectory of an adaptive run.

use std::fmt::Write;

use crate::adaptive::AdaptRecord;
use crate::diagnostics::{acf, IACT_CUTOFF};

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN: f64 = 48.0;
const MAX_POINTS: usize = 2000;

struct Panel {
    top: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN + (x - lo) / (hi - lo).max(f64::MIN_POSITIVE) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let inner = PANEL_HEIGHT - 2.0 * 24.0;
        self.top + 24.0 + (1.0 - (y - lo) / (hi - lo).max(f64::MIN_POSITIVE)) * inner
    }

    fn frame(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
            MARGIN,
            self.top + 24.0,
            WIDTH - 2.0 * MARGIN,
            PANEL_HEIGHT - 48.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" font-family="sans-serif">{}</text>"#,
            MARGIN,
            self.top + 16.0,
            title
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{:.1}" font-size="10" font-family="sans-serif">{}</text>"#,
            self.py(self.y_range.1) + 4.0,
            fmt_tick(self.y_range.1)
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{:.1}" font-size="10" font-family="sans-serif">{}</text>"#,
            self.py(self.y_range.0),
            fmt_tick(self.y_range.0)
        );
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn header(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str) {
    out.push_str("<polyline fill=\"none\" stroke=\"");
    out.push_str(color);
    out.push_str("\" stroke-width=\"1\" points=\"");
    for (x, y) in points {
        let _ = write!(out, "{x:.1},{y:.1} ");
    }
    out.push_str("\"/>\n");
}

/// Trace plot with one panel per coordinate; long chains are drawn with a
/// uniform stride.
pub fn trace_svg(rows: &[Vec<f64>]) -> String {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let mut out = header(PANEL_HEIGHT * d.max(1) as f64);
    for j in 0..d {
        let panel = Panel {
            top: PANEL_HEIGHT * j as f64,
            x_range: (0.0, n.saturating_sub(1).max(1) as f64),
            y_range: padded_range(rows.iter().map(|r| r[j])),
        };
        panel.frame(&mut out, &format!("trace x{}", j + 1));
        polyline(
            &mut out,
            rows.iter()
                .enumerate()
                .step_by(stride)
                .map(|(i, r)| (panel.px(i as f64), panel.py(r[j]))),
            "#1f4e99",
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Autocorrelation bars per coordinate with the IACT cutoff line.
pub fn acf_svg(rows: &[Vec<f64>], max_lag: usize) -> String {
    let d = rows.first().map_or(0, Vec::len);
    let mut out = header(PANEL_HEIGHT * d.max(1) as f64);
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let panel = Panel {
            top: PANEL_HEIGHT * j as f64,
            x_range: (-0.5, max_lag as f64 + 0.5),
            y_range: (-0.2, 1.0),
        };
        panel.frame(&mut out, &format!("ACF x{}", j + 1));
        let Ok(rho) = acf(&col, max_lag) else {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" font-family="sans-serif">constant series</text>"#,
                WIDTH / 2.0,
                panel.py(0.4)
            );
            continue;
        };
        let zero = panel.py(0.0);
        for (k, r) in rho.iter().enumerate() {
            let x = panel.px(k as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{zero:.1}" x2="{x:.1}" y2="{:.1}" stroke="#1f4e99" stroke-width="2"/>"##,
                panel.py(r.clamp(-0.2, 1.0))
            );
        }
        let cut = panel.py(IACT_CUTOFF);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN:.1}" y1="{cut:.1}" x2="{:.1}" y2="{cut:.1}" stroke="#c0392b" stroke-dasharray="4 3"/>"##,
            WIDTH - MARGIN
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Log proposal standard deviation against batch index.
pub fn sigma_svg(trace: &[AdaptRecord]) -> String {
    let mut out = header(PANEL_HEIGHT + 40.0);
    let last = trace.last().map_or(1, |r| r.batch_index) as f64;
    let panel = Panel {
        top: 0.0,
        x_range: (1.0, last.max(2.0)),
        y_range: padded_range(trace.iter().map(|r| r.log_sigma)),
    };
    panel.frame(&mut out, "log sigma by batch");
    polyline(
        &mut out,
        trace
            .iter()
            .map(|r| (panel.px(r.batch_index as f64), panel.py(r.log_sigma))),
        "#1f4e99",
    );
    out.push_str("</svg>\n");
    out
}
