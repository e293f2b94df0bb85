//! Minimal CSV writer for numeric tables.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), `.` as the
//! decimal separator and `\n` line endings, so a value read back parses to
//! the identical double.

use std::fmt::Write;

/// Formats one value with full round-trip precision.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Renders a header plus numeric rows.
pub fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}
