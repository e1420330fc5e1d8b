//! Plain-text float formatting for CSV artifacts.

use std::fmt::Write;

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds a CSV document from a header and rows of pre-formatted cells.
pub fn csv<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}
