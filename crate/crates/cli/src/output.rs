//! The three output styles behind --format.
//!
//! Tables are for reading, records are for parsing, documents are for
//! storing. A record line is `record=<kind> key=value ...` where neither
//! keys nor values contain spaces, so `split_whitespace` plus a single
//! `=` split recovers everything losslessly; floats are printed with
//! enough digits to round-trip.

use clap::ValueEnum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned human-readable columns
    Table,
    /// One key=value record per line
    LineRecords,
    /// A single JSON document
    Document,
}

/// Renders aligned columns with a header row.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut parts = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            parts.push(format!("{:w$}", cell, w = widths[i]));
        }
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(headers.to_vec());
    for row in rows {
        line(row.iter().map(|c| c.as_str()).collect());
    }
    out
}

/// Renders one record line. Spaces in values are replaced by underscores
/// to keep the line splittable.
pub fn record(kind: &str, fields: &[(&str, String)]) -> String {
    let mut out = format!("record={kind}");
    for (k, v) in fields {
        debug_assert!(!k.contains(' '), "record keys must not contain spaces");
        out.push(' ');
        out.push_str(k);
        out.push('=');
        out.push_str(&v.replace(' ', "_"));
    }
    out
}

/// Full-precision float for records: the shortest string that parses back
/// to the same bits.
pub fn float(v: f64) -> String {
    format!("{v}")
}

/// Fixed-precision float for table cells.
pub fn cell(v: f64) -> String {
    format!("{v:.6}")
}

/// Compact scientific form for defect magnitudes.
pub fn defect(v: f64) -> String {
    format!("{v:.2e}")
}
