//! Time-series records and their CSV layout.

use std::io::Write;

/// A row of a CSV table with a fixed header.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Shortest round-trip decimal form; identical input gives identical bytes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Missing values are written as empty fields.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv<R: CsvRow, W: Write>(out: W, rows: &[R]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::header())?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}
