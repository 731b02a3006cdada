//! CSV output helpers with reproducible float formatting.
//!
//! Floats are serialized with 17 significant digits (`{:.16e}`), enough to
//! round-trip any f64 bit pattern, so re-runs with identical seeds produce
//! byte-identical files on any worker count.

use std::fs;
use std::io::Write as _;
use std::path::Path;

/// 17-significant-digit scientific form; round-trips every finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table under construction: one header, then rows.
pub struct CsvTable {
    buf: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    /// Appends one row; fields must already be CSV-safe (no commas).
    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "column count mismatch");
        let mut first = true;
        for f in fields {
            debug_assert!(!f.contains(','), "unescaped comma in CSV field: {f}");
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(f);
        }
        self.buf.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    /// Writes the table to `dir/name`, creating the directory if needed.
    pub fn write_to(&self, dir: &Path, name: &str) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join(name))?;
        f.write_all(self.buf.as_bytes())?;
        Ok(())
    }
}

/// Field helper: integers as plain decimal.
pub fn f_u64(x: u64) -> String {
    x.to_string()
}

/// Field helper: floats in the canonical 17-digit form.
pub fn f_f64(x: f64) -> String {
    fmt_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.0, 1.0, -1.5e-300, 0.1, 2.0 / 3.0, 1e17, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn table_shape_is_enforced() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.row(&["1".into(), "2".into()]);
        assert_eq!(t.as_str(), "a,b\n1,2\n");
    }
}
