//! CSV tables with a leading metadata row.
//!
//! Layout: one row `#meta,version=..,seeds=..,config=..[,extra..]`, then
//! the column header, then data rows. LF line endings, `.` decimals.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub seeds: Vec<u64>,
    pub config_hash: String,
    /// Further `key=value` metadata fields after the fixed ones.
    pub extra: Vec<(String, String)>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str], seeds: Vec<u64>, config_hash: String) -> Self {
        Self {
            seeds,
            config_hash,
            extra: Vec::new(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.extra.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let seeds = if self.seeds.is_empty() {
            "none".to_string()
        } else {
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
        };
        let mut meta = vec![
            "#meta".to_string(),
            format!("version={VERSION}"),
            format!("seeds={seeds}"),
            format!("config={}", self.config_hash),
        ];
        meta.extend(self.extra.iter().map(|(k, v)| format!("{k}={v}")));
        w.write_record(&meta)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))
    }

    /// Writes to `path`, or to stdout when `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        let bytes = self.render()?;
        match path {
            Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
            None => std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::io("stdout", e)),
        }
    }
}

/// Shortest round-trip decimal; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_meta_header_rows_with_lf() {
        let mut t = Table::new(&["a", "b"], vec![1, 2], "ff".into()).meta("ci", "wilson-95");
        t.push(vec!["1".into(), num(0.5)]);
        let s = String::from_utf8(t.render().unwrap()).unwrap();
        assert_eq!(
            s,
            format!("#meta,version={VERSION},seeds=1 2,config=ff,ci=wilson-95\na,b\n1,0.5\n")
        );
        assert!(!s.contains('\r'));
    }

    #[test]
    fn nan_is_blank() {
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(1e-7), "0.0000001");
    }
}
