use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Format;
use crate::error::{Error, Result};

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub se: f64,
}

/// Everything a run produced, before it is written out.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    pub reports: Vec<(String, serde_json::Value)>,
    pub long: Vec<LongRow>,
    pub verdicts: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl ReportBundle {
    pub fn is_empty(&self) -> bool {
        self.tables.is_empty() && self.reports.is_empty() && self.long.is_empty()
    }

    pub fn report<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).expect("report serialises");
        self.reports.push((name.into(), v));
    }

    pub fn series(&mut self, series: &str, x: f64, y: f64, se: f64) {
        self.long.push(LongRow {
            series: series.into(),
            x,
            y,
            se,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub experiment: String,
    pub seed: Option<u64>,
    pub config_path: String,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub status: String,
    pub files: Vec<String>,
    pub verdicts: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e.into()))?;
    w.write_record(columns).map_err(|e| io_err(path, e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e.into()))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the data files of a bundle and returns their names, sorted.
pub fn emit(bundle: &ReportBundle, dir: &Path, formats: &[Format]) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        for t in &bundle.tables {
            let name = format!("{}.csv", t.name);
            write_csv(&dir.join(&name), &t.columns, &t.rows)?;
            files.push(name);
        }
        if !bundle.long.is_empty() {
            let rows: Vec<Vec<String>> = bundle
                .long
                .iter()
                .map(|r| vec![r.series.clone(), fmt_f64(r.x), fmt_f64(r.y), fmt_f64(r.se)])
                .collect();
            let cols = ["series", "x", "y", "se"].map(String::from);
            write_csv(&dir.join("long.csv"), &cols, &rows)?;
            files.push("long.csv".into());
        }
    }
    if formats.contains(&Format::Json) {
        for (name, v) in &bundle.reports {
            let name = format!("{name}.json");
            let mut text = serde_json::to_string_pretty(v).expect("json value serialises");
            text.push('\n');
            write_file(&dir.join(&name), text.as_bytes())?;
            files.push(name);
        }
    }
    files.sort();
    Ok(files)
}

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

/// Reads `(n, column)` pairs from a CSV written by [`emit`].
pub fn read_series(path: &Path, column: &str) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e.into()))?;
    let headers = r.headers().map_err(|e| io_err(path, e.into()))?.clone();
    let find = |c: &str| {
        headers.iter().position(|h| h == c).ok_or_else(|| Error::MissingInput(format!("{} has no `{c}` column", path.display())))
    };
    let (ni, vi) = (find("n")?, find(column)?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e.into()))?;
        let bad = |what: &str| Error::Config {
            path: format!("{}:{}", path.display(), line + 2),
            reason: format!("unparsable {what}"),
        };
        let n: usize = rec[ni].trim().parse().map_err(|_| bad("n"))?;
        let v: f64 = rec[vi].trim().parse().map_err(|_| bad(column))?;
        out.push((n, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.5, -2.25e-17, 3e20, 0.07407407407407407, 123456.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.5e-17), "1.5e-17");
    }

    #[test]
    fn empty_bundle_gives_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&ReportBundle::default(), dir.path(), &[Format::Csv, Format::Json]).unwrap();
        assert!(files.is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn csv_header_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = ReportBundle::default();
        let mut t = Table::new("survival", &["n", "survival", "se", "count"]);
        t.push(vec!["0".into(), "1".into(), "0".into(), "10".into()]);
        t.push(vec!["1".into(), fmt_f64(0.25), fmt_f64(0.01), "3".into()]);
        b.tables.push(t);
        emit(&b, dir.path(), &[Format::Csv]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("survival.csv")).unwrap();
        assert!(text.starts_with("n,survival,se,count\n"));
        assert_eq!(read_series(&dir.path().join("survival.csv"), "survival").unwrap(), vec![(0, 1.0), (1, 0.25)]);
    }
}
