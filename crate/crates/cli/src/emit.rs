//! Report serialization.
//!
//! Floats are written as `d.dddddddddddddddde±x` (17 significant digits, so
//! every `f64` round-trips), non-finite values as `null` / empty cells. Keys
//! follow struct field order, and maps inside case details are sorted, so a
//! report always serializes to the same bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Format;
use crate::suite::{CaseReport, Report};

/// Column set of the CSV report.
pub const CSV_COLUMNS: [&str; 10] = [
    "id", "kind", "seed", "status", "verdict", "expected", "matched", "value", "residual", "error",
];

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with fixed-precision floats.
struct Fixed<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

fn cell(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(float).unwrap_or_default()
}

fn row(c: &CaseReport) -> [String; 10] {
    [
        c.id.clone(),
        c.kind.clone(),
        c.seed.to_string(),
        serde_json::to_value(c.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        c.verdict.clone(),
        c.expected.clone().unwrap_or_default(),
        c.matched.to_string(),
        cell(c.value),
        cell(c.residual),
        c.error.clone().unwrap_or_default(),
    ]
}

/// Header row, then one row per case in report order.
pub fn to_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for c in &report.cases {
        w.write_record(row(c))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
    }
}

pub fn report_path(dir: &Path, format: Format) -> PathBuf {
    dir.join(format!("report.{}", format.extension()))
}

/// Writes the report in each format plus the per-case artifacts into `dir`.
pub fn emit(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = Vec::new();
    let mut write = |path: PathBuf, contents: &str| -> Result<()> {
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    for &f in formats {
        write(report_path(dir, f), &render(report, f)?)?;
    }
    for c in &report.cases {
        for a in &c.artifacts {
            write(dir.join(&a.name), &a.contents)?;
        }
    }
    Ok(written)
}

/// Reads back a JSON report written by [`emit`].
pub fn load_report(dir: &Path) -> Result<Report> {
    let path = report_path(dir, Format::Json);
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a kkh report", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json(&json!({ "a": 0.1, "b": 3, "c": f64::NAN, "d": -1e-300 })).unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"b\": 3"));
        assert!(s.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["d"].as_f64(), Some(-1e-300));
    }
}
