//! Result reports: named scalars with uncertainties, table blocks and a
//! provenance block. Serialized as JSON with sorted keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "qdcascade-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    /// One standard deviation; 0 for exact arithmetic.
    pub sigma: f64,
    pub unit: String,
    pub method: String,
}

/// Rows of numbers under named columns, each row labelled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: BTreeMap::new() }
    }

    pub fn row(mut self, label: &str, values: Vec<f64>) -> Self {
        self.rows.insert(label.to_string(), values);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub preset: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64, preset: &str) -> Self {
        Self { config_hash, seed, code_version: env!("CARGO_PKG_VERSION").to_string(), preset: preset.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub scalars: BTreeMap<String, Scalar>,
    pub tables: BTreeMap<String, Table>,
    /// Flags such as clamped corrections or ambiguous model selection.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            provenance,
            scalars: BTreeMap::new(),
            tables: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Adds a scalar. Non-finite values are rejected since JSON cannot hold them.
    pub fn scalar(&mut self, name: &str, value: f64, sigma: f64, unit: &str, method: &str) -> Result<()> {
        if !value.is_finite() || !sigma.is_finite() {
            return Err(Error::Degenerate(format!("{name} = {value} ± {sigma} is not finite")));
        }
        self.scalars.insert(
            name.to_string(),
            Scalar { value, sigma: sigma.abs(), unit: unit.to_string(), method: method.to_string() },
        );
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<()> {
        if let Some((label, _)) = table.rows.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Degenerate(format!("table {name} row {label} has non-finite entries")));
        }
        self.tables.insert(name.to_string(), table);
        Ok(())
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, name: &str) -> Option<&Scalar> {
        self.scalars.get(name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map(|s| s.value).unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Format(format!("report: unexpected format {:?}", r.format)));
        }
        if r.version != REPORT_VERSION {
            return Err(Error::Format(format!("report: unsupported version {}", r.version)));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Plain-text rendering.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let p = &self.provenance;
        let _ = writeln!(
            s,
            "qdcascade {} | preset {} | seed {} | config {}",
            p.code_version,
            p.preset,
            p.seed,
            &p.config_hash[..p.config_hash.len().min(12)]
        );
        let width = self.scalars.keys().map(|k| k.len()).max().unwrap_or(0);
        for (name, v) in &self.scalars {
            let _ = writeln!(s, "  {name:<width$}  {:>12.5} ± {:<10.5} {:<6} [{}]", v.value, v.sigma, v.unit, v.method);
        }
        for (name, t) in &self.tables {
            let _ = writeln!(s, "\n{name}");
            let _ = writeln!(s, "  {:<12}{}", "", t.columns.iter().map(|c| format!("{c:>14}")).collect::<String>());
            for (label, row) in &t.rows {
                let _ = writeln!(s, "  {label:<12}{}", row.iter().map(|x| format!("{x:>14.4}")).collect::<String>());
            }
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\nnotes");
            for n in &self.notes {
                let _ = writeln!(s, "  - {n}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new(Provenance::new("ab".repeat(32), 7, "desk"));
        r.scalar("g2_raw_xx", 0.018_123_456_789, 0.0011, "", "peak areas").unwrap();
        r.scalar("fidelity", 0.1 + 0.2, 0.0, "", "contrasts").unwrap();
        r.table("t", Table::new(&["raw", "apd"]).row("XX", vec![0.59, 0.77]).row("X", vec![1.0 / 3.0, 0.63])).unwrap();
        r.note("clamped");
        r
    }

    #[test]
    fn reserialization_is_stable() {
        let r = sample();
        let a = r.to_json();
        let back = Report::from_json(&a).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), a);
    }

    #[test]
    fn keys_are_sorted() {
        let j = sample().to_json();
        assert!(j.find("\"fidelity\"").unwrap() < j.find("\"g2_raw_xx\"").unwrap());
        assert!(j.find("\"X\"").unwrap() < j.find("\"XX\"").unwrap());
    }

    #[test]
    fn non_finite_rejected() {
        let mut r = sample();
        assert!(r.scalar("bad", f64::NAN, 0.0, "", "").is_err());
        assert!(r.table("bad", Table::new(&["a"]).row("r", vec![f64::INFINITY])).is_err());
    }

    #[test]
    fn wrong_format_rejected() {
        let j = sample().to_json().replace(REPORT_FORMAT, "other");
        assert!(matches!(Report::from_json(&j), Err(Error::Format(_))));
    }

    #[test]
    fn summary_lists_everything() {
        let s = sample().summary();
        assert!(s.contains("g2_raw_xx") && s.contains("fidelity") && s.contains("clamped"));
    }
}
