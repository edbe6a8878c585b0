//! Machine-readable check records.
//!
//! Every verification routine in the crate reports a flat list of
//! [`Record`]s, one per tested instance. The JSON shape is
//! `{"name": .., "k": .., "lhs": .., "rhs": .., "tol": .., "pass": ..}`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    /// Iteration index the record refers to, when there is one.
    pub k: Option<i64>,
    pub lhs: f64,
    pub rhs: f64,
    /// Tolerance the comparison allowed; zero for exact checks.
    pub tol: f64,
    pub pass: bool,
}

impl Record {
    pub fn new(name: impl Into<String>, k: Option<i64>, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            k,
            lhs,
            rhs,
            tol: 0.0,
            pass,
        }
    }

    fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// `lhs <= rhs + tol`.
    pub fn le(name: impl Into<String>, k: Option<i64>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = lhs <= rhs + tol;
        Self::new(name, k, lhs, rhs, pass).with_tol(tol)
    }

    /// `lhs >= rhs - tol`.
    pub fn ge(name: impl Into<String>, k: Option<i64>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = lhs >= rhs - tol;
        Self::new(name, k, lhs, rhs, pass).with_tol(tol)
    }

    /// `|lhs - rhs| <= tol`.
    pub fn close(name: impl Into<String>, k: Option<i64>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = (lhs - rhs).abs() <= tol;
        Self::new(name, k, lhs, rhs, pass).with_tol(tol)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<Record>,
    /// Human-readable notes for checks that could not be decided
    /// (inconclusive comparisons, vacuous hypotheses).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
        self.notes.extend(other.notes);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_json_shape() {
        let r = Record::ge("product_bound", Some(3), 12.0, 9.0, 0.0);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"name":"product_bound","k":3,"lhs":12.0,"rhs":9.0,"tol":0.0,"pass":true}"#);
    }

    #[test]
    fn empty_report_passes() {
        assert!(Report::default().passed());
    }
}
