//! Machine-readable reports: every pass/fail carries the margin behind it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use super::instance::matrix_value;
use crate::linalg::CMat;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value over all instances the check covers.
    pub value: f64,
    pub bound: f64,
    /// Distance to the bound, positive when passing.
    pub margin: f64,
    /// Number of evaluations folded into `value`.
    pub count: usize,
    pub heuristic: bool,
}

impl Check {
    /// Passes when value ≤ bound.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, bound, bound - value)
    }

    /// Passes when value ≥ bound.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, bound, value - bound)
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check::new(name, v, 1.0, v - 1.0)
    }

    fn new(name: impl Into<String>, value: f64, bound: f64, margin: f64) -> Self {
        Check {
            name: name.into(),
            passed: margin >= 0.0,
            value,
            bound,
            margin: if margin.is_nan() { f64::NEG_INFINITY } else { margin },
            count: 1,
            heuristic: false,
        }
    }

    pub fn heuristic(mut self) -> Self {
        self.heuristic = true;
        self
    }
}

/// Folds repeated evaluations of one named check into its worst case.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    order: Vec<String>,
    worst: BTreeMap<String, Check>,
}

impl Tally {
    pub fn push(&mut self, c: Check) {
        match self.worst.get_mut(&c.name) {
            Some(w) => {
                let count = w.count + 1;
                let heuristic = w.heuristic || c.heuristic;
                if c.margin < w.margin {
                    *w = c;
                }
                w.count = count;
                w.heuristic = heuristic;
            }
            None => {
                self.order.push(c.name.clone());
                self.worst.insert(c.name.clone(), c);
            }
        }
    }

    pub fn into_checks(mut self) -> Vec<Check> {
        self.order.iter().map(|k| self.worst.remove(k).expect("tracked")).collect()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub operation: String,
    pub inputs_digest: String,
    pub certificates: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub subspaces: BTreeMap<String, Value>,
    pub matrices: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub caveats: Vec<String>,
    pub errors: Vec<String>,
    pub sections: Vec<Report>,
    pub passed: bool,
}

impl Report {
    pub fn new(operation: impl Into<String>) -> Self {
        Report { operation: operation.into(), ..Default::default() }
    }

    pub fn with_digest(mut self, text: &str) -> Self {
        self.inputs_digest = digest(text);
        self
    }

    pub fn check(&mut self, c: Check) {
        if c.heuristic && !self.caveats.iter().any(|x| x.starts_with(&c.name)) {
            self.caveats.push(format!("{}: probe-based (heuristic)", c.name));
        }
        self.checks.push(c);
    }

    pub fn matrix(&mut self, name: impl Into<String>, m: &CMat) {
        self.matrices.insert(name.into(), matrix_value(m));
    }

    pub fn subspace(&mut self, name: impl Into<String>, basis: &CMat) {
        self.subspaces.insert(name.into(), matrix_value(basis));
    }

    pub fn error(&mut self, e: impl std::fmt::Display) {
        self.errors.push(e.to_string());
    }

    /// Sets `passed` from the checks, errors and sections.
    pub fn finish(mut self) -> Self {
        self.passed = self.errors.is_empty()
            && !(self.checks.is_empty() && self.sections.is_empty())
            && self.checks.iter().all(|c| c.passed)
            && self.sections.iter().all(|s| s.passed);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out, 0);
        out
    }

    fn write_text(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{pad}{verdict} {}", self.operation);
        for (k, v) in &self.certificates {
            let _ = writeln!(out, "{pad}  certificate {k} = {v:.6e}");
        }
        for (k, v) in &self.residuals {
            let _ = writeln!(out, "{pad}  residual {k} = {v:.3e}");
        }
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let h = if c.heuristic { " [heuristic]" } else { "" };
            let _ = writeln!(
                out,
                "{pad}  {mark} {}: {:.3e} vs {:.3e} (margin {:.3e}, n={}){h}",
                c.name, c.value, c.bound, c.margin, c.count
            );
        }
        for c in &self.caveats {
            let _ = writeln!(out, "{pad}  caveat: {c}");
        }
        for e in &self.errors {
            let _ = writeln!(out, "{pad}  error: {e}");
        }
        for s in &self.sections {
            s.write_text(out, depth + 1);
        }
    }
}

/// FNV-1a, 64 bit, as a hex string.
pub fn digest(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
