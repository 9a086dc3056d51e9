//! Versioned JSON reports of named checks.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const REPORT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Whether a check passes below its tolerance or, for negative controls,
/// above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Expect {
    #[default]
    AtMost,
    Exceeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// What the check establishes, or `"plumbing"`.
    pub anchor: String,
    /// `null` when the check could not be evaluated.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, residual: f64, tolerance: f64, expect: Expect) -> Self {
        let ok = match expect {
            Expect::AtMost => residual <= tolerance,
            Expect::Exceeds => residual > tolerance,
        };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            residual: Some(residual),
            tolerance,
            status: if ok { Status::Pass } else { Status::Fail },
            error: None,
        }
    }

    pub fn failed(name: impl Into<String>, anchor: impl Into<String>, tolerance: f64, error: impl fmt::Display) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            residual: None,
            tolerance,
            status: Status::Fail,
            error: Some(error.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        match (self.residual, &self.error) {
            (Some(r), _) => write!(f, "{tag} {:<48} residual {r:.11e}  tolerance {:.3e}", self.name, self.tolerance),
            (None, Some(e)) => write!(f, "{tag} {:<48} error: {e}", self.name),
            (None, None) => write!(f, "{tag} {}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub system: String,
    pub grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub checks: Vec<CheckResult>,
    pub wallclock_seconds: f64,
}

impl Report {
    pub fn new(system: impl Into<String>, grid: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            version: REPORT_VERSION.into(),
            system: system.into(),
            grid,
            seeds,
            checks: Vec::new(),
            wallclock_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} on grid {:?}, seeds {:?}", self.system, self.grid, self.seeds)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} of {} checks passed in {:.2} s",
            self.checks.len() - failed,
            self.checks.len(),
            self.wallclock_seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_controls_pass_above_tolerance() {
        assert!(CheckResult::new("x", "plumbing", 1.0, 1e-4, Expect::Exceeds).passed());
        assert!(!CheckResult::new("x", "plumbing", 1e-6, 1e-4, Expect::Exceeds).passed());
        assert!(!CheckResult::new("x", "plumbing", f64::NAN, 1e-4, Expect::AtMost).passed());
    }

    #[test]
    fn json_round_trip_keeps_schema_fields() {
        let mut r = Report::new("toy", vec![16], vec![1, 2]);
        r.checks.push(CheckResult::new("a", "plumbing", 1.234567890123e-12, 1e-9, Expect::AtMost));
        r.checks.push(CheckResult::failed("b", "plumbing", 1e-9, "boom"));
        let text = r.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["version", "system", "grid", "seeds", "checks", "wallclock_seconds"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["name", "anchor", "residual", "tolerance", "status"] {
            assert!(v["checks"][0].get(key).is_some(), "{key}");
        }
        assert_eq!(v["checks"][0]["status"], "pass");
        assert!(v["checks"][1]["residual"].is_null());
        assert_eq!(Report::from_json(&text).unwrap(), r);
        assert!(!r.passed());
    }
}
