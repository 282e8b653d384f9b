//! Machine-readable pass/fail records for the property audits.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub passed: bool,
    #[serde(deserialize_with = "nullable")]
    pub measured: f64,
    #[serde(deserialize_with = "nullable")]
    pub budget: f64,
    pub detail: String,
}

/// JSON has no infinities; serde_json writes them (and NaN) as `null`.
fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `measured <= budget`.
    pub fn at_most(&mut self, name: &str, measured: f64, budget: f64, detail: impl Into<String>) {
        self.record(name, measured <= budget, measured, budget, detail);
    }

    /// Record `measured >= budget`.
    pub fn at_least(&mut self, name: &str, measured: f64, budget: f64, detail: impl Into<String>) {
        self.record(name, measured >= budget, measured, budget, detail);
    }

    pub fn record(
        &mut self,
        name: &str,
        passed: bool,
        measured: f64,
        budget: f64,
        detail: impl Into<String>,
    ) {
        self.entries.push(AuditEntry {
            name: name.to_string(),
            passed,
            measured,
            budget,
            detail: detail.into(),
        });
    }

    pub fn extend(&mut self, prefix: &str, other: AuditReport) {
        for mut e in other.entries {
            e.name = format!("{prefix}{}", e.name);
            self.entries.push(e);
        }
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
        for e in &self.entries {
            writeln!(
                f,
                "{} {:width$}  measured {:<12.6e} budget {:<12.6e} {}",
                if e.passed { "PASS" } else { "FAIL" },
                e.name,
                e.measured,
                e.budget,
                e.detail,
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_and_fail_bookkeeping() {
        let mut r = AuditReport::new();
        r.at_most("a", 1.0, 2.0, "");
        assert!(r.passed());
        r.at_least("b", 1.0, 2.0, "too small");
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        let text = r.to_string();
        assert!(text.contains("PASS a"));
        assert!(text.contains("FAIL b"));
    }

    #[test]
    fn nan_never_passes() {
        let mut r = AuditReport::new();
        r.at_most("x", f64::NAN, 1.0, "");
        r.at_least("y", f64::NAN, 1.0, "");
        assert_eq!(r.failures().count(), 2);
    }
}
