use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ bound`; NaN fails.
    pub fn le(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }

    /// Passes when `value ≥ bound`.
    pub fn ge(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value >= bound,
        }
    }

    /// Passes when `value < bound`.
    pub fn lt(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value < bound,
        }
    }

    /// Passes when `value > bound`.
    pub fn gt(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value > bound,
        }
    }

    /// A yes/no outcome, recorded as value 1 or 0 against bound 1.
    pub fn flag(name: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The effective scenario in canonical text form.
    pub scenario: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub details: serde_json::Value,
    pub threads: usize,
    pub timing_ms: u64,
}

impl Report {
    pub fn new(command: &str, scenario: String, checks: Vec<Check>, details: serde_json::Value) -> Report {
        Report {
            tool: "r4varifold".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario,
            pass: checks.iter().all(|c| c.pass),
            checks,
            details,
            threads: rayon::current_num_threads(),
            timing_ms: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        for c in &self.checks {
            let _ = writeln!(
                o,
                "{} {}: {:.6e} (bound {:.6e})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            );
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(o, "{}: {passed} of {} checks pass", self.command, self.checks.len());
        o
    }
}
