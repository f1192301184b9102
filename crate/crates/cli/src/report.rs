//! Run reports. Everything except `runtime_ms` is a function of the scenario and seed.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not-applicable",
        }
    }
}

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A closed-form identity quoted as the reference result.
    Reference,
    /// Follows from the definitions in one line.
    Trivial,
    /// Computed here from other quantities (field values, step sizes).
    Derived,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expected {
    pub quantity: String,
    pub value: Value,
    pub provenance: Provenance,
}

/// Result of one check before timing and bookkeeping are attached.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub status: Status,
    pub measured: BTreeMap<String, Value>,
    pub expected: Vec<Expected>,
    pub residuals: BTreeMap<String, Value>,
    pub detail: Vec<String>,
    pub exports: Vec<String>,
}

impl Default for Outcome {
    fn default() -> Self {
        Outcome {
            status: Status::Pass,
            measured: BTreeMap::new(),
            expected: Vec::new(),
            residuals: BTreeMap::new(),
            detail: Vec::new(),
            exports: Vec::new(),
        }
    }
}

fn json(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Outcome {
    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Outcome {
            status: Status::NotApplicable,
            detail: vec![reason.into()],
            ..Outcome::default()
        }
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Outcome {
            status: Status::Fail,
            detail: vec![reason.into()],
            ..Outcome::default()
        }
    }

    pub fn measure(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.measured.insert(key.into(), json(value));
    }

    pub fn expect(
        &mut self,
        quantity: impl Into<String>,
        value: impl Serialize,
        provenance: Provenance,
    ) {
        self.expected.push(Expected {
            quantity: quantity.into(),
            value: json(value),
            provenance,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.detail.push(text.into());
    }

    /// Fails the outcome with `message` unless `ok`.
    pub fn require(&mut self, ok: bool, message: impl Into<String>) -> bool {
        if !ok {
            self.status = Status::Fail;
            self.detail.push(message.into());
        }
        ok
    }

    /// Records `value` as a residual and requires `value <= limit`. NaN fails.
    pub fn bound(&mut self, key: impl Into<String>, value: f64, limit: f64) -> bool {
        let key = key.into();
        self.residuals.insert(key.clone(), json(value));
        self.require(
            value <= limit,
            format!("{key} = {value:e} exceeds {limit:e}"),
        )
    }

    /// Records an exact residual (a polynomial or operator printed as text) and requires it to vanish.
    pub fn exact(
        &mut self,
        key: impl Into<String>,
        residual_is_zero: bool,
        printed: impl Into<String>,
    ) -> bool {
        let key = key.into();
        let printed = printed.into();
        self.residuals
            .insert(key.clone(), Value::String(printed.clone()));
        self.require(residual_is_zero, format!("{key} = {printed}, expected 0"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub index: usize,
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub summary: String,
    pub tolerance: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub not_applicable: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub field: String,
    pub constants: BTreeMap<String, String>,
    pub status: Status,
    pub tally: Tally,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    pub fn new(
        scenario: String,
        seed: u64,
        field: String,
        constants: BTreeMap<String, String>,
        checks: Vec<CheckReport>,
    ) -> Self {
        let mut tally = Tally::default();
        for c in &checks {
            match c.outcome.status {
                Status::Pass => tally.pass += 1,
                Status::Fail => tally.fail += 1,
                Status::NotApplicable => tally.not_applicable += 1,
            }
        }
        let status = if tally.fail > 0 {
            Status::Fail
        } else {
            Status::Pass
        };
        RunReport {
            scenario,
            seed,
            field,
            constants,
            status,
            tally,
            checks,
        }
    }

    /// One line per check plus a closing tally.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let label = match &c.id {
                Some(id) => format!("{} ({id})", c.check),
                None => c.check.clone(),
            };
            out.push_str(&format!(
                "[{:>2}] {:<14} {label}",
                c.index,
                c.outcome.status.as_str()
            ));
            if c.outcome.status != Status::Pass {
                if let Some(first) = c.outcome.detail.first() {
                    out.push_str(&format!(": {first}"));
                }
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "{}: {} passed, {} failed, {} not applicable\n",
            self.scenario, self.tally.pass, self.tally.fail, self.tally.not_applicable
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_and_require() {
        let mut o = Outcome::default();
        assert!(o.bound("r", 1e-12, 1e-10));
        assert_eq!(o.status, Status::Pass);
        assert!(!o.bound("nan", f64::NAN, 1.0));
        assert_eq!(o.status, Status::Fail);
        assert_eq!(o.residuals["r"], json(1e-12));
    }

    #[test]
    fn overall_status() {
        let check = |status| CheckReport {
            index: 0,
            check: "c".into(),
            id: None,
            summary: String::new(),
            tolerance: String::new(),
            outcome: Outcome {
                status,
                ..Outcome::default()
            },
            runtime_ms: 0.0,
        };
        let r = RunReport::new(
            "s".into(),
            0,
            "f".into(),
            BTreeMap::new(),
            vec![check(Status::Pass), check(Status::NotApplicable)],
        );
        assert_eq!(r.status, Status::Pass);
        let r = RunReport::new(
            "s".into(),
            0,
            "f".into(),
            BTreeMap::new(),
            vec![check(Status::Fail)],
        );
        assert_eq!(r.status, Status::Fail);
        assert!(r.summary().contains("0 passed, 1 failed"));
    }
}
