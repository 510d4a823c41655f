//! Structured pass/fail records for certified inequalities and identities.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geometry::ModelGeometry;
use crate::model::ModelParams;
use crate::numeric::rel_diff;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The inequality is outside its hypotheses (for example `c_P <= 0`).
    Vacuous,
}

/// How `lhs` is compared with `rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `lhs <= rhs * (1 + tolerance)`.
    #[serde(rename = "<=")]
    AtMost,
    /// `lhs >= rhs - tolerance`.
    #[serde(rename = ">=")]
    AtLeast,
    /// `|lhs - rhs| <= tolerance * max(|lhs|, |rhs|)`.
    #[serde(rename = "==")]
    Equal,
    /// `|lhs - rhs| <= tolerance`.
    #[serde(rename = "==abs")]
    EqualAbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub kind: String,
    pub inputs: Value,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl VerificationReport {
    pub fn compare(
        check: impl Into<String>,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        tolerance: f64,
    ) -> Self {
        let holds = match relation {
            Relation::AtMost => lhs <= rhs * (1.0 + tolerance),
            Relation::AtLeast => lhs >= rhs - tolerance,
            Relation::Equal => rel_diff(lhs, rhs) <= tolerance,
            Relation::EqualAbs => (lhs - rhs).abs() <= tolerance,
        };
        VerificationReport {
            check: check.into(),
            kind: String::new(),
            inputs: Value::Null,
            lhs,
            rhs,
            relation,
            tolerance,
            verdict: if holds { Verdict::Pass } else { Verdict::Fail },
            seconds: 0.0,
            details: Value::Null,
        }
    }

    pub fn at_most(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::compare(check, lhs, rhs, Relation::AtMost, tolerance)
    }

    pub fn at_least(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::compare(check, lhs, rhs, Relation::AtLeast, tolerance)
    }

    pub fn equal(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::compare(check, lhs, rhs, Relation::Equal, tolerance)
    }

    pub fn equal_abs(check: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::compare(check, lhs, rhs, Relation::EqualAbs, tolerance)
    }

    /// Records the model inputs and tags the report with the geometry kind.
    pub fn with_model(mut self, geom: &ModelGeometry, params: Option<&ModelParams>) -> Self {
        self.kind = geom.pattern().tag().into();
        self.inputs = json!({ "geometry": geom.describe(), "params": params });
        self
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.kind = kind.into();
        self
    }

    pub fn with_input(mut self, key: &str, value: impl Serialize) -> Self {
        if !self.inputs.is_object() {
            self.inputs = json!({});
        }
        self.inputs[key] = serde_json::to_value(value).unwrap_or(Value::Null);
        self
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    /// Marks the report vacuous unless it already failed.
    pub fn vacuous_if(mut self, cond: bool) -> Self {
        if cond && self.verdict == Verdict::Pass {
            self.verdict = Verdict::Vacuous;
        }
        self
    }

    /// Forces a failure (used when a secondary condition is violated).
    pub fn fail_if(mut self, cond: bool) -> Self {
        if cond {
            self.verdict = Verdict::Fail;
        }
        self
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV summary with one row per report.
pub fn reports_to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from("check,kind,lhs,relation,rhs,tolerance,verdict,seconds\n");
    for r in reports {
        let relation = serde_json::to_value(r.relation)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        let verdict = serde_json::to_value(r.verdict)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:e},{},{:e},{:e},{},{:.6}\n",
            csv_field(&r.check),
            csv_field(&r.kind),
            r.lhs,
            csv_field(&relation),
            r.rhs,
            r.tolerance,
            verdict,
            r.seconds
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        assert!(VerificationReport::at_most("a", 1.0, 1.0, 0.0).passed());
        assert!(!VerificationReport::at_most("a", 1.1, 1.0, 1e-9).passed());
        assert!(VerificationReport::at_least("b", -1e-12, 0.0, 1e-9).passed());
        assert!(VerificationReport::equal("c", 1.0, 1.0 + 1e-13, 1e-12).passed());
        let v = VerificationReport::at_most("d", 0.5, 1.0, 0.0).vacuous_if(true);
        assert_eq!(v.verdict, Verdict::Vacuous);
        assert!(v.passed());
    }

    #[test]
    fn json_and_csv() {
        let g = ModelGeometry::cell_board(1, 1, 2).unwrap();
        let p = ModelParams::new(1.0, 1.0, 2.0).unwrap();
        let r =
            VerificationReport::at_most("prop2, lambda", 0.1, 0.8, 1e-9).with_model(&g, Some(&p));
        let v = r.to_json();
        assert_eq!(v["verdict"], "pass");
        assert_eq!(v["relation"], "<=");
        assert_eq!(v["inputs"]["params"]["J"], 1.0);
        assert_eq!(v["kind"], "cell-board");
        let back: VerificationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        let csv = reports_to_csv(&[r]);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.contains("\"prop2, lambda\""));
    }
}
