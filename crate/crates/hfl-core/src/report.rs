//! Structured verification reports: one record per check, serialized to
//! JSON by the CLI. Reruns with the same configuration must produce
//! byte-identical reports once timing fields are stripped.

use serde::Serialize;

#[derive(Serialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Serialize, Clone, Debug)]
pub struct CheckRecord {
    /// Stable identifier, e.g. "functor.order-symmetry".
    pub id: String,
    pub status: Status,
    /// What was verified, in one line.
    pub detail: String,
    /// Concrete witness on failure (element, character, or module id).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    /// Wall-clock milliseconds; excluded from determinism comparison.
    pub millis: u64,
}

impl CheckRecord {
    pub fn pass(id: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            status: Status::Pass,
            detail: detail.into(),
            witness: None,
            millis: 0,
        }
    }

    pub fn fail(
        id: impl Into<String>,
        detail: impl Into<String>,
        witness: impl Into<String>,
    ) -> Self {
        CheckRecord {
            id: id.into(),
            status: Status::Fail,
            detail: detail.into(),
            witness: Some(witness.into()),
            millis: 0,
        }
    }

    pub fn from_bool(
        id: impl Into<String>,
        detail: impl Into<String>,
        ok: bool,
        witness: impl Into<String>,
    ) -> Self {
        if ok {
            CheckRecord::pass(id, detail)
        } else {
            CheckRecord::fail(id, detail, witness)
        }
    }
}

#[derive(Serialize, Clone, Debug)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
}

#[derive(Serialize, Clone, Debug)]
pub struct Report {
    pub schema: String,
    pub target: String,
    pub config: serde_json::Value,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

pub const REPORT_SCHEMA: &str = "hfl-report/1";

impl Report {
    pub fn new(target: impl Into<String>, config: serde_json::Value) -> Self {
        Report {
            schema: REPORT_SCHEMA.to_string(),
            target: target.into(),
            config,
            records: Vec::new(),
            summary: Summary {
                total: 0,
                passed: 0,
                failed: 0,
                errored: 0,
            },
        }
    }

    pub fn push(&mut self, rec: CheckRecord) {
        match rec.status {
            Status::Pass => self.summary.passed += 1,
            Status::Fail => self.summary.failed += 1,
            Status::Error => self.summary.errored += 1,
        }
        self.summary.total += 1;
        self.records.push(rec);
    }

    pub fn extend(&mut self, recs: Vec<CheckRecord>) {
        for r in recs {
            self.push(r);
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0 && self.summary.errored == 0
    }

    /// JSON with timing fields zeroed, for byte-comparison across runs.
    pub fn to_json_without_timing(&self) -> String {
        let mut clone = self.clone();
        for r in clone.records.iter_mut() {
            r.millis = 0;
        }
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable one-line-per-check summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mark = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Error => "ERROR",
            };
            out.push_str(&format!("[{mark}] {} - {}\n", r.id, r.detail));
            if let Some(w) = &r.witness {
                out.push_str(&format!("       witness: {w}\n"));
            }
        }
        out.push_str(&format!(
            "{} checks: {} passed, {} failed, {} errored\n",
            self.summary.total, self.summary.passed, self.summary.failed, self.summary.errored
        ));
        out
    }
}
