//! Pass/fail records shared by the verification suites.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub detail: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

impl CheckResult {
    pub fn pass(name: &str, detail: Value) -> Self {
        CheckResult {
            name: name.to_string(),
            status: Status::Pass,
            detail,
            witness: None,
        }
    }

    pub fn fail(name: &str, detail: Value, witness: Value) -> Self {
        CheckResult {
            name: name.to_string(),
            status: Status::Fail,
            detail,
            witness: Some(witness),
        }
    }

    pub fn from_bool(name: &str, ok: bool, detail: Value, witness: impl FnOnce() -> Value) -> Self {
        if ok {
            Self::pass(name, detail)
        } else {
            Self::fail(name, detail, witness())
        }
    }

    /// A check whose computation failed outright counts as a failure.
    pub fn from_result(name: &str, r: Result<CheckResult>) -> Self {
        r.unwrap_or_else(|e| CheckResult::fail(name, json!({}), json!({"error": e.to_string()})))
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}
