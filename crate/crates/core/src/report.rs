//! Machine-readable results of identity checks.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::tensor::{Difference, TensorOperator};

/// Outcome of one verification.
///
/// `pass == true` implies `witness` is absent. `residual` is the literal
/// string `"0"` on passing exact-ring checks; on failure it carries the
/// largest differing magnitude (exact for exact rings, a float for the
/// complex backend). Elapsed time is kept for human output but deliberately
/// excluded from serialization so report streams are byte-identical across
/// runs.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub residual: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl VerificationReport {
    pub fn passing(check: impl Into<String>, params: Value) -> Self {
        VerificationReport {
            check: check.into(),
            params,
            pass: true,
            witness: None,
            residual: "0".into(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn failing(
        check: impl Into<String>,
        params: Value,
        witness: Value,
        residual: impl Into<String>,
    ) -> Self {
        VerificationReport {
            check: check.into(),
            params,
            pass: false,
            witness: Some(witness),
            residual: residual.into(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn with_elapsed(mut self, elapsed: Duration) -> Self {
        self.elapsed = elapsed;
        self
    }

    /// Report for `lhs = rhs`, with the first differing entry as witness and
    /// the largest entry of the difference as residual.
    pub fn from_equality(
        check: impl Into<String>,
        params: Value,
        lhs: &TensorOperator,
        rhs: &TensorOperator,
    ) -> crate::Result<Self> {
        match lhs.first_difference(rhs)? {
            None => Ok(Self::passing(check, params)),
            Some(diff) => {
                let residual = lhs.sub(rhs)?.max_abs_entry().to_string();
                Ok(Self::failing(check, params, difference_witness(&diff), residual))
            }
        }
    }

    pub fn all_pass(reports: &[VerificationReport]) -> bool {
        reports.iter().all(|r| r.pass)
    }
}

pub(crate) fn difference_witness(diff: &Difference) -> Value {
    serde_json::json!({
        "row": diff.row,
        "col": diff.col,
        "lhs": diff.left.to_string(),
        "rhs": diff.right.to_string(),
    })
}
