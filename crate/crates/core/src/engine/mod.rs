//! Iterator-model execution of physical plans.

mod accumulator;
mod eval;
mod exec;
mod generic;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::OracleError;
use crate::provenance::{ProvToken, Trace};
use crate::relevance::DEFAULT_TAU;
use crate::stats::CsKind;

pub use accumulator::{bound_truth, cs_target, AccState, Accumulator, ResolvedBy};
pub use eval::{apply_stages, eval, eval_bool, Lookup, RowCtx};
pub use exec::{execute, streaming_group_aggregate};
pub use generic::full_scan;
pub use rank::dense_rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub batch_size: usize,
    pub error_policy: ErrorPolicy,
    pub alpha: f64,
    pub eps: f64,
    pub tau: f64,
    pub seed: u64,
    pub cs_kind: CsKind,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            error_policy: ErrorPolicy::Abort,
            alpha: 0.05,
            eps: 0.05,
            tau: DEFAULT_TAU,
            seed: 0,
            cs_kind: CsKind::Betting,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecStats {
    /// Requests issued, cache hits and retries included.
    pub oracle_calls: u64,
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Tuples pulled into the operator pipeline.
    pub tuples_processed: u64,
    /// Tuples dropped under the skip policy.
    pub skipped: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Resolution {
    Deterministic,
    Estimated { alpha_used: f64 },
    FullScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: bool,
    pub tokens: Vec<ProvToken>,
    pub formula_id: String,
    pub stats: ExecStats,
    pub resolution: Resolution,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("malformed oracle answer for row {row_id} (expected {expected}): {raw:?}")]
    MalformedAnswer {
        row_id: usize,
        raw: String,
        expected: String,
    },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("group `{0}` reappeared in a group-contiguous stream")]
    NonContiguous(String),
    #[error("{source} (after {} oracle calls)", stats.oracle_calls)]
    Aborted {
        source: Box<EngineError>,
        stats: ExecStats,
    },
}

impl EngineError {
    pub fn partial_stats(&self) -> Option<&ExecStats> {
        match self {
            EngineError::Aborted { stats, .. } => Some(stats),
            _ => None,
        }
    }
}
