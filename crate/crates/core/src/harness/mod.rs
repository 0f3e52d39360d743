//! Benchmark runner, metrics and ablation driver.

pub mod synth;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::claims::Claim;
use crate::dsl::{compile_claim, parse, PlanNode};
use crate::engine::{execute, full_scan, EngineConfig, EngineError, Resolution, Verdict};
use crate::optimizer::{Flags, Optimizer, OptimizerConfig, FLAG_NAMES};
use crate::oracle::{PromptCache, ScriptedBackend, ScriptedFixture, SemanticOracle};
use crate::relation::{Embedder, FeatureHashEmbedder, Relation};

/// Confusion counts and scores with ungrounded claims as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `pairs` are (predicted grounded, actually grounded). Undefined ratios
/// (no predicted or actual positives) are reported as 0.
pub fn metrics(pairs: &[(bool, bool)]) -> Metrics {
    let mut m = Metrics::default();
    for &(pred, truth) in pairs {
        match (!pred, !truth) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn_);
    m.f1 = if m.precision + m.recall > 0.0 {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    } else {
        0.0
    };
    m.accuracy = ratio(m.tp + m.tn, pairs.len());
    m
}

/// A claim with the program a compiler should produce for it and its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchClaim {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<synth::ClaimKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounded: Option<bool>,
}

impl From<synth::SynthClaim> for BenchClaim {
    fn from(c: synth::SynthClaim) -> Self {
        Self {
            text: c.text,
            kind: Some(c.kind),
            program: Some(c.program),
            grounded: c.grounded,
        }
    }
}

pub fn parse_claims_jsonl(src: &str) -> Result<Vec<BenchClaim>, serde_json::Error> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub struct BenchDataset {
    pub relation: Relation,
    pub claims: Vec<BenchClaim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub optimizer: OptimizerConfig,
    pub engine: EngineConfig,
    pub trials: usize,
    /// Simulated latency charged per backend call.
    pub per_call_latency_ms: f64,
    /// Adds measured wall time to the simulated latency. Off for
    /// byte-identical reports.
    pub wall_clock: bool,
    pub model: String,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            engine: EngineConfig::default(),
            trials: 3,
            per_call_latency_ms: 400.0,
            wall_clock: true,
            model: "scripted".into(),
        }
    }
}

impl BenchConfig {
    pub fn with_flags(&self, flags: Flags) -> Self {
        let mut c = self.clone();
        c.optimizer.flags = flags;
        c
    }
}

/// Builds the tuple-level oracle for one trial. The flag says whether the
/// prompt cache is enabled.
pub type OracleFactory<'a> = dyn Fn(bool) -> SemanticOracle + Sync + 'a;

/// Scripted oracle factory: compile answers come from the claims' programs.
pub fn scripted_factory(mut fixture: ScriptedFixture, datasets: &[BenchDataset], model: &str) -> impl Fn(bool) -> SemanticOracle + Sync {
    for d in datasets {
        for c in &d.claims {
            if let Some(p) = &c.program {
                fixture.compile.insert(c.text.clone(), p.clone());
            }
        }
    }
    let backend = Arc::new(ScriptedBackend::new(fixture).expect("fixture regexes compile"));
    let model = model.to_string();
    move |cached| {
        let o = SemanticOracle::new(backend.clone(), model.clone());
        if cached {
            o.with_cache(Arc::new(PromptCache::in_memory()))
        } else {
            o
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub dataset: String,
    pub claim: String,
    pub trial: usize,
    pub verdict: Option<bool>,
    pub grounded: Option<bool>,
    pub resolution: Option<Resolution>,
    pub tokens_cited: usize,
    /// Backend calls, compilation included.
    pub oracle_calls: u64,
    pub cache_hits: u64,
    pub cost: f64,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub metrics: Metrics,
    pub errors: usize,
    pub total_oracle_calls: u64,
    pub mean_cost: f64,
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        Self {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: Spread,
    pub recall: Spread,
    pub f1: Spread,
    pub accuracy: Spread,
    pub mean_cost: Spread,
    pub mean_latency_ms: Spread,
    pub total_oracle_calls: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub flags: Vec<String>,
    pub seed: u64,
    pub alpha: f64,
    pub eps: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub trials: usize,
    pub per_call_latency_ms: f64,
    pub models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigSnapshot,
    pub rows: Vec<ClaimRow>,
    pub trials: Vec<TrialSummary>,
    pub aggregate: Aggregate,
}

/// Optimizes and executes one plan.
pub fn verify_plan(
    plan: &PlanNode,
    relation: &Relation,
    oracle: &SemanticOracle,
    optimizer: &Optimizer,
    engine: &EngineConfig,
    embedder: &dyn Embedder,
) -> Result<Verdict, EngineError> {
    let phys = optimizer.optimize(plan, &relation.schema, oracle, embedder);
    execute(&phys, relation, oracle, engine)
}

fn run_claim(
    claim: &BenchClaim,
    relation: &Relation,
    oracle: &SemanticOracle,
    optimizer: &Optimizer,
    cfg: &BenchConfig,
    trial: usize,
) -> ClaimRow {
    let start = Instant::now();
    let before = oracle.stats();
    let cost_before = oracle.ledger().cost();
    let embedder = FeatureHashEmbedder::default();
    let mut engine = cfg.engine.clone();
    engine.seed = engine.seed.wrapping_add(trial as u64);
    let outcome = compile_claim(&Claim::new(claim.text.clone()), &relation.schema, oracle)
        .map_err(|e| format!("compile: {e}"))
        .and_then(|plan| {
            verify_plan(&plan, relation, oracle, optimizer, &engine, &embedder).map_err(|e| format!("execute: {e}"))
        });
    let after = oracle.stats();
    let calls = after.backend_calls - before.backend_calls;
    let mut row = ClaimRow {
        dataset: relation.name.clone(),
        claim: claim.text.clone(),
        trial,
        verdict: None,
        grounded: claim.grounded,
        resolution: None,
        tokens_cited: 0,
        oracle_calls: calls,
        cache_hits: after.cache_hits - before.cache_hits,
        cost: oracle.ledger().cost() - cost_before,
        latency_ms: calls as f64 * cfg.per_call_latency_ms
            + if cfg.wall_clock {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        error: None,
    };
    match outcome {
        Ok(v) => {
            row.verdict = Some(v.value);
            row.resolution = Some(v.resolution);
            row.tokens_cited = v.tokens.len();
        }
        Err(e) => {
            warn!(claim = %claim.text, error = %e, "claim failed");
            row.error = Some(e);
        }
    }
    row
}

fn summarize(rows: &[ClaimRow]) -> TrialSummary {
    let pairs: Vec<(bool, bool)> = rows.iter().filter_map(|r| Some((r.verdict?, r.grounded?))).collect();
    let n = rows.len().max(1) as f64;
    TrialSummary {
        metrics: metrics(&pairs),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        total_oracle_calls: rows.iter().map(|r| r.oracle_calls).sum(),
        mean_cost: rows.iter().map(|r| r.cost).sum::<f64>() / n,
        mean_latency_ms: rows.iter().map(|r| r.latency_ms).sum::<f64>() / n,
    }
}

/// Runs every claim of every dataset once per trial. Each trial gets a
/// fresh oracle (and cache), and its own shuffle seed.
pub fn run_bench(datasets: &[BenchDataset], cfg: &BenchConfig, make_oracle: &OracleFactory<'_>) -> RunReport {
    let flags = cfg.optimizer.flags;
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for trial in 0..cfg.trials.max(1) {
        let oracle = make_oracle(flags.caching);
        let mut ocfg = cfg.optimizer.clone();
        ocfg.seed = ocfg.seed.wrapping_add(trial as u64);
        let optimizer = Optimizer::new(ocfg);
        let mut trial_rows = Vec::new();
        for d in datasets {
            for c in &d.claims {
                trial_rows.push(run_claim(c, &d.relation, &oracle, &optimizer, cfg, trial));
            }
        }
        let s = summarize(&trial_rows);
        info!(trial, f1 = s.metrics.f1, calls = s.total_oracle_calls, "trial finished");
        trials.push(s);
        rows.extend(trial_rows);
    }
    let col = |f: &dyn Fn(&TrialSummary) -> f64| Spread::of(&trials.iter().map(f).collect::<Vec<_>>());
    let aggregate = Aggregate {
        precision: col(&|t| t.metrics.precision),
        recall: col(&|t| t.metrics.recall),
        f1: col(&|t| t.metrics.f1),
        accuracy: col(&|t| t.metrics.accuracy),
        mean_cost: col(&|t| t.mean_cost),
        mean_latency_ms: col(&|t| t.mean_latency_ms),
        total_oracle_calls: col(&|t| t.total_oracle_calls as f64),
    };
    RunReport {
        config: ConfigSnapshot {
            flags: flags.enabled().into_iter().map(String::from).collect(),
            seed: cfg.optimizer.seed,
            alpha: cfg.engine.alpha,
            eps: cfg.engine.eps,
            tau: cfg.optimizer.tau,
            batch_size: cfg.engine.batch_size,
            trials: cfg.trials.max(1),
            per_call_latency_ms: cfg.per_call_latency_ms,
            models: vec![cfg.model.clone()],
        },
        rows,
        trials,
        aggregate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Disabled optimization, or `all`.
    pub disabled: String,
    pub calls: Spread,
    pub cost: Spread,
    pub latency: Spread,
    pub f1: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: Aggregate,
    /// Multipliers relative to the fully optimized run, per trial.
    pub rows: Vec<AblationRow>,
}

/// Reruns the suite with each of `disable` turned off in turn (`all` turns
/// every optimization off) and reports per-trial multipliers.
pub fn run_ablation(
    datasets: &[BenchDataset],
    cfg: &BenchConfig,
    disable: &[String],
    make_oracle: &OracleFactory<'_>,
) -> Result<AblationReport, crate::optimizer::UnknownFlag> {
    let base_flags = cfg.optimizer.flags;
    let baseline = run_bench(datasets, cfg, make_oracle);
    let mut rows = Vec::new();
    for name in disable {
        let flags = if name == "all" {
            Flags::none()
        } else {
            base_flags.without(name)?
        };
        let r = run_bench(datasets, &cfg.with_flags(flags), make_oracle);
        let mult = |f: &dyn Fn(&TrialSummary) -> f64| {
            let xs: Vec<f64> = baseline
                .trials
                .iter()
                .zip(&r.trials)
                .map(|(b, t)| {
                    let d = f(b);
                    if d > 0.0 {
                        f(t) / d
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            Spread::of(&xs)
        };
        rows.push(AblationRow {
            disabled: name.clone(),
            calls: mult(&|t| t.total_oracle_calls as f64),
            cost: mult(&|t| t.mean_cost),
            latency: mult(&|t| t.mean_latency_ms),
            f1: r.aggregate.f1,
        });
    }
    Ok(AblationReport {
        baseline: baseline.aggregate,
        rows,
    })
}

/// Every single-flag ablation plus `all`.
pub fn default_ablations() -> Vec<String> {
    FLAG_NAMES.iter().map(|s| s.to_string()).chain(["all".to_string()]).collect()
}

/// Labels claims with the full-scan verdict of their program.
pub fn label_claims(
    claims: &mut [BenchClaim],
    relation: &Relation,
    oracle: &SemanticOracle,
    engine: &EngineConfig,
) -> BTreeMap<String, String> {
    let mut failures = BTreeMap::new();
    for c in claims {
        let Some(p) = &c.program else { continue };
        match parse(p, &relation.schema)
            .map_err(|e| e.to_string())
            .and_then(|plan| full_scan(&plan, relation, oracle, engine).map_err(|e| e.to_string()))
        {
            Ok(v) => c.grounded = Some(v.value),
            Err(e) => {
                failures.insert(c.text.clone(), e);
            }
        }
    }
    failures
}

pub fn render_ablation(r: &AblationReport) -> String {
    let mut s = format!(
        "{:<16} {:>22} {:>22} {:>22}\n",
        "disabled", "calls x [min,max]", "cost x [min,max]", "latency x [min,max]"
    );
    let cell = |sp: &Spread| format!("{:.2} [{:.2},{:.2}]", sp.mean, sp.min, sp.max);
    for row in &r.rows {
        s.push_str(&format!(
            "{:<16} {:>22} {:>22} {:>22}\n",
            row.disabled,
            cell(&row.calls),
            cell(&row.cost),
            cell(&row.latency)
        ));
    }
    s
}

pub fn render_report(r: &RunReport) -> String {
    let a = &r.aggregate;
    let cell = |sp: &Spread| format!("{:.3} [{:.3},{:.3}]", sp.mean, sp.min, sp.max);
    format!(
        "precision {}\nrecall    {}\nf1        {}\naccuracy  {}\ncost      {}\nlatency   {} ms\ncalls     {}\n",
        cell(&a.precision),
        cell(&a.recall),
        cell(&a.f1),
        cell(&a.accuracy),
        cell(&a.mean_cost),
        cell(&a.mean_latency_ms),
        cell(&a.total_oracle_calls)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_example() {
        // T = ungrounded, so grounded = !T
        let pred = [true, true, false, false];
        let truth = [true, false, false, false];
        let pairs: Vec<_> = pred.iter().zip(&truth).map(|(p, t)| (!p, !t)).collect();
        let m = metrics(&pairs);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn spread() {
        let s = Spread::of(&[1.0, 3.0, 2.0]);
        assert_eq!((s.mean, s.min, s.max), (2.0, 1.0, 3.0));
    }
}
