//! Streaming execution of annotated physical plans.

use std::collections::BTreeMap;
use std::time::Instant;

use tracing::{debug, warn};

use super::eval::{apply_stages, compare_values, eval_bool, RowCtx};
use super::{AccState, Accumulator, EngineConfig, EngineError, ExecStats, Resolution, ResolvedBy, Verdict};
use crate::claims::{cmp_real, ClaimStructure, CmpOp, GroupAggregate, Quantifier};
use crate::dsl::{Analysis, Expr, Stage};
use crate::optimizer::{PhysOp, PhysicalPlan, Strategy};
use crate::oracle::SemanticOracle;
use crate::provenance::{assemble, GroupTrace, Observation, Standing, Trace};
use crate::relation::{AttrValue, Relation, TupleRow};
use crate::relevance::{relevance_order, similarity_prefilter, SearchSpec};
use crate::stats::{
    allocate_budget, cs_resolve_interval, shuffle, shuffle_blocks, BudgetPlan, ConfidenceState, CsDecision, CsMode,
    CsTarget,
};

/// Drives a group-contiguous stream of already-evaluated observations
/// through one accumulator per group, skipping the rest of a group once
/// its accumulator resolves.
pub fn streaming_group_aggregate<I, F>(stream: I, mut make: F) -> Result<Vec<(String, Accumulator)>, EngineError>
where
    I: IntoIterator<Item = (String, Observation)>,
    F: FnMut(&str) -> Accumulator,
{
    let mut out: Vec<(String, Accumulator)> = Vec::new();
    for (key, (row_id, v)) in stream {
        if out.last().is_none_or(|(k, _)| *k != key) {
            if out.iter().any(|(k, _)| *k == key) {
                return Err(EngineError::NonContiguous(key));
            }
            if let Some((_, acc)) = out.last_mut() {
                acc.exhaust();
            }
            let acc = make(&key);
            out.push((key, acc));
        }
        let acc = &mut out.last_mut().unwrap().1;
        if acc.is_running() {
            acc.accumulate(row_id, v);
        }
    }
    if let Some((_, acc)) = out.last_mut() {
        acc.exhaust();
    }
    Ok(out)
}

enum OpExec<'p> {
    Stages(Vec<Stage>),
    Prefilter { spec: &'p SearchSpec, tau: f64, attr: &'p str },
}

fn lower_ops(ops: &[PhysOp]) -> Vec<OpExec<'_>> {
    ops.iter()
        .map(|op| match op {
            PhysOp::Filter(p) => OpExec::Stages(vec![Stage::Filter { predicate: p.clone() }]),
            PhysOp::Map { expr, alias } => OpExec::Stages(vec![Stage::Map {
                expr: expr.clone(),
                alias: alias.clone(),
            }]),
            PhysOp::Fused(stages) => OpExec::Stages(stages.clone()),
            PhysOp::Prefilter { spec, tau, attr } => OpExec::Prefilter {
                spec,
                tau: *tau,
                attr,
            },
        })
        .collect()
}

struct Ctx<'p> {
    oracle: &'p SemanticOracle,
    cfg: &'p EngineConfig,
    stats: ExecStats,
}

impl Ctx<'_> {
    fn run_ops(&mut self, ops: &[OpExec<'_>], batch: &mut [Option<RowCtx<'_>>]) -> Result<(), EngineError> {
        for op in ops {
            match op {
                OpExec::Stages(stages) => {
                    apply_stages(stages, batch, self.oracle, self.cfg.error_policy, &mut self.stats)?
                }
                OpExec::Prefilter { spec, tau, attr } => {
                    for slot in batch.iter_mut() {
                        if slot
                            .as_ref()
                            .is_some_and(|c| !similarity_prefilter(c.row, spec, *tau, Some(attr)))
                        {
                            *slot = None;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates `ops` over all of `rows` (the count scan).
    fn eager<'r>(&mut self, ops: &[OpExec<'_>], rows: Vec<RowCtx<'r>>) -> Result<Vec<RowCtx<'r>>, EngineError> {
        if ops.is_empty() {
            return Ok(rows);
        }
        let mut out = Vec::new();
        for chunk in rows.chunks(self.cfg.batch_size.max(1)) {
            self.stats.tuples_processed += chunk.len() as u64;
            let mut batch: Vec<Option<RowCtx<'r>>> = chunk.iter().cloned().map(Some).collect();
            self.run_ops(ops, &mut batch)?;
            out.extend(batch.into_iter().flatten());
        }
        Ok(out)
    }
}

/// Lazy per-block tuple source: pulls up to one batch at a time through
/// the remaining operators and evaluates the formula.
struct Cursor<'b, 'r> {
    rows: &'b [RowCtx<'r>],
    next: usize,
    pending: std::collections::VecDeque<Observation>,
}

impl<'b, 'r> Cursor<'b, 'r> {
    fn new(rows: &'b [RowCtx<'r>]) -> Self {
        Self {
            rows,
            next: 0,
            pending: Default::default(),
        }
    }

    fn pull(&mut self, ctx: &mut Ctx<'_>, ops: &[OpExec<'_>], formula: &Expr) -> Result<Option<Observation>, EngineError> {
        while self.pending.is_empty() {
            if self.next >= self.rows.len() {
                return Ok(None);
            }
            let end = (self.next + ctx.cfg.batch_size.max(1)).min(self.rows.len());
            let mut batch: Vec<Option<RowCtx<'r>>> = self.rows[self.next..end].iter().cloned().map(Some).collect();
            ctx.stats.tuples_processed += (end - self.next) as u64;
            self.next = end;
            ctx.run_ops(ops, &mut batch)?;
            for c in batch.into_iter().flatten() {
                let v = eval_bool(formula, &c, &[])?;
                self.pending.push_back((c.row.row_id, v));
            }
        }
        Ok(self.pending.pop_front())
    }

    fn consumed_all(&self) -> bool {
        self.next >= self.rows.len() && self.pending.is_empty()
    }
}

struct Block<'r> {
    key: Vec<AttrValue>,
    label: String,
    rows: Vec<RowCtx<'r>>,
}

fn group_key(row: &TupleRow, keys: &[String]) -> Vec<AttrValue> {
    keys.iter()
        .map(|k| row.get(k).cloned().unwrap_or(AttrValue::Text(String::new())))
        .collect()
}

fn label_of(key: &[AttrValue]) -> String {
    key.iter().map(AttrValue::render).collect::<Vec<_>>().join(" | ")
}

fn block_of<'r>(rows: Vec<RowCtx<'r>>, keys: &[String]) -> Block<'r> {
    let key = rows.first().map(|r| group_key(r.row, keys)).unwrap_or_default();
    Block {
        label: label_of(&key),
        key,
        rows,
    }
}

fn partition<'r>(rows: Vec<RowCtx<'r>>, keys: &[String]) -> Vec<Block<'r>> {
    if keys.is_empty() {
        return vec![block_of(rows, keys)];
    }
    let mut map: BTreeMap<String, Vec<RowCtx<'r>>> = BTreeMap::new();
    for r in rows {
        map.entry(label_of(&group_key(r.row, keys))).or_default().push(r);
    }
    map.into_values().map(|rows| block_of(rows, keys)).collect()
}

fn budget_with_groups(plan: &PhysicalPlan, groups: usize) -> Option<BudgetPlan> {
    plan.budget.as_ref().map(|b| {
        let ops: Vec<_> = b
            .operators
            .iter()
            .map(|o| crate::stats::OperatorBudget {
                accumulators: o.accumulators,
                groups: o.groups.or(Some(groups)),
            })
            .collect();
        allocate_budget(b.alpha, &ops)
    })
}

/// Runs an optimized plan. Plans without a recognized shape fall back to
/// the full-scan interpreter.
pub fn execute(
    plan: &PhysicalPlan,
    relation: &Relation,
    oracle: &SemanticOracle,
    cfg: &EngineConfig,
) -> Result<Verdict, EngineError> {
    let start = Instant::now();
    let Some(analysis) = &plan.analysis else {
        let mut v = super::full_scan(&plan.logical, relation, oracle, cfg)?;
        v.notes.extend(plan.notes.iter().cloned());
        return Ok(v);
    };
    let mut ctx = Ctx {
        oracle,
        cfg,
        stats: ExecStats::default(),
    };
    match run(plan, analysis, relation, &mut ctx) {
        Ok(mut v) => {
            v.stats = ctx.stats;
            v.stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            v.notes.splice(0..0, plan.notes.iter().cloned());
            Ok(v)
        }
        Err(e) => {
            let mut stats = ctx.stats;
            stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            Err(EngineError::Aborted {
                source: Box::new(e),
                stats,
            })
        }
    }
}

struct Outcome {
    value: bool,
    trace: Trace,
    resolution: Resolution,
    notes: Vec<String>,
}

fn run(plan: &PhysicalPlan, analysis: &Analysis, relation: &Relation, ctx: &mut Ctx<'_>) -> Result<Verdict, EngineError> {
    let mut rows: Vec<RowCtx<'_>> = Vec::new();
    for r in &relation.rows {
        let c = RowCtx::new(r);
        let mut keep = true;
        for p in &plan.pushed_filters {
            if !eval_bool(p, &c, &[])? {
                keep = false;
                break;
            }
        }
        if keep {
            rows.push(c);
        }
    }
    let keys = analysis.group_keys().to_vec();
    let mut blocks = partition(rows, &keys);

    let lowered = lower_ops(&plan.ops);
    let (eager_ops, stream_ops) = match plan.count_scan {
        Some(k) => lowered.split_at(k),
        None => lowered.split_at(0),
    };
    let totals_known = plan.count_scan.is_some();
    if !eager_ops.is_empty() {
        for b in &mut blocks {
            let rows = std::mem::take(&mut b.rows);
            b.rows = ctx.eager(eager_ops, rows)?;
        }
    }
    if !keys.is_empty() {
        blocks.retain(|b| !b.rows.is_empty());
    }

    if let Some((spec, attr)) = &plan.order.relevance {
        for b in &mut blocks {
            let refs: Vec<&TupleRow> = b.rows.iter().map(|c| c.row).collect();
            let order = relevance_order(&refs, spec, attr);
            let rows = std::mem::take(&mut b.rows);
            let mut slots: Vec<Option<RowCtx<'_>>> = rows.into_iter().map(Some).collect();
            b.rows = order.into_iter().map(|i| slots[i].take().unwrap()).collect();
        }
    }
    if let Some(s) = plan.order.shuffle {
        if s.hierarchical && !keys.is_empty() {
            let mut raw: Vec<Vec<RowCtx<'_>>> = blocks.drain(..).map(|b| b.rows).collect();
            shuffle_blocks(&mut raw, s.seed, s.within);
            blocks = raw.into_iter().map(|rows| block_of(rows, &keys)).collect();
        } else if s.within {
            for b in &mut blocks {
                shuffle(&mut b.rows, s.seed);
            }
        }
    }
    debug!(blocks = blocks.len(), totals_known, "stream prepared");

    let outcome = match &analysis.structure {
        ClaimStructure::Simple(q) => run_simple(plan, analysis, *q, &blocks[0], totals_known, stream_ops, ctx)?,
        ClaimStructure::Nested { outer, inner, .. } => {
            run_nested(plan, analysis, *outer, *inner, &blocks, totals_known, stream_ops, ctx)?
        }
        ClaimStructure::Ordinal {
            aggregate,
            target,
            rank,
            descending,
            ..
        } => run_ordinal(
            plan,
            analysis,
            OrdinalSpec {
                aggregate: *aggregate,
                target,
                rank: *rank,
                descending: *descending,
            },
            blocks,
            totals_known,
            stream_ops,
            ctx,
        )?,
    };
    Ok(Verdict {
        value: outcome.value,
        tokens: assemble(&outcome.trace, &analysis.formula_id),
        formula_id: analysis.formula_id.clone(),
        stats: ExecStats::default(),
        resolution: outcome.resolution,
        notes: outcome.notes,
        trace: Some(outcome.trace),
    })
}

/// Feeds a block into `acc` until it resolves or the block ends.
fn drive(
    acc: &mut Accumulator,
    rows: &[RowCtx<'_>],
    ops: &[OpExec<'_>],
    formula: &Expr,
    ctx: &mut Ctx<'_>,
) -> Result<bool, EngineError> {
    let mut cur = Cursor::new(rows);
    while acc.is_running() {
        match cur.pull(ctx, ops, formula)? {
            Some((id, v)) => {
                acc.accumulate(id, v);
            }
            None => {
                acc.exhaust();
            }
        }
    }
    Ok(cur.consumed_all())
}

fn new_acc(plan: &PhysicalPlan, level: usize, q: Quantifier, n: Option<usize>, alpha: Option<f64>, cfg: &EngineConfig) -> Accumulator {
    let mut acc = Accumulator::new(q, n).with_hints(plan.flags.early_stopping && plan.aggs[level].hint.is_some());
    if plan.strategy(level) == Strategy::Estimation {
        if let Some(a) = alpha {
            acc = acc.with_estimation(a, cfg.cs_kind, cfg.eps);
        }
    }
    acc
}

fn empty_note(q: Quantifier, n: usize) -> Option<String> {
    (q.is_proportional() && n == 0).then(|| {
        warn!("proportion over empty input; comparison is false");
        "proportion over empty input evaluated as false".to_string()
    })
}

fn run_simple(
    plan: &PhysicalPlan,
    analysis: &Analysis,
    q: Quantifier,
    block: &Block<'_>,
    totals_known: bool,
    ops: &[OpExec<'_>],
    ctx: &mut Ctx<'_>,
) -> Result<Outcome, EngineError> {
    let n = totals_known.then_some(block.rows.len());
    let alpha = plan.budget.as_ref().zip(plan.aggs[0].budget_op).map(|(b, op)| b.alpha_for(op, 1));
    let mut acc = new_acc(plan, 0, q, n, alpha, ctx.cfg);
    let all = drive(&mut acc, &block.rows, ops, &analysis.formula, ctx)?;
    let value = acc.value().expect("driven to completion");
    let resolution = match acc.resolved_by() {
        Some(ResolvedBy::Estimate) => Resolution::Estimated {
            alpha_used: acc.alpha().unwrap_or(0.0),
        },
        Some(ResolvedBy::Exhaustion) if all => Resolution::FullScan,
        _ => Resolution::Deterministic,
    };
    let exhausted = matches!(acc.state(), AccState::Exhausted(_));
    let notes = empty_note(q, acc.seen()).into_iter().collect();
    Ok(Outcome {
        value,
        trace: Trace::Simple {
            quantifier: q,
            value,
            stream: GroupTrace {
                key: String::new(),
                observed: acc.tokens().to_vec(),
                n_total: n.or(exhausted.then_some(acc.seen())),
                exhausted,
                value: Some(value),
                ..Default::default()
            },
        },
        resolution,
        notes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_nested(
    plan: &PhysicalPlan,
    analysis: &Analysis,
    outer: Quantifier,
    inner: Quantifier,
    blocks: &[Block<'_>],
    totals_known: bool,
    ops: &[OpExec<'_>],
    ctx: &mut Ctx<'_>,
) -> Result<Outcome, EngineError> {
    let budget = budget_with_groups(plan, blocks.len());
    let alpha_at = |level: usize, group: usize| {
        budget
            .as_ref()
            .zip(plan.aggs[level].budget_op)
            .map(|(b, op)| b.alpha_for(op, group))
    };
    let n_groups = totals_known.then_some(blocks.len());
    let mut outer_acc = new_acc(plan, 1, outer, n_groups, alpha_at(1, 1), ctx.cfg);
    let mut groups = Vec::new();
    let mut alpha_used = 0.0;
    let mut estimated = false;
    let mut full = true;
    let mut full_outer = true;
    for (gi, block) in blocks.iter().enumerate() {
        if !outer_acc.is_running() {
            full = false;
            full_outer = false;
            break;
        }
        let n = totals_known.then_some(block.rows.len());
        let mut acc = new_acc(plan, 0, inner, n, alpha_at(0, gi + 1), ctx.cfg);
        let all = drive(&mut acc, &block.rows, ops, &analysis.formula, ctx)?;
        if acc.seen() == 0 && !totals_known {
            // every tuple filtered out: the group does not exist
            continue;
        }
        if let Some(a) = acc.alpha() {
            alpha_used += a;
        }
        estimated |= acc.resolved_by() == Some(ResolvedBy::Estimate);
        full &= all && acc.resolved_by() == Some(ResolvedBy::Exhaustion);
        let v = acc.value().expect("driven to completion");
        let exhausted = matches!(acc.state(), AccState::Exhausted(_));
        groups.push(GroupTrace {
            key: block.label.clone(),
            observed: acc.tokens().to_vec(),
            n_total: n.or(exhausted.then_some(acc.seen())),
            exhausted,
            value: Some(v),
            ..Default::default()
        });
        outer_acc.accumulate(gi, v);
    }
    outer_acc.exhaust();
    if let Some(a) = outer_acc.alpha() {
        alpha_used += a;
    }
    estimated |= outer_acc.resolved_by() == Some(ResolvedBy::Estimate);
    full &= outer_acc.resolved_by() == Some(ResolvedBy::Exhaustion);
    let value = outer_acc.value().expect("exhausted");
    let resolution = if estimated {
        Resolution::Estimated { alpha_used }
    } else if full {
        Resolution::FullScan
    } else {
        Resolution::Deterministic
    };
    Ok(Outcome {
        value,
        trace: Trace::Nested {
            outer,
            inner,
            value,
            n_groups: n_groups.or(full_outer.then_some(groups.len())),
            groups,
        },
        resolution,
        notes: empty_note(outer, outer_acc.seen()).into_iter().collect(),
    })
}

struct OrdinalSpec<'a> {
    aggregate: GroupAggregate,
    target: &'a [AttrValue],
    rank: u32,
    descending: bool,
}

fn agg_value(agg: GroupAggregate, pos: usize, n: usize) -> f64 {
    match agg {
        GroupAggregate::Count => pos as f64,
        GroupAggregate::Proportion if n == 0 => 0.0,
        GroupAggregate::Proportion => pos as f64 / n as f64,
    }
}

/// Bounds on a group's final aggregate after `seen` tuples with `pos`
/// positives out of a known or unknown total.
fn value_bounds(agg: GroupAggregate, pos: usize, seen: usize, n: Option<usize>) -> (f64, f64) {
    match (agg, n) {
        (GroupAggregate::Count, Some(n)) => (pos as f64, (pos + n - seen) as f64),
        (GroupAggregate::Count, None) => (pos as f64, f64::INFINITY),
        (GroupAggregate::Proportion, Some(n)) if n > 0 => (pos as f64 / n as f64, (pos + n - seen) as f64 / n as f64),
        (GroupAggregate::Proportion, _) => (0.0, 1.0),
    }
}

fn strictly_above(a: f64, b: f64) -> bool {
    a > b && !cmp_real(a, CmpOp::Eq, b)
}

#[allow(clippy::too_many_arguments)]
fn run_ordinal(
    plan: &PhysicalPlan,
    analysis: &Analysis,
    spec: OrdinalSpec<'_>,
    mut blocks: Vec<Block<'_>>,
    totals_known: bool,
    ops: &[OpExec<'_>],
    ctx: &mut Ctx<'_>,
) -> Result<Outcome, EngineError> {
    let agg = spec.aggregate;
    let mut notes = Vec::new();
    let is_target = |b: &Block<'_>| {
        b.key.len() == spec.target.len()
            && b.key.iter().zip(spec.target).all(|(k, t)| compare_values(k, CmpOp::Eq, t) == Some(true))
    };
    if let Some(t) = blocks.iter().position(is_target) {
        let tb = blocks.remove(t);
        blocks.insert(0, tb);
    }
    let budget = budget_with_groups(plan, blocks.len());
    let early = plan.flags.early_stopping;
    let estimating = plan.strategy(0) == Strategy::Estimation;

    // the target group is always evaluated exactly
    let mut groups: Vec<GroupTrace> = Vec::new();
    let mut target_value = None;
    let mut start = 0;
    if blocks.first().is_some_and(is_target) {
        start = 1;
        let mut cur = Cursor::new(&blocks[0].rows);
        let mut obs = Vec::new();
        while let Some(o) = cur.pull(ctx, ops, &analysis.formula)? {
            obs.push(o);
        }
        if !obs.is_empty() {
            let pos = obs.iter().filter(|o| o.1).count();
            target_value = Some(agg_value(agg, pos, obs.len()));
            groups.push(GroupTrace {
                key: blocks[0].label.clone(),
                n_total: Some(obs.len()),
                observed: obs,
                exhausted: true,
                ..Default::default()
            });
        }
    }
    let Some(vt) = target_value else {
        notes.push(format!(
            "target missing: no group with key {}",
            label_of(spec.target)
        ));
        for b in &blocks[start..] {
            let mut cur = Cursor::new(&b.rows);
            let mut obs = Vec::new();
            if !early {
                while let Some(o) = cur.pull(ctx, ops, &analysis.formula)? {
                    obs.push(o);
                }
            }
            if !obs.is_empty() {
                groups.push(GroupTrace {
                    key: b.label.clone(),
                    n_total: Some(obs.len()),
                    observed: obs,
                    exhausted: true,
                    ..Default::default()
                });
            }
        }
        return Ok(Outcome {
            value: false,
            trace: Trace::Ordinal {
                aggregate: agg,
                target: None,
                groups,
            },
            resolution: if early { Resolution::Deterministic } else { Resolution::FullScan },
            notes,
        });
    };

    let better = |v: f64| if spec.descending { strictly_above(v, vt) } else { strictly_above(vt, v) };
    let mut better_values: Vec<f64> = Vec::new();
    let mut refuted = false;
    let mut alpha_used = 0.0;
    let mut estimated = false;
    let mut full = true;
    for (bi, b) in blocks.iter().enumerate().skip(start) {
        if refuted {
            full = false;
            break;
        }
        let n = totals_known.then_some(b.rows.len());
        let alpha = budget
            .as_ref()
            .zip(plan.aggs[0].budget_op)
            .map(|(bp, op)| bp.alpha_for(op, bi + 1 - start));
        let cs_target = match agg {
            GroupAggregate::Proportion => Some(()),
            GroupAggregate::Count => n.map(|_| ()),
        };
        let mut cs = (estimating && cs_target.is_some())
            .then_some(alpha)
            .flatten()
            .map(|a| {
                let mode = n.map_or(CsMode::WithReplacement, |n_total| CsMode::WithoutReplacement { n_total });
                ConfidenceState::new(a, mode, ctx.cfg.cs_kind)
            });
        if let Some(c) = &cs {
            alpha_used += c.alpha;
        }
        let mut cur = Cursor::new(&b.rows);
        let mut obs: Vec<Observation> = Vec::new();
        let mut standing: Option<Standing> = None;
        let mut bounds = None;
        let mut must_finish = false;
        while let Some(o) = cur.pull(ctx, ops, &analysis.formula)? {
            obs.push(o);
            if must_finish {
                continue;
            }
            let pos = obs.iter().filter(|o| o.1).count();
            let (lo, hi) = value_bounds(agg, pos, obs.len(), n);
            let remaining = n.is_some_and(|n| obs.len() < n);
            if early && remaining && strictly_above(lo, vt) {
                standing = Some(Standing::Above);
                bounds = Some((lo, hi));
                if spec.descending && spec.rank >= 2 {
                    must_finish = true;
                    continue;
                }
                if spec.descending {
                    refuted = true;
                }
                break;
            }
            if let Some(state) = cs.as_mut() {
                if n.is_some_and(|n| obs.len() >= n) {
                    continue;
                }
                state.update(o.1).expect("one update per tuple");
                let (l, h) = state.interval();
                let scale = match agg {
                    GroupAggregate::Count => n.unwrap_or(1) as f64,
                    GroupAggregate::Proportion => 1.0,
                };
                let (l, h) = (l * scale, h * scale);
                let eq_target = match agg {
                    GroupAggregate::Count => CsTarget::Count(crate::claims::Comparison::new(CmpOp::Eq, vt)),
                    GroupAggregate::Proportion => {
                        CsTarget::Proportion(crate::claims::Comparison::new(CmpOp::Eq, vt))
                    }
                };
                let tie = vt != 0.0
                    && cs_resolve_interval(state.interval().0, state.interval().1, eq_target, ctx.cfg.eps, n)
                        == CsDecision::Resolved(true);
                let s = if strictly_above(l, vt) {
                    Some(Standing::Above)
                } else if strictly_above(vt, h) {
                    Some(Standing::Below)
                } else if tie {
                    Some(Standing::Equal)
                } else {
                    None
                };
                if let Some(s) = s {
                    estimated = true;
                    standing = Some(s);
                    bounds = Some((l, h));
                    let is_better = match s {
                        Standing::Above => spec.descending,
                        Standing::Below => !spec.descending,
                        Standing::Equal => false,
                    };
                    if is_better && spec.rank >= 2 {
                        must_finish = true;
                        cs = None;
                        continue;
                    }
                    if is_better {
                        refuted = true;
                    }
                    break;
                }
            }
        }
        if obs.is_empty() {
            continue;
        }
        let exhausted = cur.consumed_all() && (standing.is_none() || must_finish);
        full &= exhausted;
        let pos = obs.iter().filter(|o| o.1).count();
        if exhausted {
            let v = agg_value(agg, pos, obs.len());
            if better(v) {
                if !better_values.iter().any(|&w| cmp_real(w, CmpOp::Eq, v)) {
                    better_values.push(v);
                }
                if better_values.len() as u32 >= spec.rank {
                    refuted = true;
                }
            }
        }
        groups.push(GroupTrace {
            key: b.label.clone(),
            n_total: n.or(exhausted.then_some(obs.len())),
            observed: obs,
            exhausted,
            versus_target: if exhausted { None } else { standing },
            bounds: if exhausted { None } else { bounds },
            ..Default::default()
        });
    }
    let value = !refuted && better_values.len() as u32 + 1 == spec.rank;
    let resolution = if estimated {
        Resolution::Estimated { alpha_used }
    } else if full {
        Resolution::FullScan
    } else {
        Resolution::Deterministic
    };
    Ok(Outcome {
        value,
        trace: Trace::Ordinal {
            aggregate: agg,
            target: Some(0),
            groups,
        },
        resolution,
        notes,
    })
}
