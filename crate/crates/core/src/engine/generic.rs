//! Reference interpreter: evaluates every operator over its whole input
//! with hash aggregation. No early stopping, no provenance.

use std::collections::BTreeMap;
use std::time::Instant;

use tracing::warn;

use super::eval::{apply_stages, eval, eval_bool, Lookup, RowCtx};
use super::{dense_rank, EngineConfig, EngineError, ExecStats, Resolution, Verdict};
use crate::dsl::{AggFn, PlanNode, Stage, RANK_COLUMN};
use crate::oracle::SemanticOracle;
use crate::relation::{AttrValue, Relation};

type AggRow = BTreeMap<String, AttrValue>;

enum Rows<'r> {
    Tuples(Vec<RowCtx<'r>>),
    Agg(Vec<AggRow>),
}

fn lookups<'a>(rows: &'a Rows<'_>) -> Vec<&'a dyn Lookup> {
    match rows {
        Rows::Tuples(t) => t.iter().map(|r| r as &dyn Lookup).collect(),
        Rows::Agg(a) => a.iter().map(|r| r as &dyn Lookup).collect(),
    }
}

pub fn full_scan(
    plan: &PlanNode,
    relation: &Relation,
    oracle: &SemanticOracle,
    cfg: &EngineConfig,
) -> Result<Verdict, EngineError> {
    let start = Instant::now();
    let mut stats = ExecStats::default();
    let mut notes = Vec::new();
    match interpret(plan, relation, oracle, cfg, &mut stats, &mut notes) {
        Ok(value) => {
            stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(Verdict {
                value,
                tokens: Vec::new(),
                formula_id: String::new(),
                stats,
                resolution: Resolution::FullScan,
                notes,
                trace: None,
            })
        }
        Err(e) => {
            stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            Err(EngineError::Aborted {
                source: Box::new(e),
                stats,
            })
        }
    }
}

fn interpret(
    plan: &PlanNode,
    relation: &Relation,
    oracle: &SemanticOracle,
    cfg: &EngineConfig,
    stats: &mut ExecStats,
    notes: &mut Vec<String>,
) -> Result<bool, EngineError> {
    let mut rows = Rows::Tuples(Vec::new());
    for node in plan.chain() {
        rows = match (node, rows) {
            (PlanNode::Scan { .. }, _) => Rows::Tuples(relation.rows.iter().map(RowCtx::new).collect()),
            (PlanNode::Filter { predicate, .. }, Rows::Tuples(t)) => Rows::Tuples(stage(
                Stage::Filter {
                    predicate: predicate.clone(),
                },
                t,
                oracle,
                cfg,
                stats,
            )?),
            (PlanNode::Map { expr, alias, .. }, Rows::Tuples(t)) => Rows::Tuples(stage(
                Stage::Map {
                    expr: expr.clone(),
                    alias: alias.clone(),
                },
                t,
                oracle,
                cfg,
                stats,
            )?),
            (PlanNode::Filter { predicate, .. }, Rows::Agg(a)) => {
                let mut out = Vec::new();
                for r in a {
                    if eval_bool(predicate, &r, &[])? {
                        out.push(r);
                    }
                }
                Rows::Agg(out)
            }
            (PlanNode::Map { expr, alias, .. }, Rows::Agg(mut a)) => {
                for r in &mut a {
                    let v = eval(expr, r, &[])?;
                    r.insert(alias.clone(), v);
                }
                Rows::Agg(a)
            }
            (PlanNode::Aggregate { aggs, group_by, .. }, input) => {
                let lk = lookups(&input);
                let mut groups: BTreeMap<Vec<String>, (AggRow, Vec<&dyn Lookup>)> = BTreeMap::new();
                for r in lk {
                    let mut key_row = AggRow::new();
                    let mut label = Vec::new();
                    for k in group_by {
                        let v = r
                            .lookup(k)
                            .cloned()
                            .ok_or_else(|| EngineError::Eval(format!("unknown group key `{k}`")))?;
                        label.push(v.render());
                        key_row.insert(k.clone(), v);
                    }
                    groups.entry(label).or_insert_with(|| (key_row, Vec::new())).1.push(r);
                }
                if group_by.is_empty() && groups.is_empty() {
                    groups.insert(Vec::new(), (AggRow::new(), Vec::new()));
                }
                let mut out = Vec::new();
                for (_, (mut row, members)) in groups {
                    for a in aggs {
                        let mut pos = 0usize;
                        for m in &members {
                            pos += eval_bool(&a.arg, *m, &[])? as usize;
                        }
                        let n = members.len();
                        let v = match a.func {
                            AggFn::BoolOr => AttrValue::Bool(pos > 0),
                            AggFn::BoolAnd => AttrValue::Bool(pos == n),
                            AggFn::CountIf => AttrValue::Int(pos as i64),
                            AggFn::Proportion if n == 0 => {
                                warn!(alias = %a.alias, "proportion over empty input");
                                notes.push("proportion over empty input evaluated as false".into());
                                AttrValue::Real(f64::NAN)
                            }
                            AggFn::Proportion => AttrValue::Real(pos as f64 / n as f64),
                        };
                        row.insert(a.alias.clone(), v);
                    }
                    out.push(row);
                }
                Rows::Agg(out)
            }
            (PlanNode::WithRank { expr, descending, .. }, input) => {
                let mut a = match input {
                    Rows::Agg(a) => a,
                    Rows::Tuples(_) => return Err(EngineError::Eval("with_rank over unaggregated input".into())),
                };
                let mut vals = Vec::new();
                for r in &a {
                    vals.push(
                        eval(expr, r, &[])?
                            .as_f64()
                            .ok_or_else(|| EngineError::Eval("non-numeric rank expression".into()))?,
                    );
                }
                for (r, rank) in a.iter_mut().zip(dense_rank(&vals, *descending)) {
                    r.insert(RANK_COLUMN.to_string(), AttrValue::Int(rank as i64));
                }
                Rows::Agg(a)
            }
            (PlanNode::Check { predicate, .. }, input) => {
                let lk = lookups(&input);
                let mut all = !lk.is_empty();
                for r in lk {
                    all &= eval_bool(predicate, r, &[])?;
                }
                return Ok(all);
            }
        };
    }
    Err(EngineError::Eval("plan has no check".into()))
}

fn stage<'r>(
    s: Stage,
    rows: Vec<RowCtx<'r>>,
    oracle: &SemanticOracle,
    cfg: &EngineConfig,
    stats: &mut ExecStats,
) -> Result<Vec<RowCtx<'r>>, EngineError> {
    let stages = [s];
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(cfg.batch_size.max(1)) {
        stats.tuples_processed += chunk.len() as u64;
        let mut batch: Vec<Option<RowCtx<'r>>> = chunk.iter().cloned().map(Some).collect();
        apply_stages(&stages, &mut batch, oracle, cfg.error_policy, stats)?;
        out.extend(batch.into_iter().flatten());
    }
    Ok(out)
}
