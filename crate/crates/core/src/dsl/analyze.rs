//! Recovers the claim structure from a plan by matching the operator chain
//! against the simple, nested and ordinal shapes.

use serde::{Deserialize, Serialize};

use super::{print_expr, AggExpr, AggFn, DslError, Expr, PlanNode, RANK_COLUMN};
use crate::claims::{ClaimStructure, CmpOp, Comparison, GroupAggregate, Quantifier};
use crate::relation::AttrValue;

/// A per-tuple operator below the first aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Filter { predicate: Expr },
    Map { expr: Expr, alias: String },
}

impl Stage {
    pub fn expr(&self) -> &Expr {
        match self {
            Stage::Filter { predicate } => predicate,
            Stage::Map { expr, .. } => expr,
        }
    }

    pub fn is_semantic(&self) -> bool {
        self.expr().is_semantic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub structure: ClaimStructure,
    pub stages: Vec<Stage>,
    /// Per-tuple formula: the innermost aggregate's argument.
    pub formula: Expr,
    /// Stable identifier of the formula for provenance tokens.
    pub formula_id: String,
    /// Output column of the innermost aggregate.
    pub inner_alias: String,
}

impl Analysis {
    pub fn group_keys(&self) -> &[String] {
        match &self.structure {
            ClaimStructure::Simple(_) => &[],
            ClaimStructure::Ordinal { group_keys, .. } | ClaimStructure::Nested { group_keys, .. } => group_keys,
        }
    }

    /// Map stage that produces `column`, if any.
    pub fn producer(&self, column: &str) -> Option<&Expr> {
        self.stages.iter().rev().find_map(|s| match s {
            Stage::Map { expr, alias } if alias == column => Some(expr),
            _ => None,
        })
    }
}

fn unsupported(node: &PlanNode, why: &str) -> DslError {
    DslError::Unsupported(format!("{} ({why})", node.op_name()))
}

fn threshold(e: &Expr) -> Option<f64> {
    match e {
        Expr::Lit(v) => v.as_f64(),
        _ => None,
    }
}

/// `col(alias) op k` with either side order.
fn column_comparison(e: &Expr, alias: &str) -> Option<Comparison> {
    let Expr::Cmp(a, op, b) = e else { return None };
    match (a.as_ref(), b.as_ref()) {
        (Expr::Col(c), rhs) if c == alias => Some(Comparison::new(*op, threshold(rhs)?)),
        (lhs, Expr::Col(c)) if c == alias => Some(Comparison::new(op.flip(), threshold(lhs)?)),
        _ => None,
    }
}

/// Truth polarity of a check over a boolean column: `col(a)`,
/// `col(a).eq(true)`, `not col(a)` and friends.
fn column_polarity(e: &Expr, alias: &str) -> Option<bool> {
    match e {
        Expr::Col(c) if c == alias => Some(true),
        Expr::Not(inner) => column_polarity(inner, alias).map(|p| !p),
        Expr::Cmp(a, op @ (CmpOp::Eq | CmpOp::Ne), b) => {
            let (col, lit) = match (a.as_ref(), b.as_ref()) {
                (c @ Expr::Col(_), Expr::Lit(v)) | (Expr::Lit(v), c @ Expr::Col(_)) => (c, v.as_bool()?),
                _ => return None,
            };
            let p = column_polarity(col, alias)?;
            Some(if *op == CmpOp::Eq { p == lit } else { p != lit })
        }
        _ => None,
    }
}

/// Quantifier expressed by `agg` followed by a predicate over its alias.
fn quantifier(agg: &AggExpr, pred: &Expr) -> Option<Quantifier> {
    match agg.func {
        AggFn::BoolOr | AggFn::BoolAnd => {
            let positive = column_polarity(pred, &agg.alias)?;
            Some(match (agg.func, positive) {
                (AggFn::BoolOr, true) => Quantifier::Exists,
                (AggFn::BoolAnd, true) => Quantifier::Forall,
                // "none satisfy" and "not all satisfy"
                (AggFn::BoolOr, false) => Quantifier::Cardinal(Comparison::new(CmpOp::Eq, 0.0)),
                _ => Quantifier::Proportional(Comparison::new(CmpOp::Lt, 1.0)),
            })
        }
        AggFn::CountIf => column_comparison(pred, &agg.alias).map(Quantifier::Cardinal),
        AggFn::Proportion => column_comparison(pred, &agg.alias).map(Quantifier::Proportional),
    }
}

/// Equality filters on each group key, joined by `and`.
fn key_targets(e: &Expr, keys: &[String], out: &mut Vec<(String, AttrValue)>) -> bool {
    match e {
        Expr::And(a, b) => key_targets(a, keys, out) && key_targets(b, keys, out),
        Expr::Cmp(a, CmpOp::Eq, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Col(c), Expr::Lit(v)) | (Expr::Lit(v), Expr::Col(c)) if keys.contains(c) => {
                out.push((c.clone(), v.clone()));
                true
            }
            _ => false,
        },
        _ => false,
    }
}

fn single_agg(node: &PlanNode) -> Option<(&AggExpr, &[String])> {
    match node {
        PlanNode::Aggregate { aggs, group_by, .. } if aggs.len() == 1 => Some((&aggs[0], group_by)),
        _ => None,
    }
}

fn formula_id(formula: &Expr, stages: &[Stage]) -> String {
    if let Expr::Col(c) = formula {
        let produced = stages.iter().rev().find_map(|s| match s {
            Stage::Map { expr: Expr::Prompt(p), alias } if alias == c => Some(p.template.clone()),
            _ => None,
        });
        if let Some(t) = produced {
            return t;
        }
    }
    print_expr(formula)
}

/// Classifies a well-typed plan. Unmatched plans are reported with the
/// operator that broke the pattern.
pub fn analyze(plan: &PlanNode) -> Result<Analysis, DslError> {
    let chain = plan.chain();
    let first_agg = chain
        .iter()
        .position(|n| matches!(n, PlanNode::Aggregate { .. }))
        .ok_or_else(|| unsupported(plan, "no aggregate"))?;
    let mut stages = Vec::new();
    for node in &chain[1..first_agg] {
        stages.push(match node {
            PlanNode::Filter { predicate, .. } => Stage::Filter {
                predicate: predicate.clone(),
            },
            PlanNode::Map { expr, alias, .. } => Stage::Map {
                expr: expr.clone(),
                alias: alias.clone(),
            },
            other => return Err(unsupported(other, "only filter and map may precede the aggregate")),
        });
    }
    let rest = &chain[first_agg..];
    let check_pred = match rest.last() {
        Some(PlanNode::Check { predicate, .. }) => predicate,
        _ => return Err(unsupported(plan, "missing terminal check")),
    };
    if let Some(extra) = rest[..rest.len() - 1].iter().find(|n| matches!(n, PlanNode::Check { .. })) {
        return Err(unsupported(extra, "more than one check"));
    }
    let (inner, keys) = single_agg(rest[0]).ok_or_else(|| unsupported(rest[0], "expected a single aggregation"))?;
    let structure = match rest.len() {
        2 if keys.is_empty() => {
            let q = quantifier(inner, check_pred).ok_or_else(|| unsupported(rest[1], "check does not compare the aggregate"))?;
            ClaimStructure::Simple(q)
        }
        3 if !keys.is_empty() => {
            let (outer, outer_keys) =
                single_agg(rest[1]).ok_or_else(|| unsupported(rest[1], "expected an outer aggregation"))?;
            if !outer_keys.is_empty() {
                return Err(unsupported(rest[1], "outer aggregate must be ungrouped"));
            }
            let inner_q = quantifier(inner, &outer.arg)
                .ok_or_else(|| unsupported(rest[1], "outer argument does not compare the inner aggregate"))?;
            let outer_q = quantifier(outer, check_pred)
                .ok_or_else(|| unsupported(rest[2], "check does not compare the outer aggregate"))?;
            ClaimStructure::Nested {
                outer: outer_q,
                group_keys: keys.to_vec(),
                inner: inner_q,
            }
        }
        4 if !keys.is_empty() => {
            let aggregate = match inner.func {
                AggFn::CountIf => GroupAggregate::Count,
                AggFn::Proportion => GroupAggregate::Proportion,
                _ => return Err(unsupported(rest[0], "ranking needs count_if or proportion")),
            };
            let descending = match rest[1] {
                PlanNode::WithRank { expr: Expr::Col(c), descending, .. } if c == &inner.alias => *descending,
                other => return Err(unsupported(other, "expected with_rank over the group aggregate")),
            };
            let mut targets = Vec::new();
            match rest[2] {
                PlanNode::Filter { predicate, .. } if key_targets(predicate, keys, &mut targets) => {}
                other => return Err(unsupported(other, "expected a filter selecting the target group")),
            }
            let target: Option<Vec<AttrValue>> = keys
                .iter()
                .map(|k| targets.iter().find(|(c, _)| c == k).map(|(_, v)| v.clone()))
                .collect();
            let target = target.ok_or_else(|| unsupported(rest[2], "every group key needs a target value"))?;
            let rank = match column_comparison(check_pred, RANK_COLUMN) {
                Some(Comparison { op: CmpOp::Eq, threshold }) if threshold >= 1.0 && threshold.fract() == 0.0 => {
                    threshold as u32
                }
                _ => return Err(unsupported(rest[3], "check must be col(\"rank\").eq(r)")),
            };
            ClaimStructure::Ordinal {
                group_keys: keys.to_vec(),
                aggregate,
                target,
                rank,
                descending,
            }
        }
        _ => return Err(unsupported(rest[1.min(rest.len() - 1)], "operator chain matches no claim shape")),
    };
    let formula = inner.arg.clone();
    Ok(Analysis {
        formula_id: formula_id(&formula, &stages),
        structure,
        stages,
        formula,
        inner_alias: inner.alias.clone(),
    })
}

pub fn claim_structure_of(plan: &PlanNode) -> Result<ClaimStructure, DslError> {
    analyze(plan).map(|a| a.structure)
}
