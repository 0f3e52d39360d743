//! Expression evaluation and batched semantic stage evaluation.

use std::collections::BTreeMap;

use tracing::warn;

use super::{EngineError, ErrorPolicy, ExecStats};
use crate::claims::{cmp_real, CmpOp};
use crate::dsl::{Expr, PromptExpr, Stage};
use crate::oracle::{placeholders, Answer, OracleError, Question, SemanticOracle};
use crate::relation::{AttrValue, TupleRow};

pub trait Lookup {
    fn lookup(&self, name: &str) -> Option<&AttrValue>;
}

/// A tuple flowing through the pipeline: base attributes plus mapped ones.
#[derive(Debug, Clone)]
pub struct RowCtx<'a> {
    pub row: &'a TupleRow,
    pub computed: BTreeMap<String, AttrValue>,
}

impl<'a> RowCtx<'a> {
    pub fn new(row: &'a TupleRow) -> Self {
        Self {
            row,
            computed: BTreeMap::new(),
        }
    }
}

impl Lookup for RowCtx<'_> {
    fn lookup(&self, name: &str) -> Option<&AttrValue> {
        self.computed.get(name).or_else(|| self.row.get(name))
    }
}

impl Lookup for BTreeMap<String, AttrValue> {
    fn lookup(&self, name: &str) -> Option<&AttrValue> {
        self.get(name)
    }
}

/// Prompt answers for one tuple.
pub type Answers<'e> = [(&'e PromptExpr, AttrValue)];

fn type_error(e: &Expr, why: &str) -> EngineError {
    EngineError::Eval(format!("{why} in `{e}`"))
}

/// `None` when the operands are incomparable.
pub(crate) fn compare_values(a: &AttrValue, op: CmpOp, b: &AttrValue) -> Option<bool> {
    if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
        // proportions over empty input are NaN: every comparison is false
        if x.is_nan() || y.is_nan() {
            return Some(false);
        }
        return Some(cmp_real(x, op, y));
    }
    let eq = match (a, b) {
        (AttrValue::Bool(x), AttrValue::Bool(y)) => x == y,
        _ => a.as_str()? == b.as_str()?,
    };
    match op {
        CmpOp::Eq => Some(eq),
        CmpOp::Ne => Some(!eq),
        _ => None,
    }
}

pub fn eval(e: &Expr, row: &dyn Lookup, answers: &Answers<'_>) -> Result<AttrValue, EngineError> {
    Ok(match e {
        Expr::Col(c) => row
            .lookup(c)
            .cloned()
            .ok_or_else(|| EngineError::Eval(format!("unknown column `{c}`")))?,
        Expr::Lit(v) => v.clone(),
        Expr::Prompt(p) => answers
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| type_error(e, "unevaluated prompt"))?,
        Expr::Cmp(a, op, b) => {
            let (x, y) = (eval(a, row, answers)?, eval(b, row, answers)?);
            AttrValue::Bool(compare_values(&x, *op, &y).ok_or_else(|| type_error(e, "incomparable operands"))?)
        }
        Expr::And(a, b) => AttrValue::Bool(eval_bool(a, row, answers)? & eval_bool(b, row, answers)?),
        Expr::Or(a, b) => AttrValue::Bool(eval_bool(a, row, answers)? | eval_bool(b, row, answers)?),
        Expr::Not(a) => AttrValue::Bool(!eval_bool(a, row, answers)?),
    })
}

pub fn eval_bool(e: &Expr, row: &dyn Lookup, answers: &Answers<'_>) -> Result<bool, EngineError> {
    eval(e, row, answers)?
        .as_bool()
        .ok_or_else(|| type_error(e, "expected a boolean"))
}

/// Applies symbolic and semantic stages to a batch of tuples. Semantic
/// prompts of all `stages` go out as one (fused) request per live tuple.
/// Dropped tuples become `None`.
pub fn apply_stages(
    stages: &[Stage],
    batch: &mut [Option<RowCtx<'_>>],
    oracle: &SemanticOracle,
    policy: ErrorPolicy,
    stats: &mut ExecStats,
) -> Result<(), EngineError> {
    let prompts: Vec<&PromptExpr> = {
        let mut v: Vec<&PromptExpr> = Vec::new();
        for s in stages {
            for p in s.expr().prompts() {
                if !v.contains(&p) {
                    v.push(p);
                }
            }
        }
        v
    };
    let mut answers: Vec<Vec<(&PromptExpr, AttrValue)>> = vec![Vec::new(); batch.len()];
    if !prompts.is_empty() {
        let live: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].is_some()).collect();
        let questions: Vec<Question> = prompts
            .iter()
            .map(|p| Question {
                template: p.template.clone(),
                return_type: p.return_type.clone(),
            })
            .collect();
        let reqs: Vec<_> = live
            .iter()
            .map(|&i| {
                let ctx = batch[i].as_ref().unwrap();
                let mut attrs = BTreeMap::new();
                for p in &prompts {
                    for name in placeholders(&p.template) {
                        if let Some(v) = ctx.lookup(&name) {
                            attrs.insert(name, v.render());
                        }
                    }
                }
                oracle.tuple_request(questions.clone(), attrs)
            })
            .collect();
        let results = oracle.evaluate_batch(&reqs);
        for ((&i, req), res) in live.iter().zip(&reqs).zip(results) {
            stats.oracle_calls += 1;
            let res = match res {
                Err(OracleError::Parse { .. }) => {
                    stats.oracle_calls += 1;
                    oracle.evaluate_fresh(req)
                }
                other => other,
            };
            match res {
                Ok(a) => {
                    stats.record(&a);
                    answers[i] = prompts.iter().copied().zip(a.values).collect();
                }
                Err(OracleError::Parse { raw, expected }) => {
                    let row_id = batch[i].as_ref().unwrap().row.row_id;
                    match policy {
                        ErrorPolicy::Abort => {
                            return Err(EngineError::MalformedAnswer { row_id, raw, expected });
                        }
                        ErrorPolicy::Skip => {
                            warn!(row_id, %raw, "malformed oracle answer, skipping tuple");
                            stats.skipped += 1;
                            batch[i] = None;
                        }
                    }
                }
                Err(e) => return Err(EngineError::Oracle(e)),
            }
        }
    }
    for (slot, ans) in batch.iter_mut().zip(&answers) {
        let Some(ctx) = slot.as_mut() else { continue };
        let mut keep = true;
        for s in stages {
            match s {
                Stage::Filter { predicate } => {
                    if !eval_bool(predicate, ctx, ans)? {
                        keep = false;
                        break;
                    }
                }
                Stage::Map { expr, alias } => {
                    let v = eval(expr, ctx, ans)?;
                    ctx.computed.insert(alias.clone(), v);
                }
            }
        }
        if !keep {
            *slot = None;
        }
    }
    Ok(())
}

impl ExecStats {
    pub(crate) fn record(&mut self, a: &Answer) {
        if a.cached {
            self.cache_hits += 1;
        } else {
            self.backend_calls += 1;
            self.input_tokens += a.input_tokens;
            self.output_tokens += a.output_tokens;
        }
    }
}
