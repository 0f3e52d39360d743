//! Static typing of plans against a relation schema.

use std::collections::BTreeMap;

use super::{print_expr, AggFn, DslError, Expr, PlanNode, RANK_COLUMN};
use crate::claims::CmpOp;
use crate::oracle::{placeholders, ReturnType};
use crate::relation::{AttrType, AttrValue, Schema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Bool,
    Int,
    Real,
    /// Text or categorical values.
    Str,
    /// Output of an enum-typed prompt.
    Enum(Vec<String>),
}

impl ColumnType {
    fn of_attr(t: AttrType) -> Self {
        match t {
            AttrType::Text | AttrType::Categorical => ColumnType::Str,
            AttrType::Int => ColumnType::Int,
            AttrType::Real => ColumnType::Real,
            AttrType::Bool => ColumnType::Bool,
        }
    }

    fn of_return(rt: &ReturnType) -> Self {
        match rt {
            ReturnType::Bool => ColumnType::Bool,
            ReturnType::Int => ColumnType::Int,
            ReturnType::Real => ColumnType::Real,
            ReturnType::Enum(labels) => ColumnType::Enum(labels.clone()),
        }
    }

    fn of_lit(v: &AttrValue) -> Self {
        match v {
            AttrValue::Text(_) | AttrValue::Categorical(_) => ColumnType::Str,
            AttrValue::Int(_) => ColumnType::Int,
            AttrValue::Real(_) => ColumnType::Real,
            AttrValue::Bool(_) => ColumnType::Bool,
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, ColumnType::Int | ColumnType::Real)
    }

    fn is_stringy(&self) -> bool {
        matches!(self, ColumnType::Str | ColumnType::Enum(_))
    }

    fn name(&self) -> String {
        match self {
            ColumnType::Bool => "bool".into(),
            ColumnType::Int => "int".into(),
            ColumnType::Real => "real".into(),
            ColumnType::Str => "string".into(),
            ColumnType::Enum(l) => format!("enum({})", l.join(", ")),
        }
    }
}

type Scope = BTreeMap<String, ColumnType>;

fn type_err(e: &Expr, message: impl Into<String>) -> DslError {
    DslError::Type {
        token: print_expr(e),
        message: message.into(),
    }
}

fn expr_type(e: &Expr, scope: &Scope, prompts_allowed: bool) -> Result<ColumnType, DslError> {
    match e {
        Expr::Col(name) => scope.get(name).cloned().ok_or_else(|| DslError::UnknownAttribute {
            token: format!("col({name:?})"),
        }),
        Expr::Lit(v) => Ok(ColumnType::of_lit(v)),
        Expr::Prompt(p) => {
            if !prompts_allowed {
                return Err(type_err(e, "prompt expressions are only allowed in filter and map"));
            }
            for ph in placeholders(&p.template) {
                if !scope.contains_key(&ph) {
                    return Err(DslError::UnknownAttribute {
                        token: format!("{{{ph}}}"),
                    });
                }
            }
            if let ReturnType::Enum(labels) = &p.return_type {
                if labels.is_empty() {
                    return Err(type_err(e, "enum return type needs at least one label"));
                }
            }
            Ok(ColumnType::of_return(&p.return_type))
        }
        Expr::And(a, b) | Expr::Or(a, b) => {
            for side in [a, b] {
                let t = expr_type(side, scope, prompts_allowed)?;
                if t != ColumnType::Bool {
                    return Err(type_err(side, format!("expected bool, found {}", t.name())));
                }
            }
            Ok(ColumnType::Bool)
        }
        Expr::Not(a) => {
            let t = expr_type(a, scope, prompts_allowed)?;
            if t != ColumnType::Bool {
                return Err(type_err(a, format!("expected bool, found {}", t.name())));
            }
            Ok(ColumnType::Bool)
        }
        Expr::Cmp(a, op, b) => {
            let ta = expr_type(a, scope, prompts_allowed)?;
            let tb = expr_type(b, scope, prompts_allowed)?;
            let ordering = !matches!(op, CmpOp::Eq | CmpOp::Ne);
            let ok = if ta.is_numeric() && tb.is_numeric() {
                true
            } else if ta.is_stringy() && tb.is_stringy() {
                !ordering
            } else {
                ta == ColumnType::Bool && tb == ColumnType::Bool && !ordering
            };
            if !ok {
                return Err(type_err(
                    e,
                    format!("cannot compare {} {} {}", ta.name(), op.symbol(), tb.name()),
                ));
            }
            for (col, lit) in [(&ta, b), (&tb, a)] {
                if let (ColumnType::Enum(labels), Expr::Lit(v)) = (col, lit.as_ref()) {
                    let s = v.as_str().unwrap_or_default();
                    if !labels.iter().any(|l| l == s) {
                        return Err(type_err(lit, format!("{s:?} is not one of the enum labels")));
                    }
                }
            }
            Ok(ColumnType::Bool)
        }
    }
}

fn expect_bool(e: &Expr, scope: &Scope, prompts_allowed: bool) -> Result<(), DslError> {
    match expr_type(e, scope, prompts_allowed)? {
        ColumnType::Bool => Ok(()),
        t => Err(type_err(e, format!("expected bool, found {}", t.name()))),
    }
}

fn check_node(node: &PlanNode, schema: &Schema) -> Result<Scope, DslError> {
    match node {
        PlanNode::Scan { .. } => Ok(schema
            .attrs
            .iter()
            .map(|a| (a.name.clone(), ColumnType::of_attr(a.ty)))
            .collect()),
        PlanNode::Filter { input, predicate } => {
            let scope = check_node(input, schema)?;
            expect_bool(predicate, &scope, true)?;
            Ok(scope)
        }
        PlanNode::Map { input, expr, alias } => {
            let mut scope = check_node(input, schema)?;
            let t = expr_type(expr, &scope, true)?;
            scope.insert(alias.clone(), t);
            Ok(scope)
        }
        PlanNode::Aggregate { input, aggs, group_by } => {
            let scope = check_node(input, schema)?;
            if aggs.is_empty() {
                return Err(DslError::Type {
                    token: "aggregate([])".into(),
                    message: "at least one aggregation function is required".into(),
                });
            }
            let mut out = Scope::new();
            for key in group_by {
                if schema.get(key).is_none() {
                    return Err(DslError::UnknownAttribute {
                        token: format!("col({key:?})"),
                    });
                }
                out.insert(key.clone(), scope[key].clone());
            }
            for agg in aggs {
                expect_bool(&agg.arg, &scope, false)?;
                let t = match agg.func {
                    AggFn::BoolOr | AggFn::BoolAnd => ColumnType::Bool,
                    AggFn::CountIf => ColumnType::Int,
                    AggFn::Proportion => ColumnType::Real,
                };
                if out.insert(agg.alias.clone(), t).is_some() {
                    return Err(DslError::Type {
                        token: format!("alias({:?})", agg.alias),
                        message: "duplicate output column".into(),
                    });
                }
            }
            Ok(out)
        }
        PlanNode::WithRank { input, expr, .. } => {
            let mut scope = check_node(input, schema)?;
            let t = expr_type(expr, &scope, false)?;
            if !t.is_numeric() {
                return Err(type_err(expr, format!("rank needs a numeric expression, found {}", t.name())));
            }
            scope.insert(RANK_COLUMN.to_string(), ColumnType::Int);
            Ok(scope)
        }
        PlanNode::Check { input, predicate } => {
            let scope = check_node(input, schema)?;
            expect_bool(predicate, &scope, false)?;
            Ok(scope)
        }
    }
}

/// Checks structural invariants (one leaf scan, one root check) and
/// expression types. Group keys must be base attributes; prompts may
/// only appear in `filter` and `map`.
pub fn typecheck(plan: &PlanNode, schema: &Schema) -> Result<(), DslError> {
    let chain = plan.chain();
    if !matches!(chain[0], PlanNode::Scan { .. }) {
        return Err(DslError::MissingScan);
    }
    if !matches!(plan, PlanNode::Check { .. }) {
        return Err(DslError::Unsupported(format!(
            "root operator is {}, expected check",
            plan.op_name()
        )));
    }
    let checks = chain.iter().filter(|n| matches!(n, PlanNode::Check { .. })).count();
    if checks != 1 {
        return Err(DslError::Unsupported(format!("{checks} check operators, expected one")));
    }
    check_node(plan, schema).map(|_| ())
}
