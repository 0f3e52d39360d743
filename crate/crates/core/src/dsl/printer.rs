//! Canonical printer: `df` on the first line, then one operator per line.

use super::{AggExpr, Expr, PlanNode, PromptExpr};
use crate::claims::CmpOp;
use crate::oracle::ReturnType;
use crate::relation::AttrValue;

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn literal(v: &AttrValue) -> String {
    match v {
        AttrValue::Text(s) | AttrValue::Categorical(s) => quote(s),
        AttrValue::Int(i) => i.to_string(),
        AttrValue::Real(r) => format!("{r:?}"),
        AttrValue::Bool(b) => b.to_string(),
    }
}

fn return_type(rt: &ReturnType) -> String {
    match rt {
        ReturnType::Bool => "bool".into(),
        ReturnType::Int => "int".into(),
        ReturnType::Real => "real".into(),
        ReturnType::Enum(labels) => format!(
            "enum({})",
            labels.iter().map(|l| quote(l)).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn prompt(p: &PromptExpr) -> String {
    format!("prompt({}, {})", quote(&p.template), return_type(&p.return_type))
}

fn is_atom(e: &Expr) -> bool {
    match e {
        Expr::Col(_) | Expr::Lit(_) | Expr::Prompt(_) => true,
        Expr::Cmp(_, op, _) => matches!(op, CmpOp::Eq | CmpOp::Ne),
        Expr::And(..) | Expr::Or(..) => true,
        Expr::Not(_) => false,
    }
}

fn atom(e: &Expr) -> String {
    if is_atom(e) {
        print_expr(e)
    } else {
        format!("({})", print_expr(e))
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Col(c) => format!("col({})", quote(c)),
        Expr::Lit(v) => literal(v),
        Expr::Prompt(p) => prompt(p),
        Expr::Cmp(a, op, b) => match op {
            CmpOp::Eq => format!("{}.eq({})", atom(a), print_expr(b)),
            CmpOp::Ne => format!("{}.ne({})", atom(a), print_expr(b)),
            _ => format!("{} {} {}", atom(a), op.symbol(), atom(b)),
        },
        Expr::And(a, b) => format!("({} and {})", print_expr(a), print_expr(b)),
        Expr::Or(a, b) => format!("({} or {})", print_expr(a), print_expr(b)),
        Expr::Not(a) => format!("not {}", atom(a)),
    }
}

fn agg(a: &AggExpr) -> String {
    format!("{}({}).alias({})", a.func.name(), print_expr(&a.arg), quote(&a.alias))
}

fn operator(node: &PlanNode) -> Option<String> {
    Some(match node {
        PlanNode::Scan { .. } => return None,
        PlanNode::Filter { predicate, .. } => format!("filter({})", print_expr(predicate)),
        PlanNode::Map { expr, alias, .. } => format!("map({}.alias({}))", atom(expr), quote(alias)),
        PlanNode::Aggregate { aggs, group_by, .. } => {
            let aggs = aggs.iter().map(agg).collect::<Vec<_>>().join(", ");
            if group_by.is_empty() {
                format!("aggregate([{aggs}])")
            } else {
                let keys = group_by
                    .iter()
                    .map(|k| format!("col({})", quote(k)))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("aggregate([{aggs}], group_by=[{keys}])")
            }
        }
        PlanNode::WithRank { expr, descending, .. } => {
            if *descending {
                format!("with_rank({})", print_expr(expr))
            } else {
                format!("with_rank({}, descending=false)", print_expr(expr))
            }
        }
        PlanNode::Check { predicate, .. } => format!("check({})", print_expr(predicate)),
    })
}

pub fn print_plan(plan: &PlanNode) -> String {
    let mut out = String::from(super::SCAN_NAME);
    for node in plan.chain() {
        if let Some(op) = operator(node) {
            out.push_str("\n.");
            out.push_str(&op);
        }
    }
    out.push('\n');
    out
}
