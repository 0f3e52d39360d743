//! Verification-query DSL: a method-chained operator pipeline
//! (`df.filter(..).map(..).aggregate(..).with_rank(..).check(..)`).

mod analyze;
mod compile;
mod parser;
mod printer;
mod typecheck;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::CmpOp;
use crate::oracle::ReturnType;
use crate::relation::AttrValue;

pub use analyze::{analyze, claim_structure_of, Analysis, Stage};
pub use compile::{compile_claim, compile_claim_with, CompileAttempt, CompileError, DSL_DOCS, MAX_COMPILE_ATTEMPTS};
pub use parser::{parse, parse_untyped};
pub use printer::{print_expr, print_plan};
pub use typecheck::{typecheck, ColumnType};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptExpr {
    pub template: String,
    pub return_type: ReturnType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Col(String),
    Lit(AttrValue),
    Cmp(Box<Expr>, CmpOp, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Prompt(PromptExpr),
}

impl Expr {
    pub fn col(name: &str) -> Self {
        Expr::Col(name.to_string())
    }

    pub fn cmp(lhs: Expr, op: CmpOp, rhs: Expr) -> Self {
        Expr::Cmp(Box::new(lhs), op, Box::new(rhs))
    }

    pub fn prompt(template: &str, return_type: ReturnType) -> Self {
        Expr::Prompt(PromptExpr {
            template: template.to_string(),
            return_type,
        })
    }

    /// Prompt expressions in the tree, in left-to-right order, deduplicated.
    pub fn prompts(&self) -> Vec<&PromptExpr> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Prompt(p) = e {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        });
        out
    }

    /// Column names referenced by `col(..)` (prompt placeholders excluded).
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Col(c) = e {
                if !out.contains(&c.as_str()) {
                    out.push(c.as_str());
                }
            }
        });
        out
    }

    pub fn is_semantic(&self) -> bool {
        !self.prompts().is_empty()
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Cmp(a, _, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Not(a) => a.visit(f),
            Expr::Col(_) | Expr::Lit(_) | Expr::Prompt(_) => {}
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    BoolOr,
    BoolAnd,
    CountIf,
    Proportion,
}

impl AggFn {
    pub const ALL: [AggFn; 4] = [AggFn::BoolOr, AggFn::BoolAnd, AggFn::CountIf, AggFn::Proportion];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::BoolOr => "bool_or",
            AggFn::BoolAnd => "bool_and",
            AggFn::CountIf => "count_if",
            AggFn::Proportion => "proportion",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggExpr {
    pub func: AggFn,
    pub arg: Expr,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanNode {
    Scan {
        relation: String,
    },
    Filter {
        input: Box<PlanNode>,
        predicate: Expr,
    },
    Map {
        input: Box<PlanNode>,
        expr: Expr,
        alias: String,
    },
    Aggregate {
        input: Box<PlanNode>,
        aggs: Vec<AggExpr>,
        group_by: Vec<String>,
    },
    WithRank {
        input: Box<PlanNode>,
        expr: Expr,
        descending: bool,
    },
    Check {
        input: Box<PlanNode>,
        predicate: Expr,
    },
}

/// Output column produced by `with_rank`.
pub const RANK_COLUMN: &str = "rank";
/// Name of the implicit relation in programs.
pub const SCAN_NAME: &str = "df";

impl PlanNode {
    pub fn input(&self) -> Option<&PlanNode> {
        match self {
            PlanNode::Scan { .. } => None,
            PlanNode::Filter { input, .. }
            | PlanNode::Map { input, .. }
            | PlanNode::Aggregate { input, .. }
            | PlanNode::WithRank { input, .. }
            | PlanNode::Check { input, .. } => Some(input),
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            PlanNode::Scan { .. } => "scan",
            PlanNode::Filter { .. } => "filter",
            PlanNode::Map { .. } => "map",
            PlanNode::Aggregate { .. } => "aggregate",
            PlanNode::WithRank { .. } => "with_rank",
            PlanNode::Check { .. } => "check",
        }
    }

    /// Operators from leaf (scan) to root.
    pub fn chain(&self) -> Vec<&PlanNode> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some(next) = cur.input() {
            out.push(next);
            cur = next;
        }
        out.reverse();
        out
    }

    pub fn depth(&self) -> usize {
        self.chain().len()
    }
}

impl fmt::Display for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_plan(self))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("missing scan: the program must start from `df` or an operator that reads it")]
    MissingScan,
    #[error("unknown attribute {token}")]
    UnknownAttribute { token: String },
    #[error("type error at {token}: {message}")]
    Type { token: String, message: String },
    #[error("unsupported plan shape: {0}")]
    Unsupported(String),
}
