#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use claimq::claims::CmpOp;
use claimq::dsl::{AggExpr, AggFn, Expr, PlanNode, PromptExpr, SCAN_NAME};
use claimq::oracle::{ReturnType, ScriptedBackend, ScriptedFixture, SemanticOracle};
use claimq::relation::{AttrValue, Schema};
use proptest::prelude::*;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn schema() -> Schema {
    Schema::from_json(&read_fixture("schema.json")).unwrap()
}

pub fn scripted_fixture() -> ScriptedFixture {
    ScriptedFixture::from_json(&read_fixture("oracle.json")).unwrap()
}

pub fn scripted_oracle() -> SemanticOracle {
    SemanticOracle::new(Arc::new(ScriptedBackend::new(scripted_fixture()).unwrap()), "scripted")
}

fn name() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("text".to_string()),
        Just("business_id".to_string()),
        Just("stars".to_string()),
        "[a-z_]{1,8}",
        "[ -~]{0,6}",
    ]
}

fn literal() -> impl Strategy<Value = AttrValue> {
    prop_oneof![
        any::<i64>().prop_map(AttrValue::Int),
        any::<f64>().prop_filter("finite", |r| r.is_finite()).prop_map(AttrValue::Real),
        (-1000i32..1000, 1u32..1000).prop_map(|(a, b)| AttrValue::Real(a as f64 / b as f64)),
        any::<bool>().prop_map(AttrValue::Bool),
        "[ -~\n\t]{0,12}".prop_map(AttrValue::Text),
    ]
}

fn return_type() -> impl Strategy<Value = ReturnType> {
    prop_oneof![
        Just(ReturnType::Bool),
        Just(ReturnType::Int),
        Just(ReturnType::Real),
        prop::collection::vec("[A-Z]{1,6}", 1..4).prop_map(ReturnType::Enum),
    ]
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(CmpOp::ALL.to_vec())
}

pub fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        name().prop_map(Expr::Col),
        literal().prop_map(Expr::Lit),
        ("[ -~]{0,20}", return_type()).prop_map(|(template, return_type)| Expr::Prompt(PromptExpr {
            template,
            return_type
        })),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), cmp_op(), inner.clone()).prop_map(|(a, op, b)| Expr::cmp(a, op, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|a| Expr::Not(Box::new(a))),
        ]
    })
}

#[derive(Debug, Clone)]
enum Op {
    Filter(Expr),
    Map(Expr, String),
    Aggregate(Vec<AggExpr>, Vec<String>),
    WithRank(Expr, bool),
}

fn agg() -> impl Strategy<Value = AggExpr> {
    (prop::sample::select(AggFn::ALL.to_vec()), expr(), name()).prop_map(|(func, arg, alias)| AggExpr {
        func,
        arg,
        alias,
    })
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        expr().prop_map(Op::Filter),
        (expr(), name()).prop_map(|(e, a)| Op::Map(e, a)),
        (prop::collection::vec(agg(), 1..3), prop::collection::vec(name(), 0..3))
            .prop_map(|(a, g)| Op::Aggregate(a, g)),
        (expr(), any::<bool>()).prop_map(|(e, d)| Op::WithRank(e, d)),
    ]
}

/// Grammar-directed generator of syntactically valid (not necessarily
/// well-typed) plans.
pub fn plan() -> impl Strategy<Value = PlanNode> {
    (prop::collection::vec(op(), 0..6), expr()).prop_map(|(ops, check)| {
        let mut node = PlanNode::Scan {
            relation: SCAN_NAME.to_string(),
        };
        for op in ops {
            let input = Box::new(node);
            node = match op {
                Op::Filter(predicate) => PlanNode::Filter { input, predicate },
                Op::Map(expr, alias) => PlanNode::Map { input, expr, alias },
                Op::Aggregate(aggs, group_by) => PlanNode::Aggregate { input, aggs, group_by },
                Op::WithRank(expr, descending) => PlanNode::WithRank {
                    input,
                    expr,
                    descending,
                },
            };
        }
        PlanNode::Check {
            input: Box::new(node),
            predicate: check,
        }
    })
}

pub fn relation_from(jsonl: &str) -> claimq::relation::Relation {
    claimq::relation::ingest("reviews", jsonl.as_bytes(), &schema(), &claimq::relation::FeatureHashEmbedder::default())
        .unwrap()
}

/// The frozen synthetic review corpus.
pub fn reviews() -> claimq::relation::Relation {
    relation_from(&read_fixture("reviews.jsonl"))
}

pub fn bench_claims() -> Vec<claimq::harness::BenchClaim> {
    claimq::harness::parse_claims_jsonl(&read_fixture("claims.jsonl")).unwrap()
}

pub fn cached_oracle() -> SemanticOracle {
    scripted_oracle().with_cache(Arc::new(claimq::oracle::PromptCache::in_memory()))
}
