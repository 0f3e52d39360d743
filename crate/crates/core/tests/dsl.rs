mod common;

use claimq::claims::{Claim, ClaimStructure, CmpOp, Comparison, GroupAggregate, Quantifier};
use claimq::dsl::{
    analyze, claim_structure_of, compile_claim, parse, parse_untyped, print_plan, CompileError, DslError, PlanNode,
    MAX_COMPILE_ATTEMPTS,
};
use claimq::oracle::ReturnType;
use claimq::relation::AttrValue;
use proptest::prelude::*;

fn ops(plan: &PlanNode) -> Vec<&'static str> {
    plan.chain().iter().map(|n| n.op_name()).collect()
}

#[test]
fn nested_program_shape() {
    let plan = parse(&common::read_fixture("nested.vq"), &common::schema()).unwrap();
    assert_eq!(plan.depth(), 5);
    assert_eq!(ops(&plan), ["scan", "map", "aggregate", "aggregate", "check"]);
    let PlanNode::Check { input, .. } = &plan else { panic!() };
    let PlanNode::Aggregate { input, group_by, .. } = input.as_ref() else { panic!() };
    assert!(group_by.is_empty());
    let PlanNode::Aggregate { input, group_by, .. } = input.as_ref() else { panic!() };
    assert_eq!(group_by, &["business_id"]);
    let PlanNode::Map { expr, alias, .. } = input.as_ref() else { panic!() };
    assert_eq!(alias, "complains_about_service");
    let prompts = expr.prompts();
    assert_eq!(
        prompts[0].template,
        "Identify whether the {text} is a complaint about poor service quality"
    );
    assert_eq!(prompts[0].return_type, ReturnType::Bool);

    assert_eq!(
        claim_structure_of(&plan).unwrap(),
        ClaimStructure::Nested {
            outer: Quantifier::Forall,
            group_keys: vec!["business_id".into()],
            inner: Quantifier::Cardinal(Comparison::new(CmpOp::Ge, 2.0)),
        }
    );
}

#[test]
fn ordinal_program_shape() {
    let plan = parse(&common::read_fixture("ordinal.vq"), &common::schema()).unwrap();
    assert_eq!(
        ops(&plan),
        ["scan", "filter", "map", "aggregate", "with_rank", "filter", "check"]
    );
    let a = analyze(&plan).unwrap();
    assert_eq!(
        a.structure,
        ClaimStructure::Ordinal {
            group_keys: vec!["business_id".into()],
            aggregate: GroupAggregate::Proportion,
            target: vec![AttrValue::Text("[A]".into())],
            rank: 1,
            descending: true,
        }
    );
    assert_eq!(a.stages.len(), 2);
    assert!(a.formula_id.starts_with("Identify whether the {text} praises"));
}

#[test]
fn check_without_scan_is_rejected() {
    assert_eq!(parse_untyped(r#"check(col("x"))"#), Err(DslError::MissingScan));
    assert!(parse_untyped(r#"df.check(col("x"))"#).is_ok());
}

#[test]
fn syntax_errors_carry_position() {
    match parse_untyped("df.filter(col(\"n\") >= )\n.check(true)") {
        Err(DslError::Syntax { line, col, message }) => {
            assert_eq!((line, col), (1, 23));
            assert!(message.contains("`)`"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match parse_untyped("df.filter(true)\n  .frobnicate(1)\n.check(true)") {
        Err(DslError::Syntax { line, message, .. }) => {
            assert_eq!(line, 2);
            assert!(message.contains("frobnicate"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn simple_shapes() {
    let s = common::schema();
    let cases = [
        (r#"df.aggregate([bool_or(col("stars") >= 5).alias("a")]).check(col("a"))"#, Quantifier::Exists),
        (r#"df.aggregate([bool_and(col("stars") >= 2).alias("a")]).check(col("a").eq(true))"#, Quantifier::Forall),
        (
            r#"df.aggregate([count_if(col("stars") >= 5).alias("c")]).check(3 < col("c"))"#,
            Quantifier::Cardinal(Comparison::new(CmpOp::Gt, 3.0)),
        ),
        (
            r#"df.aggregate([proportion(col("stars") >= 4).alias("p")]).check(col("p") > 0.5)"#,
            Quantifier::Proportional(Comparison::new(CmpOp::Gt, 0.5)),
        ),
        (
            r#"df.aggregate([bool_or(col("stars") >= 5).alias("a")]).check(not col("a"))"#,
            Quantifier::Cardinal(Comparison::new(CmpOp::Eq, 0.0)),
        ),
    ];
    for (src, q) in cases {
        let plan = parse(src, &s).unwrap();
        assert_eq!(claim_structure_of(&plan).unwrap(), ClaimStructure::Simple(q), "{src}");
    }
}

#[test]
fn unmatched_shapes_are_reported() {
    let s = common::schema();
    let two_checks = PlanNode::Check {
        input: Box::new(parse(r#"df.aggregate([bool_or(true).alias("a")]).check(col("a"))"#, &s).unwrap()),
        predicate: claimq::dsl::Expr::col("a"),
    };
    match claim_structure_of(&two_checks) {
        Err(DslError::Unsupported(msg)) => assert!(msg.contains("check"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let no_agg = parse(r#"df.filter(col("stars") > 1).check(true)"#, &s).unwrap();
    assert!(matches!(claim_structure_of(&no_agg), Err(DslError::Unsupported(_))));
}

#[test]
fn compile_with_scripted_oracle() {
    let s = common::schema();
    let oracle = common::scripted_oracle();
    let nested = Claim::new("All McDonald's locations have multiple complaints about poor service quality");
    let plan = compile_claim(&nested, &s, &oracle).unwrap();
    assert_eq!(plan, parse(&common::read_fixture("nested.vq"), &s).unwrap());

    let ordinal = Claim::new("The top-ranked McDonald's location in terms of service has the Business ID [A]");
    let plan = compile_claim(&ordinal, &s, &oracle).unwrap();
    assert!(matches!(claim_structure_of(&plan).unwrap(), ClaimStructure::Ordinal { rank: 1, .. }));

    let calls = oracle.stats().backend_calls;
    match compile_claim(&Claim::new("Some review is about cats"), &s, &oracle) {
        Err(CompileError::Exhausted { attempts }) => {
            assert_eq!(attempts.len(), MAX_COMPILE_ATTEMPTS);
            assert!(attempts.iter().all(|a| a.program == "SELECT * FROM reviews"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(oracle.stats().backend_calls - calls, 3);
}

#[test]
fn canonical_print_is_stable() {
    let s = common::schema();
    let plan = parse(&common::read_fixture("nested.vq"), &s).unwrap();
    let printed = print_plan(&plan);
    assert!(printed.starts_with("df\n.map("));
    assert_eq!(printed.lines().count(), 5);
    assert_eq!(print_plan(&parse(&printed, &s).unwrap()), printed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn parse_inverts_print(plan in common::plan()) {
        let printed = print_plan(&plan);
        let reparsed = parse_untyped(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(reparsed, plan);
    }
}
