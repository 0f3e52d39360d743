//! Exit-gate suite: one pass/fail line per acceptance criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use claimq::claims::{ClaimStructure, CmpOp, Comparison, GroupAggregate, Quantifier};
use claimq::dsl::{analyze, claim_structure_of, parse, parse_untyped, print_plan};
use claimq::engine::{dense_rank, execute, full_scan, AccState, Accumulator, EngineConfig, Verdict};
use claimq::harness::{default_ablations, run_ablation, scripted_factory, synth, BenchConfig, BenchDataset};
use claimq::optimizer::{Flags, Optimizer, OptimizerConfig};
use claimq::oracle::{PromptCache, Question, ReturnType, ScriptedBackend, ScriptedFixture, SemanticOracle};
use claimq::par::map_range_auto;
use claimq::provenance::{
    assemble, brute_truth, check_minimal, explanation_polynomial, token_pairs, BruteRow, GroupTrace, SamplingContext, Trace,
};
use claimq::relation::{AttrDecl, AttrType, AttrValue, FeatureHashEmbedder, Relation, Schema, TupleRow};
use claimq::relevance::{rrf_score, similarity_prefilter};
use claimq::stats::{
    allocate_budget, cs_resolve_interval, Allocation, ConfidenceState, CsDecision, CsKind, CsMode, CsTarget,
    OperatorBudget,
};
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. verdict equivalence

const TEMPLATES: [&str; 3] = [synth::COMPLAINT, synth::PRAISE, synth::MENTIONS_SERVICE];
const OPS: [&str; 6] = [">=", ">", "<=", "<", "eq", "ne"];

fn cmp_src(lhs: &str, op: &str, rhs: &str) -> String {
    match op {
        "eq" | "ne" => format!("{lhs}.{op}({rhs})"),
        _ => format!("{lhs} {op} {rhs}"),
    }
}

fn random_profile(rng: &mut ChaCha8Rng, seed: u64) -> synth::SynthConfig {
    let groups = rng.random_range(1..=8usize);
    let per = 200 / groups;
    let rate = |rng: &mut ChaCha8Rng| *[0.0, 0.05, 0.2, 0.5, 0.8, 1.0].choose(rng).unwrap();
    synth::SynthConfig {
        seed,
        groups: (0..groups)
            .map(|g| synth::GroupProfile {
                business_id: format!("[{}]", (b'A' + g as u8) as char),
                reviews: rng.random_range(1..=per.min(40)),
                complaint: rate(rng),
                praise: rate(rng),
                mention: rate(rng),
            })
            .collect(),
    }
}

fn random_claim(rng: &mut ChaCha8Rng, ids: &[String]) -> String {
    let t = rng.random_range(0..3);
    let mut src = String::from("df");
    if t != 2 && rng.random_bool(0.3) {
        src.push_str(&format!(".filter(prompt({:?}))", synth::MENTIONS_SERVICE));
    }
    match rng.random_range(0..3) {
        0 => src.push_str(&format!(".filter(col(\"stars\") >= {})", rng.random_range(1..=5))),
        1 if rng.random_bool(0.5) => {
            let id = ids.choose(rng).unwrap();
            src.push_str(&format!(".filter(col(\"business_id\").eq({id:?}))"))
        }
        _ => {}
    }
    src.push_str(&format!(".map(prompt({:?}, bool).alias(\"x\"))", TEMPLATES[t]));
    let op = *OPS.choose(rng).unwrap();
    let k = rng.random_range(0..=12).to_string();
    let rho = ["0", "0.1", "0.25", "0.5", "0.75", "1"].choose(rng).unwrap().to_string();
    match rng.random_range(0..6) {
        0 => src.push_str(".aggregate([bool_or(col(\"x\")).alias(\"a\")]).check(col(\"a\"))"),
        1 => src.push_str(".aggregate([bool_and(col(\"x\")).alias(\"a\")]).check(col(\"a\"))"),
        2 => src.push_str(&format!(
            ".aggregate([count_if(col(\"x\")).alias(\"n\")]).check({})",
            cmp_src("col(\"n\")", op, &k)
        )),
        3 => src.push_str(&format!(
            ".aggregate([proportion(col(\"x\")).alias(\"p\")]).check({})",
            cmp_src("col(\"p\")", op, &rho)
        )),
        4 => {
            let agg = ["count_if", "proportion"].choose(rng).unwrap();
            let desc = if rng.random_bool(0.7) { "" } else { ", descending=false" };
            let target = if rng.random_bool(0.9) {
                ids.choose(rng).unwrap().clone()
            } else {
                "[Z]".to_string()
            };
            src.push_str(&format!(
                ".aggregate([{agg}(col(\"x\")).alias(\"v\")], group_by=[col(\"business_id\")])\
                 .with_rank(col(\"v\"){desc}).filter(col(\"business_id\").eq({target:?}))\
                 .check(col(\"rank\").eq({}))",
                rng.random_range(1..=3)
            ));
        }
        _ => {
            let (inner, pred) = match rng.random_range(0..4) {
                0 => ("count_if", cmp_src("col(\"i\")", op, &rng.random_range(0..=4).to_string())),
                1 => ("proportion", cmp_src("col(\"i\")", op, &rho)),
                2 => ("bool_or", "col(\"i\")".to_string()),
                _ => ("bool_and", "col(\"i\")".to_string()),
            };
            let op2 = *OPS.choose(rng).unwrap();
            let outer = match rng.random_range(0..4) {
                0 => format!(".aggregate([bool_or({pred}).alias(\"o\")]).check(col(\"o\"))"),
                1 => format!(".aggregate([bool_and({pred}).alias(\"o\")]).check(col(\"o\"))"),
                2 => format!(
                    ".aggregate([count_if({pred}).alias(\"o\")]).check({})",
                    cmp_src("col(\"o\")", op2, &rng.random_range(0..=4).to_string())
                ),
                _ => format!(
                    ".aggregate([proportion({pred}).alias(\"o\")]).check({})",
                    cmp_src("col(\"o\")", op2, &rho)
                ),
            };
            src.push_str(&format!(
                ".aggregate([{inner}(col(\"x\")).alias(\"i\")], group_by=[col(\"business_id\")]){outer}"
            ));
        }
    }
    src
}

fn verdict_equivalence() -> Outcome {
    let schema = common::schema();
    let emb = FeatureHashEmbedder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut cases, mut recognized, mut failures) = (0usize, 0usize, Vec::new());
    for rel_i in 0..60u64 {
        let profile = random_profile(&mut rng, 100 + rel_i);
        let rel = common::relation_from(&synth::to_jsonl(&synth::generate(&profile)));
        assert!(rel.row_count() <= 200);
        let ids: Vec<String> = profile.groups.iter().map(|g| g.business_id.clone()).collect();
        let reference_oracle = common::scripted_oracle();
        for _ in 0..6 {
            let src = random_claim(&mut rng, &ids);
            let plan = parse(&src, &schema).unwrap_or_else(|e| panic!("{e}\n{src}"));
            let mut flags = Flags::deterministic();
            for f in ["early_stopping", "relevance", "fusion", "caching"] {
                flags.set(f, rng.random_bool(0.75)).unwrap();
            }
            let engine = EngineConfig {
                batch_size: *[1, 5, 32].choose(&mut rng).unwrap(),
                ..Default::default()
            };
            let oracle = if flags.caching {
                common::cached_oracle()
            } else {
                common::scripted_oracle()
            };
            let opt = Optimizer::new(OptimizerConfig {
                flags,
                seed: rng.random(),
                ..Default::default()
            });
            let phys = opt.optimize(&plan, &schema, &oracle, &emb);
            recognized += phys.analysis.is_some() as usize;
            let got = execute(&phys, &rel, &oracle, &engine).map(|v| v.value);
            let want = full_scan(&plan, &rel, &reference_oracle, &engine).map(|v| v.value);
            cases += 1;
            match (got, want) {
                (Ok(a), Ok(b)) if a == b => {}
                (g, w) => failures.push(format!("{src} flags={:?} got={g:?} want={w:?}", flags.enabled())),
            }
        }
    }
    for f in failures.iter().take(3) {
        eprintln!("  mismatch: {f}");
    }
    check(
        cases >= 200 && failures.is_empty(),
        format!("{} of {cases} verdicts equal ({recognized} optimized plans)", cases - failures.len()),
    )
}

// ---------------------------------------------------------------------------
// 2. estimation soundness

const MC_RUNS: usize = 2000;
const MC_LEN: usize = 2000;

fn estimation_soundness() -> Outcome {
    let mus = [0.05, 0.3, 0.5, 0.7, 0.95];
    let alphas = [0.05, 0.0125];
    let eps = 0.05;
    let mut worst = Vec::new();
    let mut ok = true;
    for kind in [CsKind::Betting, CsKind::Hoeffding] {
        for &alpha in &alphas {
            let margin = alpha + 3.0 * (alpha / MC_RUNS as f64).sqrt();
            for &mu in &mus {
                let comps: Vec<Comparison> = CmpOp::ALL
                    .iter()
                    .flat_map(|&op| [mu - 0.1, mu, mu + 0.1].map(|r| Comparison::new(op, r)))
                    .filter(|c| c.threshold > 0.0 && c.threshold < 1.0)
                    .collect();
                let runs: Vec<(bool, Vec<bool>)> = map_range_auto(MC_RUNS, |run| {
                    let mut rng = ChaCha8Rng::seed_from_u64((run as u64) << 16 ^ (mu * 1000.0) as u64 ^ (alpha * 1e5) as u64);
                    let mut st = ConfidenceState::new(alpha, CsMode::WithReplacement, kind);
                    let mut decided: Vec<Option<bool>> = vec![None; comps.len()];
                    let mut miss = false;
                    for _ in 0..MC_LEN {
                        st.update(rng.random_bool(mu)).unwrap();
                        let (lo, hi) = st.interval();
                        miss |= mu < lo || mu > hi;
                        for (c, d) in comps.iter().zip(decided.iter_mut()) {
                            if d.is_none() {
                                if let CsDecision::Resolved(v) =
                                    cs_resolve_interval(lo, hi, CsTarget::Proportion(*c), eps, None)
                                {
                                    *d = Some(v);
                                }
                            }
                        }
                    }
                    let wrong = comps
                        .iter()
                        .zip(&decided)
                        .map(|(c, d)| d.is_some_and(|v| v != c.holds(mu)))
                        .collect();
                    (miss, wrong)
                });
                let miss = runs.iter().filter(|r| r.0).count() as f64 / MC_RUNS as f64;
                let wrong = (0..comps.len())
                    .map(|i| runs.iter().filter(|r| r.1[i]).count() as f64 / MC_RUNS as f64)
                    .fold(0.0, f64::max);
                ok &= miss <= margin && wrong <= margin;
                worst.push((miss.max(wrong) / margin, format!("{kind:?} a={alpha} mu={mu}: miss {miss:.4} wrong {wrong:.4} bound {margin:.4}")));
            }
        }
    }
    worst.sort_by(|a, b| b.0.total_cmp(&a.0));
    check(ok, format!("{} cells, tightest {}", worst.len(), worst[0].1))
}

// ---------------------------------------------------------------------------
// 3. provenance correctness

fn simple_claims(n: usize) -> Vec<Quantifier> {
    let mut v = vec![Quantifier::Exists, Quantifier::Forall];
    for op in CmpOp::ALL {
        for k in 0..=n {
            v.push(Quantifier::Cardinal(Comparison::new(op, k as f64)));
        }
        for rho in [0.25, 0.5, 0.75] {
            v.push(Quantifier::Proportional(Comparison::new(op, rho)));
        }
    }
    v
}

fn simple_case(q: Quantifier, rows: &[BruteRow], n_total: Option<usize>) -> Result<(), String> {
    let mut acc = Accumulator::new(q, n_total).with_hints(true);
    for r in rows {
        if !acc.is_running() {
            break;
        }
        acc.accumulate(r.row_id, r.value);
    }
    if acc.is_running() {
        acc.exhaust();
    }
    let value = acc.value().unwrap();
    let trace = Trace::Simple {
        quantifier: q,
        value,
        stream: GroupTrace {
            observed: acc.tokens().to_vec(),
            n_total,
            exhausted: matches!(acc.state(), AccState::Exhausted(_)),
            ..Default::default()
        },
    };
    let structure = ClaimStructure::Simple(q);
    let (truth, poly) = explanation_polynomial(&structure, rows, None).map_err(|e| e.to_string())?;
    let toks = token_pairs(&assemble(&trace, "phi"));
    let ctx = SamplingContext::Processed(acc.tokens().iter().map(|o| o.0).collect());
    if value != truth || !check_minimal(&toks, &poly, &ctx) {
        return Err(format!("{q} n_total={n_total:?} rows={rows:?} value={value} tokens={toks:?}"));
    }
    Ok(())
}

fn grouped_relation(rows: &[BruteRow]) -> Relation {
    let schema = Schema::new(vec![
        AttrDecl {
            name: "g".into(),
            ty: AttrType::Categorical,
            description: String::new(),
        },
        AttrDecl {
            name: "v".into(),
            ty: AttrType::Bool,
            description: String::new(),
        },
    ]);
    Relation {
        name: "grid".into(),
        schema,
        rows: rows
            .iter()
            .map(|r| TupleRow {
                row_id: r.row_id,
                attrs: [
                    ("g".to_string(), AttrValue::Categorical(format!("g{}", r.group))),
                    ("v".to_string(), AttrValue::Bool(r.value)),
                ]
                .into_iter()
                .collect(),
                sentences: Vec::new(),
                doc_embeddings: BTreeMap::new(),
            })
            .collect(),
    }
}

fn processed(v: &Verdict) -> BTreeSet<usize> {
    let groups: Vec<&GroupTrace> = match v.trace.as_ref().expect("optimized verdicts carry a trace") {
        Trace::Simple { stream, .. } => vec![stream],
        Trace::Nested { groups, .. } | Trace::Ordinal { groups, .. } => groups.iter().collect(),
    };
    groups.iter().flat_map(|g| g.observed.iter().map(|o| o.0)).collect()
}

fn grouped_case(
    src: &str,
    rows: &[BruteRow],
    target: Option<usize>,
    oracle: &SemanticOracle,
    opt: &Optimizer,
) -> Result<(), String> {
    let rel = grouped_relation(rows);
    let plan = parse(src, &rel.schema).map_err(|e| e.to_string())?;
    let structure = claim_structure_of(&plan).map_err(|e| e.to_string())?;
    let phys = opt.optimize(&plan, &rel.schema, oracle, &FeatureHashEmbedder::default());
    let cfg = EngineConfig {
        batch_size: 1,
        ..Default::default()
    };
    let v = execute(&phys, &rel, oracle, &cfg).map_err(|e| e.to_string())?;
    let truth = brute_truth(&structure, rows, target);
    let seen = processed(&v);
    // groups the ranking never touched are outside the sample, like unread rows
    let sub: Vec<BruteRow> = match target {
        Some(t) => {
            let touched: BTreeSet<usize> =
                rows.iter().filter(|r| seen.contains(&r.row_id)).map(|r| r.group).chain([t]).collect();
            rows.iter().filter(|r| touched.contains(&r.group)).copied().collect()
        }
        None => rows.to_vec(),
    };
    let (sub_truth, poly) = explanation_polynomial(&structure, &sub, target).map_err(|e| e.to_string())?;
    let toks = token_pairs(&v.tokens);
    if v.value != truth || sub_truth != truth || !check_minimal(&toks, &poly, &SamplingContext::Processed(seen)) {
        return Err(format!("{src}\nrows={rows:?} value={} truth={truth} tokens={toks:?}", v.value));
    }
    Ok(())
}

fn provenance_correctness() -> Outcome {
    let mut cases = 0usize;
    let mut failures: Vec<String> = Vec::new();
    // simple claims, every column up to 10 rows, totals known and unknown
    for n in 1..=10usize {
        let claims = simple_claims(n);
        let per_n: Vec<Vec<String>> = map_range_auto(1 << n, |mask| {
            let rows: Vec<BruteRow> = (0..n)
                .map(|i| BruteRow {
                    row_id: i,
                    group: 0,
                    value: mask >> i & 1 == 1,
                })
                .collect();
            let mut errs = Vec::new();
            for &q in &claims {
                for total in [Some(n), None] {
                    if let Err(e) = simple_case(q, &rows, total) {
                        errs.push(e);
                    }
                }
            }
            errs
        });
        cases += (1 << n) * claims.len() * 2;
        failures.extend(per_n.into_iter().flatten());
    }
    // grouped claims through the engine, batch size 1
    let oracle = SemanticOracle::new(Arc::new(ScriptedBackend::new(ScriptedFixture::default()).unwrap()), "none");
    let opt = Optimizer::new(OptimizerConfig {
        flags: Flags::deterministic(),
        ..Default::default()
    });
    let nested = r#"df.aggregate([count_if(col("v")).alias("n")], group_by=[col("g")])
.aggregate([bool_and(col("n") >= 2).alias("o")]).check(col("o"))"#;
    for n in 2..=8usize {
        for mask in 0..1u32 << n {
            for g in [2usize, 3] {
                for contiguous in [true, false] {
                    let rows: Vec<BruteRow> = (0..n)
                        .map(|i| BruteRow {
                            row_id: i,
                            group: if contiguous { i * g / n } else { i % g },
                            value: mask >> i & 1 == 1,
                        })
                        .collect();
                    if rows.iter().map(|r| r.group).collect::<BTreeSet<_>>().len() < g {
                        continue;
                    }
                    cases += 1;
                    if let Err(e) = grouped_case(nested, &rows, None, &oracle, &opt) {
                        failures.push(e);
                    }
                    if n > 7 {
                        continue;
                    }
                    for agg in ["count_if", "proportion"] {
                        for desc in ["", ", descending=false"] {
                            for t in 0..g {
                                for rank in 1..=g {
                                    let src = format!(
                                        "df.aggregate([{agg}(col(\"v\")).alias(\"x\")], group_by=[col(\"g\")])\
                                         .with_rank(col(\"x\"){desc}).filter(col(\"g\").eq(\"g{t}\"))\
                                         .check(col(\"rank\").eq({rank}))"
                                    );
                                    cases += 1;
                                    if let Err(e) = grouped_case(&src, &rows, Some(t), &oracle, &opt) {
                                        failures.push(e);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for f in failures.iter().take(3) {
        eprintln!("  provenance: {f}");
    }
    check(
        cases >= 50_000 && failures.is_empty(),
        format!("{} of {cases} cases minimal", cases - failures.len()),
    )
}

// ---------------------------------------------------------------------------
// 4. early-stopping economics

fn economics() -> Outcome {
    let ds = vec![BenchDataset {
        relation: common::reviews(),
        claims: common::bench_claims(),
    }];
    let fac = scripted_factory(common::scripted_fixture(), &ds, "scripted");
    let cfg = BenchConfig {
        trials: 1,
        ..Default::default()
    };
    let r = run_ablation(&ds, &cfg, &default_ablations(), &fac).map_err(|e| e.to_string())?;
    let all = r.rows.iter().find(|r| r.disabled == "all").unwrap();
    let optimized = r.baseline.total_oracle_calls.mean;

    // replay: the same suite against a persisted cache
    let dir = tempfile::tempdir().unwrap();
    let mut fixture = common::scripted_fixture();
    for c in &ds[0].claims {
        fixture.compile.insert(c.text.clone(), c.program.clone().unwrap());
    }
    let backend = Arc::new(ScriptedBackend::new(fixture).unwrap());
    let run_suite = || {
        let cache = Arc::new(PromptCache::open(dir.path()).unwrap());
        let oracle = SemanticOracle::new(backend.clone(), "scripted").with_cache(cache);
        let opt = Optimizer::new(OptimizerConfig::default());
        for c in &ds[0].claims {
            let plan = claimq::dsl::compile_claim(&claimq::claims::Claim::new(c.text.clone()), &ds[0].relation.schema, &oracle)
                .unwrap();
            claimq::harness::verify_plan(
                &plan,
                &ds[0].relation,
                &oracle,
                &opt,
                &EngineConfig::default(),
                &FeatureHashEmbedder::default(),
            )
            .unwrap();
        }
        oracle.stats().backend_calls
    };
    let first = run_suite();
    let replay = run_suite();
    check(
        all.calls.mean >= 2.0 && first > 0 && replay == 0,
        format!(
            "optimized {optimized:.0} calls = {:.3}x unoptimized; replay {replay} backend calls (first run {first})",
            1.0 / all.calls.mean
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. budget arithmetic

/// Exact `sum_i k_i * x_i <= alpha` over f64 values, in integer arithmetic.
fn exact_le(terms: &[(u64, f64)], alpha: f64) -> bool {
    fn parts(x: f64) -> (u128, i32) {
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1 << 52) - 1)) as u128;
        if exp == 0 {
            (frac, -1074)
        } else {
            (frac | 1 << 52, exp - 1075)
        }
    }
    let all: Vec<(u128, i32)> = terms.iter().map(|&(k, x)| {
        let (m, e) = parts(x);
        (m * k as u128, e)
    })
    .chain([parts(alpha)])
    .collect();
    let base = all.iter().map(|p| p.1).min().unwrap();
    let scale = |(m, e): (u128, i32)| m << (e - base) as u32;
    let lhs: u128 = all[..all.len() - 1].iter().map(|&p| scale(p)).sum();
    lhs <= scale(all[all.len() - 1])
}

fn budget_arithmetic() -> Outcome {
    let mut checked = 0usize;
    for alpha in [0.05, 0.1, 0.01, 0.0125, 1.0 / 3.0] {
        for o in 1..=4usize {
            for a in 1..=4usize {
                for g in 1..=64usize {
                    let known = allocate_budget(alpha, &vec![OperatorBudget { accumulators: a, groups: Some(g) }; o]);
                    assert_eq!(known.rule(0), Allocation::Bonferroni);
                    let terms: Vec<(u64, f64)> = (0..o)
                        .flat_map(|op| (1..=g).map(move |j| (op, j)))
                        .map(|(op, j)| (a as u64, known.alpha_for(op, j)))
                        .collect();
                    if !exact_le(&terms, alpha) {
                        return Err(format!("bonferroni alpha={alpha} o={o} a={a} g={g}"));
                    }
                    let unknown = allocate_budget(alpha, &vec![OperatorBudget { accumulators: a, groups: None }; o]);
                    assert_eq!(unknown.rule(0), Allocation::Geometric);
                    // the geometric tail is bounded by twice the first-group share
                    let head = unknown.alpha_for(0, 1);
                    for j in 1..=g {
                        if unknown.alpha_for(0, j) != head / 2f64.powi(j as i32 - 1) {
                            return Err(format!("geometric term alpha={alpha} o={o} a={a} j={j}"));
                        }
                    }
                    if !exact_le(&[((2 * o * a) as u64, head)], alpha) {
                        return Err(format!("geometric alpha={alpha} o={o} a={a}"));
                    }
                    checked += 2;
                }
            }
        }
    }
    Ok(format!("{checked} allocations sum to at most alpha"))
}

// ---------------------------------------------------------------------------
// 6. rank and RRF oracles

fn sort_rank(values: &[f64], descending: bool) -> Vec<u32> {
    let mut distinct: Vec<f64> = Vec::new();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| if descending { b.total_cmp(a) } else { a.total_cmp(b) });
    for v in sorted {
        if distinct.last().is_none_or(|&d| (d - v).abs() > 1e-9) {
            distinct.push(v);
        }
    }
    values
        .iter()
        .map(|v| distinct.iter().position(|d| (d - v).abs() <= 1e-9).unwrap() as u32 + 1)
        .collect()
}

fn rank_and_rrf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..10_000 {
        let len = rng.random_range(0..20);
        let values: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.5) {
                    rng.random_range(0..6) as f64
                } else {
                    rng.random_range(0..4) as f64 / rng.random_range(1..5) as f64
                }
            })
            .collect();
        let desc = rng.random_bool(0.5);
        if dense_rank(&values, desc) != sort_rank(&values, desc) {
            return Err(format!("list {i}: {values:?}"));
        }
    }
    let rrf = rrf_score(&[1, 2, 3]);
    let want = 1.0 / 61.0 + 1.0 / 62.0 + 1.0 / 63.0;
    check((rrf - want).abs() <= 1e-12, format!("10000 lists match; rrf(1,2,3) = {rrf:.15}"))
}

// ---------------------------------------------------------------------------
// 7. similarity prefilter recall

fn prefilter_recall() -> Outcome {
    let rel = common::reviews();
    let oracle = common::scripted_oracle();
    let emb = FeatureHashEmbedder::default();
    let opt = Optimizer::new(OptimizerConfig::default());
    let mut parts = Vec::new();
    let (mut kept_all, mut pos_all) = (0usize, 0usize);
    let mut ok = true;
    for template in [synth::MENTIONS_SERVICE, synth::COMPLAINT] {
        let spec = opt.build_search_spec(template, &oracle, &emb);
        let (mut kept, mut pos) = (0usize, 0usize);
        for row in &rel.rows {
            let mut attrs = BTreeMap::new();
            attrs.insert("text".to_string(), row.text_of("text").to_string());
            let q = Question {
                template: template.into(),
                return_type: ReturnType::Bool,
            };
            let label = oracle.evaluate_one(&oracle.tuple_request(vec![q], attrs)).unwrap().values[0] == AttrValue::Bool(true);
            if label {
                pos += 1;
                kept += similarity_prefilter(row, &spec, 0.15, Some("text")) as usize;
            }
        }
        let recall = kept as f64 / pos.max(1) as f64;
        ok &= recall >= 0.97;
        parts.push(format!("{recall:.3} ({kept}/{pos})"));
        kept_all += kept;
        pos_all += pos;
    }
    check(
        ok && pos_all > 0,
        format!("recall mentions {}, complaint {}; pooled {:.3}", parts[0], parts[1], kept_all as f64 / pos_all as f64),
    )
}

// ---------------------------------------------------------------------------
// 8. DSL round trip

fn dsl_round_trip() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let count = std::sync::atomic::AtomicUsize::new(0);
    runner
        .run(&common::plan(), |plan| {
            count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let printed = print_plan(&plan);
            let back = parse_untyped(&printed).map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
            proptest::prop_assert_eq!(back, plan);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let s = common::schema();
    let ops = |src: &str| -> Vec<&'static str> {
        parse(src, &s).unwrap().chain().iter().map(|n| n.op_name()).collect()
    };
    let nested_src = common::read_fixture("nested.vq");
    let ordinal_src = common::read_fixture("ordinal.vq");
    let nested_ok = ops(&nested_src) == ["scan", "map", "aggregate", "aggregate", "check"]
        && matches!(
            claim_structure_of(&parse(&nested_src, &s).unwrap()),
            Ok(ClaimStructure::Nested {
                outer: Quantifier::Forall,
                inner: Quantifier::Cardinal(c),
                ..
            }) if c == Comparison::new(CmpOp::Ge, 2.0)
        );
    let ordinal_ok = ops(&ordinal_src) == ["scan", "filter", "map", "aggregate", "with_rank", "filter", "check"]
        && matches!(
            analyze(&parse(&ordinal_src, &s).unwrap()).map(|a| a.structure),
            Ok(ClaimStructure::Ordinal {
                aggregate: GroupAggregate::Proportion,
                rank: 1,
                descending: true,
                ..
            })
        );
    let n = count.load(std::sync::atomic::Ordering::Relaxed);
    check(
        n >= 1000 && nested_ok && ordinal_ok,
        format!("{n} generated plans round-trip; reference programs nested={nested_ok} ordinal={ordinal_ok}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("verdict equivalence", verdict_equivalence),
        ("estimation soundness", estimation_soundness),
        ("provenance correctness", provenance_correctness),
        ("early-stopping economics", economics),
        ("budget arithmetic", budget_arithmetic),
        ("rank and RRF oracles", rank_and_rrf),
        ("similarity prefilter recall", prefilter_recall),
        ("DSL round trip", dsl_round_trip),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {}: PASS {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
