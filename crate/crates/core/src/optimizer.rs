//! Rule-based rewrite from a logical plan to an annotated physical plan.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::claims::{ClaimStructure, CmpOp, Quantifier};
use crate::dsl::{analyze, print_expr, Analysis, Expr, PlanNode, Stage};
use crate::oracle::{placeholders, SemanticOracle, Task};
use crate::relation::{AttrType, Embedder, Schema};
use crate::relevance::{SearchSpec, DEFAULT_TAU};
use crate::stats::{allocate_budget, BudgetPlan, OperatorBudget};

/// Independently switchable optimizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub early_stopping: bool,
    pub relevance: bool,
    pub estimation: bool,
    pub fusion: bool,
    pub similarity: bool,
    pub caching: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            early_stopping: true,
            relevance: true,
            estimation: true,
            fusion: true,
            similarity: true,
            caching: true,
        }
    }
}

pub const FLAG_NAMES: [&str; 6] = ["early_stopping", "relevance", "estimation", "fusion", "similarity", "caching"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown optimization `{0}` (expected one of: early_stopping, relevance, estimation, fusion, similarity, caching)")]
pub struct UnknownFlag(pub String);

impl Flags {
    pub fn none() -> Self {
        Self {
            early_stopping: false,
            relevance: false,
            estimation: false,
            fusion: false,
            similarity: false,
            caching: false,
        }
    }

    /// Only the optimizations that never change a verdict.
    pub fn deterministic() -> Self {
        Self {
            estimation: false,
            similarity: false,
            ..Self::default()
        }
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<(), UnknownFlag> {
        let slot = match name {
            "early_stopping" => &mut self.early_stopping,
            "relevance" => &mut self.relevance,
            "estimation" => &mut self.estimation,
            "fusion" => &mut self.fusion,
            "similarity" => &mut self.similarity,
            "caching" => &mut self.caching,
            other => return Err(UnknownFlag(other.to_string())),
        };
        *slot = on;
        Ok(())
    }

    pub fn without(mut self, name: &str) -> Result<Self, UnknownFlag> {
        self.set(name, false)?;
        Ok(self)
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        FLAG_NAMES
            .iter()
            .copied()
            .filter(|n| {
                let mut probe = *self;
                probe.set(n, false).is_ok() && probe != *self
            })
            .collect()
    }
}

impl FromStr for Flags {
    type Err = UnknownFlag;

    /// Comma-separated list of optimizations to disable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut f = Flags::default();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            if name == "all" {
                f = Flags::none();
            } else {
                f.set(name, false)?;
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub flags: Flags,
    /// Largest cardinal threshold for which relevance sorting is preferred.
    pub low_k: f64,
    pub tau: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            flags: Flags::default(),
            low_k: 10.0,
            tau: DEFAULT_TAU,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    None,
    Relevance,
    Estimation,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "NONE",
            Strategy::Relevance => "RELEVANCE",
            Strategy::Estimation => "ESTIMATION",
        })
    }
}

/// Annotation for one aggregate, innermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggAnnotation {
    pub alias: String,
    /// Early-stopping hint pushed from the check.
    pub hint: Option<Quantifier>,
    pub strategy: Strategy,
    /// Index into the budget's operators when estimating.
    pub budget_op: Option<usize>,
    /// Significance of the first accumulator-group.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhysOp {
    Filter(Expr),
    Map { expr: Expr, alias: String },
    Prefilter { spec: SearchSpec, tau: f64, attr: String },
    Fused(Vec<Stage>),
}

impl PhysOp {
    fn stage(&self) -> Option<Stage> {
        match self {
            PhysOp::Filter(p) => Some(Stage::Filter { predicate: p.clone() }),
            PhysOp::Map { expr, alias } => Some(Stage::Map {
                expr: expr.clone(),
                alias: alias.clone(),
            }),
            _ => None,
        }
    }

    pub fn is_filter(&self) -> bool {
        match self {
            PhysOp::Filter(_) | PhysOp::Prefilter { .. } => true,
            PhysOp::Fused(stages) => stages.iter().any(|s| matches!(s, Stage::Filter { .. })),
            PhysOp::Map { .. } => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleSpec {
    pub seed: u64,
    /// Permute group blocks (grouped plans).
    pub hierarchical: bool,
    /// Also permute tuples within each block.
    pub within: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamOrder {
    pub relevance: Option<(SearchSpec, String)>,
    pub group_sort: Vec<String>,
    pub shuffle: Option<ShuffleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlan {
    pub logical: PlanNode,
    /// `None` for plans outside the recognized shapes; they run as a full scan.
    pub analysis: Option<Analysis>,
    /// Symbolic filters over base attributes, applied at the scan.
    pub pushed_filters: Vec<Expr>,
    pub ops: Vec<PhysOp>,
    pub order: StreamOrder,
    /// Number of leading ops evaluated before counting; `None` when totals
    /// are not available before aggregation.
    pub count_scan: Option<usize>,
    pub aggs: Vec<AggAnnotation>,
    pub budget: Option<BudgetPlan>,
    pub flags: Flags,
    pub notes: Vec<String>,
}

impl PhysicalPlan {
    pub fn has_estimation(&self) -> bool {
        self.aggs.iter().any(|a| a.strategy == Strategy::Estimation)
    }

    pub fn strategy(&self, level: usize) -> Strategy {
        self.aggs.get(level).map_or(Strategy::None, |a| a.strategy)
    }
}

fn write_stage(f: &mut fmt::Formatter<'_>, s: &Stage) -> fmt::Result {
    match s {
        Stage::Filter { predicate } => write!(f, "filter {}", print_expr(predicate)),
        Stage::Map { expr, alias } => write!(f, "map {} as {alias}", print_expr(expr)),
    }
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scan(df)")?;
        for p in &self.pushed_filters {
            write!(f, "\n  where {}", print_expr(p))?;
        }
        if !self.order.group_sort.is_empty() {
            write!(f, "\nGroupSort({})", self.order.group_sort.join(", "))?;
        }
        if let Some((spec, attr)) = &self.order.relevance {
            write!(
                f,
                "\nRelevanceSort(attr={attr}, query={:?}, include={:?}, exclude={:?})",
                spec.query, spec.inclusion_keywords, spec.exclusion_keywords
            )?;
        }
        if let Some(s) = &self.order.shuffle {
            write!(
                f,
                "\nShuffle(seed={}, hierarchical={}, within={})",
                s.seed, s.hierarchical, s.within
            )?;
        }
        for (i, op) in self.ops.iter().enumerate() {
            if self.count_scan == Some(i) {
                write!(f, "\nCountScan")?;
            }
            match op {
                PhysOp::Filter(p) => write!(f, "\nFilter({})", print_expr(p))?,
                PhysOp::Map { expr, alias } => write!(f, "\nMap({} as {alias})", print_expr(expr))?,
                PhysOp::Prefilter { spec, tau, attr } => {
                    write!(f, "\nSimilarityPrefilter(attr={attr}, tau={tau}, query={:?})", spec.query)?
                }
                PhysOp::Fused(stages) => {
                    write!(f, "\nFusedSemanticOp[")?;
                    for (j, s) in stages.iter().enumerate() {
                        if j > 0 {
                            write!(f, "; ")?;
                        }
                        write_stage(f, s)?;
                    }
                    write!(f, "]")?;
                }
            }
        }
        if self.count_scan == Some(self.ops.len()) {
            write!(f, "\nCountScan")?;
        }
        for a in &self.aggs {
            write!(f, "\nStreamingAggregate({}", a.alias)?;
            if let Some(h) = a.hint {
                write!(f, ", hint={h}")?;
            }
            write!(f, ", strategy={}", a.strategy)?;
            if let Some(alpha) = a.alpha {
                write!(f, ", alpha={alpha:.6}")?;
            }
            write!(f, ")")?;
        }
        if let PlanNode::Check { predicate, .. } = &self.logical {
            write!(f, "\nCheck({})", print_expr(predicate))?;
        }
        Ok(())
    }
}

/// Columns referenced by a stage, prompt placeholders included.
fn references(e: &Expr) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = e.columns().into_iter().map(str::to_string).collect();
    for p in e.prompts() {
        out.extend(placeholders(&p.template));
    }
    out
}

/// Text attribute a semantic expression reads, if any.
fn text_attr(e: &Expr, schema: &Schema) -> Option<String> {
    e.prompts()
        .iter()
        .flat_map(|p| placeholders(&p.template))
        .find(|name| schema.type_of(name) == Some(AttrType::Text))
}

fn search_context(producer: Option<&Expr>, filters: &[&Expr], analysis: &Analysis, q: Option<Quantifier>) -> String {
    let mut ctx = String::new();
    if let Some(p) = producer {
        for pr in p.prompts() {
            ctx.push_str(&format!("map prompt: {}\n", pr.template));
        }
    }
    for f in filters {
        for pr in f.prompts() {
            ctx.push_str(&format!("filter prompt: {}\n", pr.template));
        }
    }
    ctx.push_str(&format!("aggregate argument: {}\n", print_expr(&analysis.formula)));
    if let Some(q) = q {
        ctx.push_str(&format!("comparison: {q}\n"));
    }
    ctx
}

#[derive(Deserialize)]
struct SpecReply {
    query: String,
    #[serde(default)]
    inclusion_keywords: Vec<String>,
    #[serde(default)]
    exclusion_keywords: Vec<String>,
}

fn parse_spec_reply(raw: &str) -> Option<SpecReply> {
    let t = raw.trim();
    let start = t.find('{')?;
    let end = t.rfind('}')?;
    serde_json::from_str(&t[start..=end]).ok()
}

fn search_prompt(context: &str) -> String {
    format!(
        "A query engine will scan text records looking for ones that satisfy the predicate below.\n\
         Produce a short search query describing such records, keywords whose presence suggests a match, \
         and keywords whose presence suggests a non-match.\n\
         Respond with a JSON object with keys query, inclusion_keywords, exclusion_keywords.\n\n{context}"
    )
}

/// Rewrites logical plans; memoizes search specifications per context.
#[derive(Debug, Default)]
pub struct Optimizer {
    pub cfg: OptimizerConfig,
    specs: Mutex<HashMap<String, SearchSpec>>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Self {
            cfg,
            specs: Mutex::new(HashMap::new()),
        }
    }

    /// One oracle call per distinct context; an unparseable reply is
    /// retried once (unless it came from the cache), then the prompts themselves become the query.
    pub fn build_search_spec(&self, context: &str, oracle: &SemanticOracle, embedder: &dyn Embedder) -> SearchSpec {
        if let Some(s) = self.specs.lock().get(context) {
            return s.clone();
        }
        let req = oracle.task_request(Task::SearchSpec, context, &search_prompt(context));
        let first = oracle.evaluate_one(&req).ok();
        let cached = first.as_ref().is_some_and(|a| a.cached);
        let mut reply = first.and_then(|a| parse_spec_reply(&a.raw));
        // a cached reply is a replay of one already retried
        if reply.is_none() && !cached {
            debug!("search spec reply unparseable, retrying");
            reply = oracle.evaluate_fresh(&req).ok().and_then(|a| parse_spec_reply(&a.raw));
        }
        let (query, inc, exc) = match reply {
            Some(r) => (r.query, r.inclusion_keywords, r.exclusion_keywords),
            None => {
                warn!("search spec generation failed, falling back to prompt text");
                let q: Vec<&str> = context
                    .lines()
                    .filter_map(|l| l.strip_prefix("map prompt: ").or_else(|| l.strip_prefix("filter prompt: ")))
                    .collect();
                (q.join(" "), Vec::new(), Vec::new())
            }
        };
        let spec = SearchSpec::new(query.clone(), inc.clone(), exc.clone(), embedder).unwrap_or_else(|_| SearchSpec {
            query,
            query_embedding: vec![0.0; embedder.dim()],
            inclusion_keywords: inc,
            exclusion_keywords: exc,
        });
        self.specs.lock().insert(context.to_string(), spec.clone());
        spec
    }

    pub fn optimize(
        &self,
        plan: &PlanNode,
        schema: &Schema,
        oracle: &SemanticOracle,
        embedder: &dyn Embedder,
    ) -> PhysicalPlan {
        let cfg = &self.cfg;
        let flags = cfg.flags;
        let mut notes = Vec::new();
        let analysis = match analyze(plan) {
            Ok(a) => Some(a),
            Err(e) => {
                warn!(error = %e, "plan outside recognized shapes; running as full scan");
                notes.push(format!("unclassified plan: {e}"));
                None
            }
        };
        let Some(analysis) = analysis else {
            return PhysicalPlan {
                logical: plan.clone(),
                analysis: None,
                pushed_filters: Vec::new(),
                ops: Vec::new(),
                order: StreamOrder::default(),
                count_scan: None,
                aggs: Vec::new(),
                budget: None,
                flags,
                notes,
            };
        };

        // pushdown of symbolic filters over unshadowed base attributes
        let mut pushed = Vec::new();
        let mut ops: Vec<PhysOp> = Vec::new();
        let mut produced: BTreeSet<String> = BTreeSet::new();
        for stage in &analysis.stages {
            match stage {
                Stage::Filter { predicate } if !predicate.is_semantic() => {
                    let refs = references(predicate);
                    if refs.iter().all(|c| schema.get(c).is_some() && !produced.contains(c)) {
                        pushed.push(predicate.clone());
                    } else {
                        ops.push(PhysOp::Filter(predicate.clone()));
                    }
                }
                Stage::Filter { predicate } => ops.push(PhysOp::Filter(predicate.clone())),
                Stage::Map { expr, alias } => {
                    produced.insert(alias.clone());
                    ops.push(PhysOp::Map {
                        expr: expr.clone(),
                        alias: alias.clone(),
                    });
                }
            }
        }

        // fusion of consecutive independent semantic stages
        if flags.fusion {
            let mut fused: Vec<PhysOp> = Vec::new();
            let mut group: Vec<Stage> = Vec::new();
            let mut out_names: BTreeSet<String> = BTreeSet::new();
            let flush = |group: &mut Vec<Stage>, out: &mut Vec<PhysOp>, names: &mut BTreeSet<String>| {
                match group.len() {
                    0 => {}
                    1 => {
                        let s = group.pop().unwrap();
                        out.push(match s {
                            Stage::Filter { predicate } => PhysOp::Filter(predicate),
                            Stage::Map { expr, alias } => PhysOp::Map { expr, alias },
                        });
                    }
                    _ => out.push(PhysOp::Fused(std::mem::take(group))),
                }
                names.clear();
            };
            for op in ops {
                let stage = op.stage().expect("only filter and map before fusion");
                if stage.is_semantic() {
                    if references(stage.expr()).iter().any(|r| out_names.contains(r)) {
                        flush(&mut group, &mut fused, &mut out_names);
                    }
                    if let Stage::Map { alias, .. } = &stage {
                        out_names.insert(alias.clone());
                    }
                    group.push(stage);
                } else {
                    flush(&mut group, &mut fused, &mut out_names);
                    fused.push(op);
                }
            }
            flush(&mut group, &mut fused, &mut out_names);
            ops = fused;
        }

        let hints: Vec<Option<Quantifier>> = match &analysis.structure {
            ClaimStructure::Simple(q) => vec![Some(*q)],
            ClaimStructure::Nested { outer, inner, .. } => vec![Some(*inner), Some(*outer)],
            ClaimStructure::Ordinal { .. } => vec![None],
        };
        let hints: Vec<Option<Quantifier>> = if flags.early_stopping {
            hints
        } else {
            vec![None; hints.len()]
        };
        let quantifiers: Vec<Option<Quantifier>> = match &analysis.structure {
            ClaimStructure::Simple(q) => vec![Some(*q)],
            ClaimStructure::Nested { outer, inner, .. } => vec![Some(*inner), Some(*outer)],
            ClaimStructure::Ordinal { .. } => vec![None],
        };

        // similarity prefilters below semantic filters
        let traced_attr = analysis
            .formula
            .columns()
            .iter()
            .find_map(|c| analysis.producer(c).and_then(|p| text_attr(p, schema)));
        if flags.similarity {
            let mut with_pre = Vec::new();
            for op in ops {
                let first_filter = match &op {
                    PhysOp::Filter(p) if p.is_semantic() => Some(p.clone()),
                    PhysOp::Fused(stages) => stages.iter().find_map(|s| match s {
                        Stage::Filter { predicate } if predicate.is_semantic() => Some(predicate.clone()),
                        _ => None,
                    }),
                    _ => None,
                };
                if let Some(pred) = first_filter {
                    if let Some(attr) = text_attr(&pred, schema) {
                        let ctx = search_context(None, &[&pred], &analysis, None);
                        let spec = self.build_search_spec(&ctx, oracle, embedder);
                        with_pre.push(PhysOp::Prefilter {
                            spec,
                            tau: cfg.tau,
                            attr,
                        });
                    }
                }
                with_pre.push(op);
            }
            ops = with_pre;
        }

        // count scan
        let fused_filter = ops
            .iter()
            .any(|op| matches!(op, PhysOp::Fused(s) if s.iter().any(|s| matches!(s, Stage::Filter { .. }))));
        let eager = ops.iter().rposition(PhysOp::is_filter).map_or(0, |i| i + 1);
        let map_then_filter = ops[..eager].iter().any(|op| matches!(op, PhysOp::Map { .. } | PhysOp::Fused(_)));
        let eager_semantic = ops[..eager]
            .iter()
            .any(|op| matches!(op, PhysOp::Filter(p) if p.is_semantic()));
        let needs_total = quantifiers.iter().flatten().any(|q| match q {
            Quantifier::Cardinal(c) => !matches!(c.op, CmpOp::Ge | CmpOp::Gt),
            Quantifier::Proportional(_) => true,
            _ => false,
        }) || matches!(analysis.structure, ClaimStructure::Ordinal { .. });
        let count_scan = if fused_filter {
            notes.push("fusion holds a semantic filter; totals unknown before aggregation".into());
            None
        } else if map_then_filter {
            notes.push("a filter depends on a mapped column; totals unknown before aggregation".into());
            None
        } else if eager_semantic && !needs_total {
            None
        } else {
            Some(eager)
        };
        let totals_known = count_scan.is_some();

        let group_keys = analysis.group_keys().to_vec();

        // strategy choice
        let relevance_ok = flags.relevance && traced_attr.is_some();
        let cheap_witness = |q: Quantifier| match q {
            Quantifier::Exists => true,
            Quantifier::Cardinal(c) if matches!(c.op, CmpOp::Ge | CmpOp::Gt) => {
                c.threshold <= cfg.low_k || (!totals_known && fused_filter)
            }
            _ => false,
        };
        let estimable = |q: Quantifier, n_known: bool| match q {
            Quantifier::Exists => n_known,
            Quantifier::Forall => true,
            Quantifier::Cardinal(c) => n_known && !(matches!(c.op, CmpOp::Eq | CmpOp::Ne) && c.threshold == 0.0),
            Quantifier::Proportional(c) => !(matches!(c.op, CmpOp::Eq | CmpOp::Ne) && c.threshold == 0.0),
        };
        let choose = |q: Quantifier, n_known: bool, allow_relevance: bool| {
            if cheap_witness(q) && allow_relevance && relevance_ok {
                return Strategy::Relevance;
            }
            if flags.estimation && estimable(q, n_known) {
                Strategy::Estimation
            } else {
                Strategy::None
            }
        };
        let mut strategies: Vec<Strategy> = match &analysis.structure {
            ClaimStructure::Simple(q) => vec![choose(*q, totals_known, true)],
            ClaimStructure::Nested { outer, inner, .. } => {
                let inner_s = if cheap_witness(*inner) && relevance_ok {
                    Strategy::Relevance
                } else {
                    choose(*inner, totals_known, false)
                };
                let outer_s = if flags.estimation && estimable(*outer, totals_known) {
                    Strategy::Estimation
                } else {
                    Strategy::None
                };
                vec![inner_s, outer_s]
            }
            ClaimStructure::Ordinal { aggregate, .. } => {
                let ok = flags.estimation
                    && (matches!(aggregate, crate::claims::GroupAggregate::Proportion) || totals_known);
                vec![if ok { Strategy::Estimation } else { Strategy::None }]
            }
        };
        if !flags.early_stopping {
            // relevance only pays off when a witness can stop the scan
            strategies.iter_mut().filter(|s| **s == Strategy::Relevance).for_each(|s| *s = Strategy::None);
        }

        let relevance = if strategies[0] == Strategy::Relevance {
            let attr = traced_attr.clone().expect("relevance requires a traced text attribute");
            let producer = analysis.formula.columns().iter().find_map(|c| analysis.producer(c));
            let filters: Vec<&Expr> = analysis
                .stages
                .iter()
                .filter_map(|s| match s {
                    Stage::Filter { predicate } if text_attr(predicate, schema).as_deref() == Some(attr.as_str()) => {
                        Some(predicate)
                    }
                    _ => None,
                })
                .collect();
            let ctx = search_context(producer, &filters, &analysis, quantifiers[0]);
            Some((self.build_search_spec(&ctx, oracle, embedder), attr))
        } else {
            None
        };

        let any_estimation = strategies.contains(&Strategy::Estimation);
        let shuffle = any_estimation.then(|| ShuffleSpec {
            seed: cfg.seed,
            hierarchical: !group_keys.is_empty(),
            within: strategies[0] != Strategy::Relevance,
        });

        // error budget
        let mut operators = Vec::new();
        let mut budget_ops = vec![None; strategies.len()];
        for (level, s) in strategies.iter().enumerate() {
            if *s != Strategy::Estimation {
                continue;
            }
            let grouped_level = level == 0 && !group_keys.is_empty();
            // grouped operators get their group count from the sort at run time
            let groups = if grouped_level { None } else { Some(1) };
            budget_ops[level] = Some(operators.len());
            operators.push(OperatorBudget {
                accumulators: 1,
                groups,
            });
        }
        let budget = (!operators.is_empty()).then(|| allocate_budget(cfg.alpha, &operators));

        let aliases: Vec<String> = match &analysis.structure {
            ClaimStructure::Nested { .. } => vec![analysis.inner_alias.clone(), "outer".to_string()],
            _ => vec![analysis.inner_alias.clone()],
        };
        let aggs = strategies
            .iter()
            .enumerate()
            .map(|(level, s)| AggAnnotation {
                alias: aliases[level].clone(),
                hint: hints[level],
                strategy: *s,
                budget_op: budget_ops[level],
                alpha: budget_ops[level]
                    .filter(|&op| budget.as_ref().is_some_and(|b| b.operators[op].groups.is_some()))
                    .and_then(|op| budget.as_ref().map(|b| b.alpha_for(op, 1))),
            })
            .collect();

        PhysicalPlan {
            logical: plan.clone(),
            analysis: Some(analysis),
            pushed_filters: pushed,
            ops,
            order: StreamOrder {
                relevance,
                group_sort: group_keys,
                shuffle,
            },
            count_scan,
            aggs,
            budget,
            flags,
            notes,
        }
    }
}
