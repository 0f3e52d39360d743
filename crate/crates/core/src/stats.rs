//! Anytime-valid confidence sequences for Bernoulli means, stopping rules
//! and family-wise error budgets.
//!
//! The primary construction is the hedged betting CS: for every candidate
//! mean `m` on a grid of `G + 1` points two capital processes bet for and
//! against `m` with a predictable plug-in bet, and `m` leaves the interval
//! once the averaged capital reaches `1/α`. Without replacement the bet is
//! placed against the conditional mean of the remaining population, and
//! candidates that the observed counts make infeasible are dropped.
//! A closed-form predictable-mixture Hoeffding CS sits behind the same
//! interface for cross-checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{cmp_real, CmpOp, Comparison};

pub const GRID: usize = 1000;
/// Bets are clipped to `c/m` and `c/(1-m)` so that capital stays positive.
const BET_CLIP: f64 = 0.5;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("confidence sequence updated after finalization")]
    Finalized,
    #[error("population of {0} exhausted; no further observations possible")]
    PopulationExhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsMode {
    WithReplacement,
    WithoutReplacement { n_total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CsKind {
    #[default]
    Betting,
    Hoeffding,
}

/// A confidence sequence over a stream of Bernoulli observations.
pub trait ConfidenceSequence {
    /// Consumes observation `x`; `s` and `sum` are the counts *before* it.
    fn observe(&mut self, x: bool, s: usize, sum: usize);
    /// Current (un-intersected) interval.
    fn raw_interval(&self) -> (f64, f64);
}

fn grid_point(k: usize) -> f64 {
    k as f64 / GRID as f64
}

/// Predictable plug-in mean/variance estimates shared by both constructions.
#[derive(Debug, Clone)]
struct PlugIn {
    t: usize,
    sum: f64,
    sq_dev: f64,
}

impl PlugIn {
    fn new() -> Self {
        Self {
            t: 0,
            sum: 0.0,
            sq_dev: 0.0,
        }
    }

    fn var(&self) -> f64 {
        (0.25 + self.sq_dev) / (self.t as f64 + 1.0)
    }

    fn push(&mut self, x: f64) {
        self.t += 1;
        self.sum += x;
        let mu = (0.5 + self.sum) / (self.t as f64 + 1.0);
        self.sq_dev += (x - mu) * (x - mu);
    }
}

/// Hedged betting CS inverted over the candidate grid. Only the contiguous
/// range of surviving candidates is tracked; it shrinks from the edges.
#[derive(Debug, Clone)]
pub struct BettingCs {
    alpha: f64,
    n_total: Option<usize>,
    lo: usize,
    hi: usize,
    k_plus: Vec<f64>,
    k_minus: Vec<f64>,
    plug: PlugIn,
    empty: bool,
}

impl BettingCs {
    pub fn new(alpha: f64, n_total: Option<usize>) -> Self {
        Self {
            alpha,
            n_total,
            lo: 0,
            hi: GRID,
            k_plus: vec![1.0; GRID + 1],
            k_minus: vec![1.0; GRID + 1],
            plug: PlugIn::new(),
            empty: false,
        }
    }

    fn bet(&self) -> f64 {
        let t = self.plug.t as f64 + 1.0;
        (2.0 * (2.0 / self.alpha).ln() / (self.plug.var() * t * (1.0 + t).ln())).sqrt()
    }

    fn rejected(&self, k: usize, s: usize, sum: usize) -> bool {
        if let Some(n) = self.n_total {
            // candidates within half a grid step of a feasible mean survive
            let tol = n as f64 / (2 * GRID) as f64 + FEASIBILITY_TOL;
            let remaining_pos = n as f64 * grid_point(k) - sum as f64;
            if remaining_pos < -tol || remaining_pos > (n - s) as f64 + tol {
                return true;
            }
        }
        0.5 * (self.k_plus[k] + self.k_minus[k]) >= 1.0 / self.alpha
    }
}

impl ConfidenceSequence for BettingCs {
    fn observe(&mut self, x: bool, s: usize, sum: usize) {
        if self.empty {
            return;
        }
        let lambda = self.bet();
        let xv = if x { 1.0 } else { 0.0 };
        for k in self.lo..=self.hi {
            let m = match self.n_total {
                None => grid_point(k),
                Some(n) => {
                    let rem = (n - s) as f64;
                    ((n as f64 * grid_point(k) - sum as f64) / rem).clamp(0.0, 1.0)
                }
            };
            let lp = if m > 0.0 { lambda.min(BET_CLIP / m) } else { lambda };
            let lm = if m < 1.0 { lambda.min(BET_CLIP / (1.0 - m)) } else { lambda };
            self.k_plus[k] *= 1.0 + lp * (xv - m);
            self.k_minus[k] *= 1.0 - lm * (xv - m);
        }
        self.plug.push(xv);
        let (s, sum) = (s + 1, sum + x as usize);
        while self.lo <= self.hi && self.rejected(self.lo, s, sum) {
            self.lo += 1;
        }
        while self.hi > self.lo && self.rejected(self.hi, s, sum) {
            self.hi -= 1;
        }
        if self.lo > self.hi || (self.lo == self.hi && self.rejected(self.hi, s, sum)) {
            // every candidate rejected: only possible on a miscovered
            // stream; keep the last surviving point
            self.empty = true;
            self.lo = self.hi.min(self.lo);
            self.hi = self.lo;
        }
    }

    fn raw_interval(&self) -> (f64, f64) {
        (grid_point(self.lo), grid_point(self.hi))
    }
}

/// Predictable-mixture Hoeffding CS (closed form, with replacement).
#[derive(Debug, Clone)]
pub struct HoeffdingCs {
    alpha: f64,
    sum_lambda: f64,
    sum_lambda_x: f64,
    sum_lambda_sq: f64,
    t: usize,
}

impl HoeffdingCs {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            sum_lambda: 0.0,
            sum_lambda_x: 0.0,
            sum_lambda_sq: 0.0,
            t: 0,
        }
    }
}

impl ConfidenceSequence for HoeffdingCs {
    fn observe(&mut self, x: bool, _s: usize, _sum: usize) {
        self.t += 1;
        let t = self.t as f64;
        let lambda = (8.0 * (2.0 / self.alpha).ln() / (t * (t + 1.0).ln())).sqrt().min(1.0);
        self.sum_lambda += lambda;
        self.sum_lambda_x += lambda * if x { 1.0 } else { 0.0 };
        self.sum_lambda_sq += lambda * lambda;
    }

    fn raw_interval(&self) -> (f64, f64) {
        if self.t == 0 {
            return (0.0, 1.0);
        }
        let center = self.sum_lambda_x / self.sum_lambda;
        let radius = ((2.0 / self.alpha).ln() + self.sum_lambda_sq / 8.0) / self.sum_lambda;
        ((center - radius).max(0.0), (center + radius).min(1.0))
    }
}

#[derive(Debug, Clone)]
enum Construction {
    Betting(BettingCs),
    Hoeffding(HoeffdingCs),
}

/// Running CS state for one accumulator (or one group of it).
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    pub alpha: f64,
    pub mode: CsMode,
    s: usize,
    sum: usize,
    lo: f64,
    hi: f64,
    finalized: bool,
    cs: Construction,
}

impl ConfidenceState {
    pub fn new(alpha: f64, mode: CsMode, kind: CsKind) -> Self {
        let n_total = match mode {
            CsMode::WithReplacement => None,
            CsMode::WithoutReplacement { n_total } => Some(n_total),
        };
        let cs = match kind {
            CsKind::Betting => Construction::Betting(BettingCs::new(alpha, n_total)),
            CsKind::Hoeffding => Construction::Hoeffding(HoeffdingCs::new(alpha)),
        };
        Self {
            alpha,
            mode,
            s: 0,
            sum: 0,
            lo: 0.0,
            hi: 1.0,
            finalized: false,
            cs,
        }
    }

    pub fn observations(&self) -> usize {
        self.s
    }

    pub fn positives(&self) -> usize {
        self.sum
    }

    pub fn n_total(&self) -> Option<usize> {
        match self.mode {
            CsMode::WithReplacement => None,
            CsMode::WithoutReplacement { n_total } => Some(n_total),
        }
    }

    /// Running-intersected interval `[L_s, U_s]`.
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn update(&mut self, x: bool) -> Result<(), StatsError> {
        if self.finalized {
            return Err(StatsError::Finalized);
        }
        if let CsMode::WithoutReplacement { n_total } = self.mode {
            if self.s >= n_total {
                return Err(StatsError::PopulationExhausted(n_total));
            }
        }
        let (lo, hi) = match &mut self.cs {
            Construction::Betting(b) => {
                b.observe(x, self.s, self.sum);
                b.raw_interval()
            }
            Construction::Hoeffding(h) => {
                h.observe(x, self.s, self.sum);
                h.raw_interval()
            }
        };
        self.s += 1;
        self.sum += x as usize;
        let (nlo, nhi) = (self.lo.max(lo), self.hi.min(hi));
        if nlo <= nhi {
            self.lo = nlo;
            self.hi = nhi;
        } else {
            // disjoint from the running interval (a miscoverage event);
            // collapse to the nearest endpoint so the state stays an interval
            let p = if hi < self.lo { self.lo } else { self.hi };
            self.lo = p;
            self.hi = p;
        }
        Ok(())
    }
}

/// What an estimating accumulator tries to decide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CsTarget {
    /// Comparison over the proportion.
    Proportion(Comparison),
    /// Comparison over the count; the interval is scaled by `n_total`.
    Count(Comparison),
    /// `bool_and`: confirm-only, `mu = 1` within tolerance.
    All,
    /// `bool_or`: at least one satisfying tuple.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsDecision {
    Running,
    Resolved(bool),
    /// A count-scaled rule was requested without a known total.
    NeedsTotal,
}

fn tolerance(rho: f64, eps: f64, cap: f64) -> (f64, f64) {
    ((rho * (1.0 - eps)).max(0.0), (rho * (1.0 + eps)).min(cap))
}

fn decide(lo: f64, hi: f64, c: Comparison, eps: f64, cap: f64) -> CsDecision {
    let rho = c.threshold;
    let verdict = match c.op {
        CmpOp::Ge if cmp_real(lo, CmpOp::Ge, rho) => Some(true),
        CmpOp::Ge if cmp_real(hi, CmpOp::Lt, rho) => Some(false),
        CmpOp::Gt if cmp_real(lo, CmpOp::Gt, rho) => Some(true),
        CmpOp::Gt if cmp_real(hi, CmpOp::Le, rho) => Some(false),
        CmpOp::Le if cmp_real(hi, CmpOp::Le, rho) => Some(true),
        CmpOp::Le if cmp_real(lo, CmpOp::Gt, rho) => Some(false),
        CmpOp::Lt if cmp_real(hi, CmpOp::Lt, rho) => Some(true),
        CmpOp::Lt if cmp_real(lo, CmpOp::Ge, rho) => Some(false),
        CmpOp::Eq | CmpOp::Ne => {
            let (tlo, thi) = tolerance(rho, eps, cap);
            let inside = cmp_real(lo, CmpOp::Ge, tlo) && cmp_real(hi, CmpOp::Le, thi);
            let disjoint = cmp_real(hi, CmpOp::Lt, tlo) || cmp_real(lo, CmpOp::Gt, thi);
            let eq = if inside {
                Some(true)
            } else if disjoint {
                Some(false)
            } else {
                None
            };
            eq.map(|v| if c.op == CmpOp::Eq { v } else { !v })
        }
        _ => None,
    };
    verdict.map_or(CsDecision::Running, CsDecision::Resolved)
}

/// Stopping rule for interval `[lo, hi]`. Count-scaled targets need `n`.
pub fn cs_resolve_interval(lo: f64, hi: f64, target: CsTarget, eps: f64, n: Option<usize>) -> CsDecision {
    match target {
        CsTarget::Proportion(c) => decide(lo, hi, c, eps, 1.0),
        CsTarget::Count(c) => match n {
            Some(n) => decide(n as f64 * lo, n as f64 * hi, c, eps, n as f64),
            None => CsDecision::NeedsTotal,
        },
        CsTarget::All => {
            if cmp_real(lo, CmpOp::Ge, 1.0 - eps) {
                CsDecision::Resolved(true)
            } else {
                CsDecision::Running
            }
        }
        CsTarget::Any => match n {
            Some(n) if cmp_real(n as f64 * lo, CmpOp::Ge, 1.0) => CsDecision::Resolved(true),
            Some(n) if cmp_real(n as f64 * hi, CmpOp::Lt, 1.0) => CsDecision::Resolved(false),
            Some(_) => CsDecision::Running,
            None => CsDecision::NeedsTotal,
        },
    }
}

pub fn cs_resolve(state: &ConfidenceState, target: CsTarget, eps: f64, n: Option<usize>) -> CsDecision {
    let (lo, hi) = state.interval();
    cs_resolve_interval(lo, hi, target, eps, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Allocation {
    Bonferroni,
    Geometric,
}

/// Budget inputs for one estimating aggregate operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorBudget {
    /// Estimating accumulators in the operator.
    pub accumulators: usize,
    /// Number of groups if known before execution.
    pub groups: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub alpha: f64,
    pub operators: Vec<OperatorBudget>,
}

impl BudgetPlan {
    pub fn o(&self) -> usize {
        self.operators.len()
    }

    pub fn rule(&self, op: usize) -> Allocation {
        match self.operators[op].groups {
            Some(_) => Allocation::Bonferroni,
            None => Allocation::Geometric,
        }
    }

    /// Significance level for one accumulator of operator `op` in its
    /// `group`-th group (1-based, in stream order).
    pub fn alpha_for(&self, op: usize, group: usize) -> f64 {
        let b = self.operators[op];
        let per_op = self.o() * b.accumulators.max(1);
        match b.groups {
            Some(g) => div_down(self.alpha, per_op * g.max(1)),
            // halving is exact, so the geometric tail sums below alpha/per_op
            None => div_down(self.alpha, per_op) / 2f64.powi(group.clamp(1, 1023) as i32),
        }
    }

    /// Upper bound on the significance the plan can spend (groups summed
    /// to infinity under the geometric rule).
    pub fn total_bound(&self) -> f64 {
        (0..self.o())
            .map(|op| {
                let b = self.operators[op];
                let a = b.accumulators.max(1);
                match b.groups {
                    Some(g) => self.alpha_for(op, 1) * (a * g.max(1)) as f64,
                    None => div_down(self.alpha, self.o() * a) * a as f64,
                }
            })
            .sum()
    }
}

/// `x / n` rounded toward zero, so that `n` copies never sum above `x`.
fn div_down(x: f64, n: usize) -> f64 {
    let q = x / n as f64;
    // the fused product is exact in sign, so this detects upward rounding
    if q.mul_add(n as f64, -x) > 0.0 {
        q.next_down()
    } else {
        q
    }
}

/// Splits `alpha` equally across estimating operators, then across each
/// operator's accumulators and groups (Bonferroni when the group count is
/// known, geometric otherwise).
pub fn allocate_budget(alpha: f64, operators: &[OperatorBudget]) -> BudgetPlan {
    BudgetPlan {
        alpha,
        operators: operators.to_vec(),
    }
}

/// Seeded Fisher–Yates permutation.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// Permutes block order and, if `within`, each block's contents; blocks
/// stay contiguous.
pub fn shuffle_blocks<T>(blocks: &mut [Vec<T>], seed: u64, within: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    blocks.shuffle(&mut rng);
    if within {
        for b in blocks.iter_mut() {
            b.shuffle(&mut rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward reference: recompute both capital processes for every
    /// grid point from the full history, take the surviving min/max.
    fn naive_betting(xs: &[bool], alpha: f64, n_total: Option<usize>) -> Vec<(f64, f64)> {
        let mut lambdas = Vec::new();
        let (mut sum, mut sq) = (0.0f64, 0.0f64);
        for (i, &x) in xs.iter().enumerate() {
            let t = (i + 1) as f64;
            let var = (0.25 + sq) / t;
            lambdas.push((2.0 * (2.0 / alpha).ln() / (var * t * (1.0 + t).ln())).sqrt());
            let xv = x as u8 as f64;
            sum += xv;
            let mu = (0.5 + sum) / (t + 1.0);
            sq += (xv - mu).powi(2);
        }
        let mut out = Vec::new();
        let (mut run_lo, mut run_hi) = (0.0f64, 1.0f64);
        for t in 1..=xs.len() {
            let mut alive = Vec::new();
            for k in 0..=GRID {
                let m = k as f64 / GRID as f64;
                let (mut lp, mut lm) = (0.0f64, 0.0f64);
                let mut feasible = true;
                let mut pos = 0usize;
                for i in 0..t {
                    let mi = match n_total {
                        None => m,
                        Some(n) => ((n as f64 * m - pos as f64) / (n - i) as f64).clamp(0.0, 1.0),
                    };
                    let xv = xs[i] as u8 as f64;
                    let bp = if mi > 0.0 { lambdas[i].min(0.5 / mi) } else { lambdas[i] };
                    let bm = if mi < 1.0 { lambdas[i].min(0.5 / (1.0 - mi)) } else { lambdas[i] };
                    lp += (1.0 + bp * (xv - mi)).ln();
                    lm += (1.0 - bm * (xv - mi)).ln();
                    pos += xs[i] as usize;
                }
                if let Some(n) = n_total {
                    let r = n as f64 * m - pos as f64;
                    let tol = n as f64 / (2 * GRID) as f64 + 1e-9;
                    feasible = r >= -tol && r <= (n - t) as f64 + tol;
                }
                let hedged = 0.5 * lp.exp() + 0.5 * lm.exp();
                if feasible && hedged < 1.0 / alpha {
                    alive.push(m);
                }
            }
            assert!(!alive.is_empty(), "t={t} n={n_total:?}");
            let (lo, hi) = (alive[0], *alive.last().unwrap());
            run_lo = run_lo.max(lo);
            run_hi = run_hi.min(hi);
            out.push((run_lo, run_hi));
        }
        out
    }

    fn run(xs: &[bool], alpha: f64, mode: CsMode, kind: CsKind) -> Vec<(f64, f64)> {
        let mut st = ConfidenceState::new(alpha, mode, kind);
        xs.iter()
            .map(|&x| {
                st.update(x).unwrap();
                st.interval()
            })
            .collect()
    }

    #[test]
    fn five_ones_golden() {
        let xs = [true; 5];
        let got = run(&xs, 0.05, CsMode::WithReplacement, CsKind::Betting);
        assert_eq!(got, naive_betting(&xs, 0.05, None));
        let (lo, hi) = got[4];
        assert_eq!(hi, 1.0);
        assert!(lo > 0.0);
        // frozen from the reference implementation above
        let frozen = [0.0, 0.038, 0.172, 0.249, 0.315];
        for (i, &f) in frozen.iter().enumerate() {
            assert!((got[i].0 - f).abs() < 1e-12, "s={} lo={} want {f} all={got:?}", i + 1, got[i].0);
        }
    }

    #[test]
    fn matches_reference_on_random_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        use rand::Rng;
        let xs: Vec<bool> = (0..120).map(|_| rng.random_bool(0.3)).collect();
        assert_eq!(run(&xs, 0.05, CsMode::WithReplacement, CsKind::Betting), naive_betting(&xs, 0.05, None));
        let xs = &xs[..60];
        let wor = CsMode::WithoutReplacement { n_total: 60 };
        assert_eq!(run(xs, 0.05, wor, CsKind::Betting), naive_betting(xs, 0.05, Some(60)));
    }

    #[test]
    fn empty_is_unit_interval() {
        let st = ConfidenceState::new(0.05, CsMode::WithReplacement, CsKind::Betting);
        assert_eq!(st.interval(), (0.0, 1.0));
    }

    #[test]
    fn without_replacement_collapses() {
        let xs = [true, false, false, true, false, true, false, false, true, false];
        let got = run(&xs, 0.05, CsMode::WithoutReplacement { n_total: 10 }, CsKind::Betting);
        let (lo, hi) = got[9];
        assert_eq!((lo, hi), (0.4, 0.4));
        let mut st = ConfidenceState::new(0.05, CsMode::WithoutReplacement { n_total: 10 }, CsKind::Betting);
        for &x in &xs {
            st.update(x).unwrap();
        }
        assert_eq!(st.update(true), Err(StatsError::PopulationExhausted(10)));
    }

    #[test]
    fn update_after_finalize_is_an_error() {
        let mut st = ConfidenceState::new(0.05, CsMode::WithReplacement, CsKind::Hoeffding);
        st.update(true).unwrap();
        st.finalize();
        assert_eq!(st.update(true), Err(StatsError::Finalized));
    }

    #[test]
    fn hoeffding_is_valid_interval() {
        let xs: Vec<bool> = (0..500).map(|i| i % 3 == 0).collect();
        let got = run(&xs, 0.05, CsMode::WithReplacement, CsKind::Hoeffding);
        let (lo, hi) = got[499];
        assert!(lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi && hi - lo < 0.3);
    }

    #[test]
    fn resolve_rules() {
        let ge = |t| CsTarget::Proportion(Comparison::new(CmpOp::Ge, t));
        assert_eq!(cs_resolve_interval(0.62, 0.91, ge(0.5), 0.05, None), CsDecision::Resolved(true));
        assert_eq!(cs_resolve_interval(0.1, 0.49, ge(0.5), 0.05, None), CsDecision::Resolved(false));
        let eq = CsTarget::Proportion(Comparison::new(CmpOp::Eq, 0.5));
        assert_eq!(cs_resolve_interval(0.48, 0.52, eq, 0.05, None), CsDecision::Resolved(true));
        let ne = CsTarget::Proportion(Comparison::new(CmpOp::Ne, 0.5));
        assert_eq!(cs_resolve_interval(0.48, 0.52, ne, 0.05, None), CsDecision::Resolved(false));
        assert_eq!(cs_resolve_interval(0.0, 0.008, CsTarget::Any, 0.05, Some(100)), CsDecision::Resolved(false));
        assert_eq!(cs_resolve_interval(0.0, 0.008, CsTarget::Any, 0.05, None), CsDecision::NeedsTotal);
        assert_eq!(cs_resolve_interval(0.96, 1.0, CsTarget::All, 0.05, None), CsDecision::Resolved(true));
        assert_eq!(cs_resolve_interval(0.0, 0.5, CsTarget::All, 0.05, None), CsDecision::Running);
        let count = CsTarget::Count(Comparison::new(CmpOp::Le, 10.0));
        assert_eq!(cs_resolve_interval(0.0, 0.05, count, 0.05, Some(100)), CsDecision::Resolved(true));
        assert_eq!(cs_resolve_interval(0.0, 0.05, count, 0.05, None), CsDecision::NeedsTotal);
    }

    #[test]
    fn budget_examples() {
        let one = |g| OperatorBudget { accumulators: 1, groups: g };
        let p = allocate_budget(0.05, &[one(Some(4))]);
        assert_eq!(p.rule(0), Allocation::Bonferroni);
        assert!((p.alpha_for(0, 1) - 0.0125).abs() < 1e-15);
        let p = allocate_budget(0.05, &[one(None)]);
        assert!((p.alpha_for(0, 3) - 0.00625).abs() < 1e-15);
        let two = OperatorBudget { accumulators: 2, groups: Some(1) };
        let p = allocate_budget(0.05, &[two, two]);
        assert!((p.alpha_for(1, 1) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn shuffles_are_seeded_and_contiguous() {
        let mut a: Vec<u32> = (0..5).collect();
        let mut b = a.clone();
        shuffle(&mut a, 42);
        shuffle(&mut b, 42);
        assert_eq!(a, b);
        let mut one = vec![9];
        shuffle(&mut one, 1);
        assert_eq!(one, [9]);
        let mut blocks = vec![vec![1, 1, 1], vec![2, 2], vec![3, 3, 3, 3]];
        shuffle_blocks(&mut blocks, 3, true);
        let flat: Vec<i32> = blocks.concat();
        let mut changes = 0;
        for w in flat.windows(2) {
            changes += (w[0] != w[1]) as usize;
        }
        assert_eq!(changes, 2);
    }
}
