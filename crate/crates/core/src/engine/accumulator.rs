//! Early-stopping accumulator behind bool_or, bool_and, count_if and
//! proportion.

use serde::{Deserialize, Serialize};

use crate::claims::{cmp_real, CmpOp, Comparison, Quantifier};
use crate::provenance::Observation;
use crate::stats::{cs_resolve, ConfidenceState, CsDecision, CsKind, CsMode, CsTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccState {
    Running,
    Resolved(bool),
    /// Input ended before any rule fired; the value is exact.
    Exhausted(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolvedBy {
    Witness,
    RunningCount,
    Bounds,
    Estimate,
    Exhaustion,
}

#[derive(Debug, Clone)]
struct Estimator {
    state: ConfidenceState,
    target: CsTarget,
    eps: f64,
}

/// Running count for one quantifier over one stream (or one group).
#[derive(Debug, Clone)]
pub struct Accumulator {
    pub quantifier: Quantifier,
    /// Whether deterministic early-stopping rules may fire.
    pub hints: bool,
    pub n_total: Option<usize>,
    seen: usize,
    positives: usize,
    state: AccState,
    resolved_by: Option<ResolvedBy>,
    tokens: Vec<Observation>,
    estimator: Option<Estimator>,
}

/// CS target for a quantifier, or `None` when estimation cannot decide it.
pub fn cs_target(q: Quantifier, n_total: Option<usize>) -> Option<CsTarget> {
    let degenerate = |c: Comparison| matches!(c.op, CmpOp::Eq | CmpOp::Ne) && c.threshold == 0.0;
    match q {
        Quantifier::Exists => n_total.map(|_| CsTarget::Any),
        Quantifier::Forall => Some(CsTarget::All),
        Quantifier::Cardinal(c) if n_total.is_some() && !degenerate(c) => Some(CsTarget::Count(c)),
        Quantifier::Cardinal(_) => None,
        Quantifier::Proportional(c) if !degenerate(c) => Some(CsTarget::Proportion(c)),
        Quantifier::Proportional(_) => None,
    }
}

/// Truth of comparison `c` over every integer count in `[lo, hi]`
/// (`hi = None` for unbounded); values are divided by `scale` when given.
/// `Some(v)` when the comparison has value `v` at every reachable count.
pub fn bound_truth(c: Comparison, lo: usize, hi: Option<usize>, scale: Option<usize>) -> Option<bool> {
    let val = |x: usize| match scale {
        Some(n) => x as f64 / n as f64,
        None => x as f64,
    };
    let h = |x: usize| c.holds(val(x));
    match c.op {
        CmpOp::Ge | CmpOp::Gt => {
            if h(lo) {
                Some(true)
            } else if hi.is_some_and(|hi| !h(hi)) {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Le | CmpOp::Lt => {
            if !h(lo) {
                Some(false)
            } else if hi.is_some_and(h) {
                Some(true)
            } else {
                None
            }
        }
        CmpOp::Eq | CmpOp::Ne => {
            let target = match scale {
                Some(n) => c.threshold * n as f64,
                None => c.threshold,
            };
            let cand = target.round();
            let reachable = cand >= 0.0
                && cand as usize >= lo
                && hi.is_none_or(|hi| cand as usize <= hi)
                && cmp_real(val(cand as usize), CmpOp::Eq, c.threshold);
            let is_eq = c.op == CmpOp::Eq;
            if !reachable {
                Some(!is_eq)
            } else if hi == Some(lo) {
                Some(is_eq)
            } else {
                None
            }
        }
    }
}

impl Accumulator {
    pub fn new(quantifier: Quantifier, n_total: Option<usize>) -> Self {
        Self {
            quantifier,
            hints: true,
            n_total,
            seen: 0,
            positives: 0,
            state: AccState::Running,
            resolved_by: None,
            tokens: Vec::new(),
            estimator: None,
        }
    }

    pub fn with_hints(mut self, on: bool) -> Self {
        self.hints = on;
        self
    }

    /// Attaches a confidence sequence when the quantifier admits one.
    pub fn with_estimation(mut self, alpha: f64, kind: CsKind, eps: f64) -> Self {
        if let Some(target) = cs_target(self.quantifier, self.n_total) {
            let mode = match self.n_total {
                Some(n_total) => CsMode::WithoutReplacement { n_total },
                None => CsMode::WithReplacement,
            };
            self.estimator = Some(Estimator {
                state: ConfidenceState::new(alpha, mode, kind),
                target,
                eps,
            });
        }
        self
    }

    pub fn is_estimating(&self) -> bool {
        self.estimator.is_some()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.estimator.as_ref().map(|e| e.state.alpha)
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        self.estimator.as_ref().map(|e| e.state.interval())
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn state(&self) -> AccState {
        self.state
    }

    pub fn resolved_by(&self) -> Option<ResolvedBy> {
        self.resolved_by
    }

    pub fn is_running(&self) -> bool {
        self.state == AccState::Running
    }

    pub fn value(&self) -> Option<bool> {
        match self.state {
            AccState::Running => None,
            AccState::Resolved(v) | AccState::Exhausted(v) => Some(v),
        }
    }

    /// Observations consumed, in order.
    pub fn tokens(&self) -> &[Observation] {
        &self.tokens
    }

    fn resolve(&mut self, v: bool, by: ResolvedBy) -> AccState {
        self.state = match by {
            ResolvedBy::Exhaustion => AccState::Exhausted(v),
            _ => AccState::Resolved(v),
        };
        self.resolved_by = Some(by);
        if let Some(e) = &mut self.estimator {
            e.state.finalize();
        }
        self.state
    }

    /// Consumes one tuple's formula value.
    ///
    /// # Panics
    /// If the accumulator is no longer running.
    pub fn accumulate(&mut self, row_id: usize, value: bool) -> AccState {
        assert!(self.is_running(), "accumulate after resolution");
        self.seen += 1;
        self.positives += value as usize;
        self.tokens.push((row_id, value));
        if let Some(n) = self.n_total {
            debug_assert!(self.seen <= n, "more tuples than the counted total");
        }
        let q = self.quantifier;
        let (pos, seen) = (self.positives, self.seen);

        if self.hints {
            // witness and counterexample
            match q {
                Quantifier::Exists if pos > 0 => return self.resolve(true, ResolvedBy::Witness),
                Quantifier::Forall if pos < seen => return self.resolve(false, ResolvedBy::Witness),
                Quantifier::Cardinal(c) => match c.op {
                    CmpOp::Ge | CmpOp::Gt if c.holds(pos as f64) => {
                        return self.resolve(true, ResolvedBy::RunningCount)
                    }
                    CmpOp::Le | CmpOp::Lt if !c.holds(pos as f64) => {
                        return self.resolve(false, ResolvedBy::RunningCount)
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        if self.n_total == Some(seen) {
            return self.exhaust();
        }
        if self.hints {
            if let Some(n) = self.n_total {
                let hi = Some(pos + n - seen);
                let v = match q {
                    Quantifier::Cardinal(c) => bound_truth(c, pos, hi, None),
                    Quantifier::Proportional(c) => bound_truth(c, pos, hi, Some(n)),
                    _ => None,
                };
                if let Some(v) = v {
                    return self.resolve(v, ResolvedBy::Bounds);
                }
            }
        }
        if let Some(e) = &mut self.estimator {
            e.state.update(value).expect("estimator tracks the accumulator");
            if let CsDecision::Resolved(v) = cs_resolve(&e.state, e.target, e.eps, self.n_total) {
                return self.resolve(v, ResolvedBy::Estimate);
            }
        }
        self.state
    }

    /// Ends the stream: exact value from the counts.
    pub fn exhaust(&mut self) -> AccState {
        if !self.is_running() {
            return self.state;
        }
        let v = self.quantifier.holds(self.positives, self.seen);
        self.resolve(v, ResolvedBy::Exhaustion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(acc: &mut Accumulator, vals: &[bool]) -> usize {
        for (i, &v) in vals.iter().enumerate() {
            if !acc.accumulate(i, v).eq(&AccState::Running) {
                return i + 1;
            }
        }
        acc.exhaust();
        vals.len()
    }

    #[test]
    fn witness_and_counterexample() {
        let mut a = Accumulator::new(Quantifier::Exists, None);
        assert_eq!(feed(&mut a, &[false, false, true, false]), 3);
        assert_eq!(a.state(), AccState::Resolved(true));
        let mut a = Accumulator::new(Quantifier::Forall, None);
        assert_eq!(feed(&mut a, &[true, true, false]), 3);
        assert_eq!(a.state(), AccState::Resolved(false));
    }

    #[test]
    fn count_bounds() {
        let ge = |k| Quantifier::Cardinal(Comparison::new(CmpOp::Ge, k));
        let mut a = Accumulator::new(ge(2.0), None);
        assert_eq!(feed(&mut a, &[true, true]), 2);
        assert_eq!(a.state(), AccState::Resolved(true));
        // max achievable after two misses is 3 < 4
        let mut a = Accumulator::new(ge(4.0), Some(5));
        assert_eq!(feed(&mut a, &[false, false, false]), 2);
        assert_eq!(a.state(), AccState::Resolved(false));
        assert_eq!(a.resolved_by(), Some(ResolvedBy::Bounds));

        let gt = Quantifier::Proportional(Comparison::new(CmpOp::Gt, 0.5));
        let mut a = Accumulator::new(gt, Some(4));
        assert_eq!(feed(&mut a, &[true, true, true]), 3);
        assert_eq!(a.state(), AccState::Resolved(true));

        let eq = Quantifier::Cardinal(Comparison::new(CmpOp::Eq, 2.0));
        let mut a = Accumulator::new(eq, Some(3));
        assert_eq!(feed(&mut a, &[true, false, true]), 3);
        assert_eq!(a.state(), AccState::Exhausted(true));
    }

    #[test]
    fn no_hints_runs_to_end() {
        let mut a = Accumulator::new(Quantifier::Exists, None).with_hints(false);
        assert_eq!(feed(&mut a, &[true, false, false]), 3);
        assert_eq!(a.state(), AccState::Exhausted(true));
        assert_eq!(a.tokens().len(), 3);
    }

    #[test]
    fn bound_truth_eq() {
        let eq = Comparison::new(CmpOp::Eq, 2.5);
        assert_eq!(bound_truth(eq, 0, Some(5), None), Some(false));
        let eq = Comparison::new(CmpOp::Eq, 2.0);
        assert_eq!(bound_truth(eq, 0, Some(5), None), None);
        assert_eq!(bound_truth(eq, 3, None, None), Some(false));
        let ne = Comparison::new(CmpOp::Ne, 0.5);
        assert_eq!(bound_truth(ne, 1, Some(1), Some(2)), Some(false));
    }

    #[test]
    fn estimation_confirms_large_proportion() {
        let q = Quantifier::Proportional(Comparison::new(CmpOp::Ge, 0.2));
        let mut a = Accumulator::new(q, None).with_hints(false).with_estimation(0.05, CsKind::Betting, 0.05);
        let used = feed(&mut a, &vec![true; 200]);
        assert!(used < 200);
        assert_eq!(a.state(), AccState::Resolved(true));
        assert_eq!(a.resolved_by(), Some(ResolvedBy::Estimate));
    }
}
