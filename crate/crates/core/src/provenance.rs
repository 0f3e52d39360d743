//! Provenance tokens, per-claim-type assembly, and a brute-force
//! dual-indeterminate polynomial used to validate minimality.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{ClaimStructure, CmpOp, Comparison, GroupAggregate, Quantifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Pos,
    Neg,
}

impl Polarity {
    pub fn of(value: bool) -> Self {
        if value {
            Polarity::Pos
        } else {
            Polarity::Neg
        }
    }

    pub fn is_pos(self) -> bool {
        self == Polarity::Pos
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_pos() { "+" } else { "-" })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProvToken {
    pub row_id: usize,
    pub formula_id: String,
    pub polarity: Polarity,
}

/// One evaluated tuple: `(row_id, formula value)`.
pub type Observation = (usize, bool);

/// Observations of one group (or of the whole stream for simple claims).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupTrace {
    pub key: String,
    /// Tuples consumed by the accumulator, in stream order.
    pub observed: Vec<Observation>,
    /// Group size if known before aggregation.
    pub n_total: Option<usize>,
    /// True when the accumulator consumed the whole group.
    pub exhausted: bool,
    /// Inner verdict (nested) for this group.
    pub value: Option<bool>,
    /// Ordinal only: how this group's aggregate compares with the target's.
    pub versus_target: Option<Standing>,
    /// Ordinal only: certified bounds on the aggregate when not exhausted.
    pub bounds: Option<(f64, f64)>,
}

impl GroupTrace {
    pub fn positives(&self) -> usize {
        self.observed.iter().filter(|o| o.1).count()
    }

    /// Size used for proportional thresholds: the known total, else the
    /// number of tuples consumed.
    pub fn denominator(&self) -> usize {
        self.n_total.unwrap_or(self.observed.len())
    }
}

/// Aggregate of a non-target group relative to the target group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Standing {
    Above,
    Below,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Trace {
    Simple {
        quantifier: Quantifier,
        value: bool,
        stream: GroupTrace,
    },
    Nested {
        outer: Quantifier,
        inner: Quantifier,
        value: bool,
        /// Number of groups if known before aggregation.
        n_groups: Option<usize>,
        groups: Vec<GroupTrace>,
    },
    Ordinal {
        aggregate: GroupAggregate,
        /// Index of the target in `groups`, if it exists in the data.
        target: Option<usize>,
        groups: Vec<GroupTrace>,
    },
}

/// Polarity and count of tokens that suffice to explain `value` when it is
/// established by witnesses. `None` means every processed token is needed;
/// `Some((p, None))` means every processed token of polarity `p`.
fn witness_need(q: Quantifier, value: bool, n: Option<usize>) -> Option<(bool, Option<usize>)> {
    let min_count = |pred: &dyn Fn(usize) -> bool, upto: usize| (0..=upto).find(|&c| pred(c));
    match (q, value) {
        (Quantifier::Exists, true) => Some((true, Some(1))),
        (Quantifier::Forall, false) => Some((false, Some(1))),
        (Quantifier::Cardinal(c), v) | (Quantifier::Proportional(c), v) => {
            let confirms = matches!(c.op, CmpOp::Ge | CmpOp::Gt) && v;
            let refutes = matches!(c.op, CmpOp::Le | CmpOp::Lt) && !v;
            if !(confirms || refutes) {
                return None;
            }
            let m = match q {
                Quantifier::Cardinal(_) => {
                    let start = (c.threshold.floor() - 1.0).max(0.0) as usize;
                    (start..start + 4).find(|&k| c.holds(k as f64) == confirms)
                }
                _ => match n {
                    Some(n) if n > 0 => min_count(&|k| c.holds(k as f64 / n as f64) == confirms, n),
                    _ => return Some((true, None)),
                },
            };
            Some((true, m))
        }
        _ => None,
    }
}

/// Explanation of `value` for a quantifier over one stream of observations.
pub fn explain_quantifier(q: Quantifier, value: bool, stream: &GroupTrace) -> Vec<Observation> {
    match witness_need(q, value, stream.n_total.or(stream.exhausted.then_some(stream.observed.len()))) {
        None => stream.observed.clone(),
        Some((pol, count)) => {
            let it = stream.observed.iter().filter(|o| o.1 == pol).copied();
            match count {
                Some(m) => it.take(m).collect(),
                None => it.collect(),
            }
        }
    }
}

fn pair_witness(agg: GroupAggregate, group: &GroupTrace, beats: f64) -> Vec<Observation> {
    let c = Comparison::new(CmpOp::Gt, beats);
    let q = match agg {
        GroupAggregate::Count => Quantifier::Cardinal(c),
        GroupAggregate::Proportion => Quantifier::Proportional(c),
    };
    explain_quantifier(q, true, group)
}

fn aggregate_value(agg: GroupAggregate, g: &GroupTrace) -> f64 {
    let pos = g.positives() as f64;
    match agg {
        GroupAggregate::Count => pos,
        GroupAggregate::Proportion => {
            let n = g.denominator();
            if n == 0 {
                0.0
            } else {
                pos / n as f64
            }
        }
    }
}

fn push_unique(out: &mut Vec<Observation>, seen: &mut BTreeSet<usize>, obs: impl IntoIterator<Item = Observation>) {
    for o in obs {
        if seen.insert(o.0) {
            out.push(o);
        }
    }
}

/// Minimal explanation of the verdict recorded in `trace`, as observations.
pub fn assemble_observations(trace: &Trace) -> Vec<Observation> {
    match trace {
        Trace::Simple { quantifier, value, stream } => explain_quantifier(*quantifier, *value, stream),
        Trace::Nested {
            outer,
            inner,
            value,
            n_groups,
            groups,
        } => {
            let inner_value = |g: &GroupTrace| g.value.unwrap_or(false);
            let per_group = |g: &GroupTrace| explain_quantifier(*inner, inner_value(g), g);
            let n = n_groups.or(Some(groups.len()));
            let chosen: Vec<&GroupTrace> = match witness_need(*outer, *value, n) {
                None => groups.iter().collect(),
                Some((pol, count)) => {
                    let it = groups.iter().filter(|g| inner_value(g) == pol);
                    match count {
                        Some(m) => it.take(m).collect(),
                        None => it.collect(),
                    }
                }
            };
            let mut out = Vec::new();
            let mut seen = BTreeSet::new();
            for g in chosen {
                push_unique(&mut out, &mut seen, per_group(g));
            }
            out
        }
        Trace::Ordinal {
            aggregate,
            target,
            groups,
        } => {
            let mut out = Vec::new();
            let mut seen = BTreeSet::new();
            let Some(t) = *target else {
                for g in groups {
                    push_unique(&mut out, &mut seen, g.observed.iter().copied());
                }
                return out;
            };
            let tg = &groups[t];
            let vt = aggregate_value(*aggregate, tg);
            for (j, g) in groups.iter().enumerate() {
                if j == t {
                    continue;
                }
                let vj = aggregate_value(*aggregate, g);
                let standing = if g.exhausted {
                    if crate::claims::cmp_real(vj, CmpOp::Eq, vt) {
                        Standing::Equal
                    } else if vj > vt {
                        Standing::Above
                    } else {
                        Standing::Below
                    }
                } else {
                    g.versus_target.unwrap_or(Standing::Equal)
                };
                let (lo_j, hi_j) = if g.exhausted { (vj, vj) } else { g.bounds.unwrap_or((vj, vj)) };
                match standing {
                    Standing::Below => {
                        push_unique(&mut out, &mut seen, pair_witness(*aggregate, tg, hi_j));
                        push_unique(&mut out, &mut seen, g.observed.iter().copied());
                    }
                    Standing::Above => {
                        let _ = lo_j;
                        push_unique(&mut out, &mut seen, tg.observed.iter().copied());
                        push_unique(&mut out, &mut seen, pair_witness(*aggregate, g, vt));
                    }
                    Standing::Equal => {
                        push_unique(&mut out, &mut seen, tg.observed.iter().copied());
                        push_unique(&mut out, &mut seen, g.observed.iter().copied());
                    }
                }
            }
            if groups.len() == 1 {
                // a lone group holds rank 1 without needing any fact
            }
            out
        }
    }
}

/// Token set for a verdict, tagged with the formula identifier.
pub fn assemble(trace: &Trace, formula_id: &str) -> Vec<ProvToken> {
    assemble_observations(trace)
        .into_iter()
        .map(|(row_id, v)| ProvToken {
            row_id,
            formula_id: formula_id.to_string(),
            polarity: Polarity::of(v),
        })
        .collect()
}

pub const BRUTE_MAX_ROWS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProvError {
    #[error("brute-force provenance limited to {BRUTE_MAX_ROWS} tuples, got {0}")]
    TooLarge(usize),
    #[error("ordinal instance has no target group")]
    NoTarget,
    #[error("duplicate row id {0}")]
    DuplicateRow(usize),
}

/// A monomial as bit sets over instance positions: `(positive, negative)`.
type Mono = (u32, u32);

/// Polynomial over dual indeterminates `p_t`, `p̄_t`; monomials are sets
/// (idempotent product) and any monomial containing both `p_t` and `p̄_t`
/// is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvPolynomial {
    rows: Vec<usize>,
    monomials: BTreeSet<Mono>,
}

impl ProvPolynomial {
    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// Monomials as sorted `(row_id, polarity)` lists.
    pub fn monomials(&self) -> Vec<Vec<(usize, Polarity)>> {
        self.monomials
            .iter()
            .map(|&(p, n)| {
                let mut m: Vec<(usize, Polarity)> = Vec::new();
                for (i, &r) in self.rows.iter().enumerate() {
                    if p >> i & 1 == 1 {
                        m.push((r, Polarity::Pos));
                    }
                    if n >> i & 1 == 1 {
                        m.push((r, Polarity::Neg));
                    }
                }
                m.sort();
                m
            })
            .collect()
    }

    fn mask_of(&self, tokens: &[(usize, Polarity)]) -> Option<Mono> {
        let mut m = (0u32, 0u32);
        for &(row, pol) in tokens {
            let i = self.rows.iter().position(|&r| r == row)?;
            let bit = 1u32 << i;
            let slot = if pol.is_pos() { &mut m.0 } else { &mut m.1 };
            if *slot & bit != 0 {
                return None;
            }
            *slot |= bit;
        }
        Some(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Poly(BTreeSet<Mono>);

impl Poly {
    fn zero() -> Self {
        Poly(BTreeSet::new())
    }

    fn one() -> Self {
        Poly([(0, 0)].into_iter().collect())
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn add(&mut self, other: &Poly) {
        self.0.extend(other.0.iter().copied());
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = BTreeSet::new();
        for &(ap, an) in &self.0 {
            for &(bp, bn) in &other.0 {
                let (p, n) = (ap | bp, an | bn);
                if p & n == 0 {
                    out.insert((p, n));
                }
            }
        }
        Poly(out)
    }
}

/// `(π(ψ), π(¬ψ))` for one quantified item.
type Item = (Poly, Poly);

fn holds_at(q: Quantifier, m: usize, n: usize) -> bool {
    q.holds(m, n)
}

fn quant_poly(q: Quantifier, items: &[Item]) -> Poly {
    let n = items.len();
    match q {
        Quantifier::Exists => {
            let mut out = Poly::zero();
            for it in items {
                out.add(&it.0);
            }
            out
        }
        Quantifier::Forall => items.iter().fold(Poly::one(), |acc, it| acc.mul(&it.0)),
        Quantifier::Cardinal(c) | Quantifier::Proportional(c) if matches!(c.op, CmpOp::Ge | CmpOp::Gt) => {
            let Some(m) = (0..=n).find(|&m| holds_at(q, m, n)) else {
                return Poly::zero();
            };
            let live: Vec<&Poly> = items.iter().map(|it| &it.0).filter(|p| !p.is_zero()).collect();
            let mut out = Poly::zero();
            subsets_of_size(&live, m, 0, Poly::one(), &mut out);
            out
        }
        _ => {
            let mut out = Poly::zero();
            exact_subsets(q, items, 0, 0, Poly::one(), &mut out);
            out
        }
    }
}

fn subsets_of_size(live: &[&Poly], m: usize, from: usize, acc: Poly, out: &mut Poly) {
    if m == 0 {
        out.add(&acc);
        return;
    }
    for i in from..live.len() {
        if live.len() - i < m {
            break;
        }
        let next = acc.mul(live[i]);
        if !next.is_zero() {
            subsets_of_size(live, m - 1, i + 1, next, out);
        }
    }
}

/// Sum over subsets `W` with `q.holds(|W|)` of `Π_W π(ψ) · Π_rest π(¬ψ)`.
fn exact_subsets(q: Quantifier, items: &[Item], i: usize, chosen: usize, acc: Poly, out: &mut Poly) {
    if i == items.len() {
        if holds_at(q, chosen, items.len()) {
            out.add(&acc);
        }
        return;
    }
    let (pos, neg) = &items[i];
    if !pos.is_zero() {
        let next = acc.mul(pos);
        if !next.is_zero() {
            exact_subsets(q, items, i + 1, chosen + 1, next, out);
        }
    }
    if !neg.is_zero() {
        let next = acc.mul(neg);
        if !next.is_zero() {
            exact_subsets(q, items, i + 1, chosen, next, out);
        }
    }
}

/// Polynomial of `¬Q ψ` in negation normal form.
fn neg_quant_poly(q: Quantifier, items: &[Item]) -> Poly {
    let swapped: Vec<Item> = items.iter().map(|(p, n)| (n.clone(), p.clone())).collect();
    match q {
        Quantifier::Exists => quant_poly(Quantifier::Forall, &swapped),
        Quantifier::Forall => quant_poly(Quantifier::Exists, &swapped),
        Quantifier::Cardinal(c) => quant_poly(Quantifier::Cardinal(Comparison::new(c.op.negate(), c.threshold)), items),
        Quantifier::Proportional(_) if items.is_empty() => Poly::one(),
        Quantifier::Proportional(c) => {
            quant_poly(Quantifier::Proportional(Comparison::new(c.op.negate(), c.threshold)), items)
        }
    }
}

/// One tuple of a brute-force instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteRow {
    pub row_id: usize,
    /// Group index (ignored for simple claims).
    pub group: usize,
    pub value: bool,
}

fn tuple_items(rows: &[BruteRow], pos_of: &dyn Fn(usize) -> usize) -> Vec<Item> {
    rows.iter()
        .map(|r| {
            let bit = 1u32 << pos_of(r.row_id);
            if r.value {
                (Poly([(bit, 0)].into_iter().collect()), Poly::zero())
            } else {
                (Poly::zero(), Poly([(0, bit)].into_iter().collect()))
            }
        })
        .collect()
}

fn groups_of(rows: &[BruteRow]) -> Vec<Vec<BruteRow>> {
    let ids: BTreeSet<usize> = rows.iter().map(|r| r.group).collect();
    ids.into_iter()
        .map(|g| rows.iter().filter(|r| r.group == g).copied().collect())
        .collect()
}

fn group_value(agg: GroupAggregate, rows: &[BruteRow]) -> f64 {
    let pos = rows.iter().filter(|r| r.value).count() as f64;
    match agg {
        GroupAggregate::Count => pos,
        GroupAggregate::Proportion if rows.is_empty() => 0.0,
        GroupAggregate::Proportion => pos / rows.len() as f64,
    }
}

/// Truth of the claim on a full instance (ground truth for the grid).
pub fn brute_truth(structure: &ClaimStructure, rows: &[BruteRow], target_group: Option<usize>) -> bool {
    match structure {
        ClaimStructure::Simple(q) => q.holds(rows.iter().filter(|r| r.value).count(), rows.len()),
        ClaimStructure::Nested { outer, inner, .. } => {
            let groups = groups_of(rows);
            let sat = groups
                .iter()
                .filter(|g| inner.holds(g.iter().filter(|r| r.value).count(), g.len()))
                .count();
            outer.holds(sat, groups.len())
        }
        ClaimStructure::Ordinal {
            aggregate,
            rank,
            descending,
            ..
        } => {
            let Some(t) = target_group else { return false };
            let groups = groups_of(rows);
            let Some(ti) = groups.iter().position(|g| g[0].group == t) else {
                return false;
            };
            let vals: Vec<f64> = groups.iter().map(|g| group_value(*aggregate, g)).collect();
            crate::engine::dense_rank(&vals, *descending)[ti] == *rank
        }
    }
}

/// Exact polynomial of the claim (`negate = false`) or of its negation.
/// Ordinal claims yield the product of the pairwise comparison polynomials
/// whatever the truth value, so `negate` is ignored for them.
pub fn brute_polynomial(
    structure: &ClaimStructure,
    rows: &[BruteRow],
    target_group: Option<usize>,
    negate: bool,
) -> Result<ProvPolynomial, ProvError> {
    if rows.len() > BRUTE_MAX_ROWS {
        return Err(ProvError::TooLarge(rows.len()));
    }
    let ids: Vec<usize> = rows.iter().map(|r| r.row_id).collect();
    if let Some(d) = ids.iter().enumerate().find_map(|(i, r)| ids[..i].contains(r).then_some(*r)) {
        return Err(ProvError::DuplicateRow(d));
    }
    let pos_of = |row: usize| ids.iter().position(|&r| r == row).unwrap();
    let poly = match structure {
        ClaimStructure::Simple(q) => {
            let items = tuple_items(rows, &pos_of);
            if negate {
                neg_quant_poly(*q, &items)
            } else {
                quant_poly(*q, &items)
            }
        }
        ClaimStructure::Nested { outer, inner, .. } => {
            let items: Vec<Item> = groups_of(rows)
                .iter()
                .map(|g| {
                    let t = tuple_items(g, &pos_of);
                    (quant_poly(*inner, &t), neg_quant_poly(*inner, &t))
                })
                .collect();
            if negate {
                neg_quant_poly(*outer, &items)
            } else {
                quant_poly(*outer, &items)
            }
        }
        ClaimStructure::Ordinal { aggregate, .. } => {
            let t = target_group.ok_or(ProvError::NoTarget)?;
            let groups = groups_of(rows);
            let ti = groups.iter().position(|g| g[0].group == t).ok_or(ProvError::NoTarget)?;
            let tg = &groups[ti];
            let vt = group_value(*aggregate, tg);
            let wrap = |c: Comparison| match aggregate {
                GroupAggregate::Count => Quantifier::Cardinal(c),
                GroupAggregate::Proportion => Quantifier::Proportional(c),
            };
            let mut acc = Poly::one();
            for (j, g) in groups.iter().enumerate() {
                if j == ti {
                    continue;
                }
                let vj = group_value(*aggregate, g);
                let (qt, qj) = if crate::claims::cmp_real(vt, CmpOp::Eq, vj) {
                    (wrap(Comparison::new(CmpOp::Eq, vt)), wrap(Comparison::new(CmpOp::Eq, vt)))
                } else if vt > vj {
                    (wrap(Comparison::new(CmpOp::Gt, vj)), wrap(Comparison::new(CmpOp::Lt, vt)))
                } else {
                    (wrap(Comparison::new(CmpOp::Lt, vj)), wrap(Comparison::new(CmpOp::Gt, vt)))
                };
                let pair = quant_poly(qt, &tuple_items(tg, &pos_of)).mul(&quant_poly(qj, &tuple_items(g, &pos_of)));
                acc = acc.mul(&pair);
            }
            acc
        }
    };
    Ok(ProvPolynomial {
        rows: ids,
        monomials: poly.0,
    })
}

/// Polynomial of whichever of the claim or its negation holds.
pub fn explanation_polynomial(
    structure: &ClaimStructure,
    rows: &[BruteRow],
    target_group: Option<usize>,
) -> Result<(bool, ProvPolynomial), ProvError> {
    let truth = brute_truth(structure, rows, target_group);
    Ok((truth, brute_polynomial(structure, rows, target_group, !truth)?))
}

/// How much of the relation the verdict's execution looked at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplingContext {
    Full,
    /// Row ids of the processed tuples.
    Processed(BTreeSet<usize>),
}

/// Passes iff the tokens form a monomial of `poly` (full scan) or the
/// restriction of one to the processed rows (truncated scan).
pub fn check_minimal(tokens: &[(usize, Polarity)], poly: &ProvPolynomial, ctx: &SamplingContext) -> bool {
    let Some(mask) = poly.mask_of(tokens) else {
        return false;
    };
    match ctx {
        SamplingContext::Full => poly.monomials.contains(&mask),
        SamplingContext::Processed(rows) => {
            let mut s = 0u32;
            for (i, r) in poly.rows.iter().enumerate() {
                if rows.contains(r) {
                    s |= 1 << i;
                }
            }
            if (mask.0 | mask.1) & !s != 0 {
                return false;
            }
            poly.monomials.iter().any(|&(p, n)| (p & s, n & s) == mask)
        }
    }
}

pub fn token_pairs(tokens: &[ProvToken]) -> Vec<(usize, Polarity)> {
    tokens.iter().map(|t| (t.row_id, t.polarity)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(vals: &[bool]) -> Vec<BruteRow> {
        vals.iter()
            .enumerate()
            .map(|(i, &value)| BruteRow {
                row_id: i + 1,
                group: 0,
                value,
            })
            .collect()
    }

    fn simple(q: Quantifier) -> ClaimStructure {
        ClaimStructure::Simple(q)
    }

    #[test]
    fn brute_examples() {
        let r = rows(&[true, false]);
        let p = brute_polynomial(&simple(Quantifier::Exists), &r, None, false).unwrap();
        assert_eq!(p.monomials(), vec![vec![(1, Polarity::Pos)]]);
        let p = brute_polynomial(&simple(Quantifier::Forall), &r, None, false).unwrap();
        assert!(p.is_zero());
        let p = brute_polynomial(&simple(Quantifier::Forall), &r, None, true).unwrap();
        assert_eq!(p.monomials(), vec![vec![(2, Polarity::Neg)]]);

        let r = rows(&[true, true, false]);
        let eq2 = simple(Quantifier::Cardinal(Comparison::new(CmpOp::Eq, 2.0)));
        let p = brute_polynomial(&eq2, &r, None, false).unwrap();
        assert_eq!(
            p.monomials(),
            vec![vec![(1, Polarity::Pos), (2, Polarity::Pos), (3, Polarity::Neg)]]
        );
    }

    #[test]
    fn minimality_examples() {
        let mut vals = vec![false; 10];
        vals[6] = true;
        vals[8] = true;
        let r = rows(&vals);
        let p = brute_polynomial(&simple(Quantifier::Exists), &r, None, false).unwrap();
        assert!(check_minimal(&[(7, Polarity::Pos)], &p, &SamplingContext::Full));
        assert!(!check_minimal(&[(7, Polarity::Pos), (9, Polarity::Pos)], &p, &SamplingContext::Full));

        let r = rows(&[true; 6]);
        let p = brute_polynomial(&simple(Quantifier::Forall), &r, None, false).unwrap();
        let sample: BTreeSet<usize> = [2, 4, 5].into_iter().collect();
        let toks: Vec<_> = sample.iter().map(|&r| (r, Polarity::Pos)).collect();
        assert!(check_minimal(&toks, &p, &SamplingContext::Processed(sample.clone())));
        assert!(!check_minimal(&toks[..2], &p, &SamplingContext::Processed(sample)));
    }

    #[test]
    fn assembly_examples() {
        let stream = |obs: Vec<Observation>| GroupTrace {
            observed: obs,
            exhausted: true,
            ..Default::default()
        };
        let toks = assemble(
            &Trace::Simple {
                quantifier: Quantifier::Exists,
                value: true,
                stream: stream(vec![(3, false), (7, true)]),
            },
            "phi",
        );
        assert_eq!(
            toks,
            vec![ProvToken {
                row_id: 7,
                formula_id: "phi".into(),
                polarity: Polarity::Pos
            }]
        );
        let ge2 = Quantifier::Cardinal(Comparison::new(CmpOp::Ge, 2.0));
        let obs = assemble_observations(&Trace::Simple {
            quantifier: ge2,
            value: true,
            stream: stream(vec![(1, false), (3, true), (5, false), (9, true), (11, true)]),
        });
        assert_eq!(obs, vec![(3, true), (9, true)]);
        let obs = assemble_observations(&Trace::Simple {
            quantifier: Quantifier::Forall,
            value: false,
            stream: stream(vec![(1, true), (4, false), (5, false)]),
        });
        assert_eq!(obs, vec![(4, false)]);
    }

    #[test]
    fn ordinal_pairwise_product() {
        // target group 0: 2 of 3 positive; group 1: 1 of 3
        let mut r = Vec::new();
        for (i, v) in [true, true, false, true, false, false].into_iter().enumerate() {
            r.push(BruteRow {
                row_id: i,
                group: i / 3,
                value: v,
            });
        }
        let s = ClaimStructure::Ordinal {
            group_keys: vec!["g".into()],
            aggregate: GroupAggregate::Count,
            target: vec![],
            rank: 1,
            descending: true,
        };
        assert!(brute_truth(&s, &r, Some(0)));
        let p = brute_polynomial(&s, &r, Some(0), false).unwrap();
        // target needs > 1 positives (both), other group all tokens
        assert_eq!(p.len(), 1);
        assert_eq!(p.monomials()[0].len(), 5);
    }

    #[test]
    fn size_bound() {
        let r = rows(&[true; 17]);
        assert_eq!(
            brute_polynomial(&simple(Quantifier::Exists), &r, None, false),
            Err(ProvError::TooLarge(17))
        );
    }
}
