//! Claim intermediate representation and claim decomposition.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{OracleError, SemanticOracle, Task};
use crate::relation::{segment_sentences, AttrValue};

/// Relative tolerance under which two reals are treated as equal when a
/// count or proportion is compared against a threshold.
const CMP_REL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Ge, CmpOp::Gt, CmpOp::Le, CmpOp::Lt, CmpOp::Eq, CmpOp::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    /// The operator with its operands swapped (`a op b` ⇔ `b op.flip() a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Lt => CmpOp::Gt,
            other => other,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Compares two reals, treating values within a relative `1e-9` as equal.
/// Every count/proportion-versus-threshold decision in the crate goes
/// through this function so that all evaluation paths agree.
pub fn cmp_real(lhs: f64, op: CmpOp, rhs: f64) -> bool {
    let eq = (lhs - rhs).abs() <= CMP_REL_EPS * lhs.abs().max(rhs.abs()).max(1.0);
    match op {
        CmpOp::Eq => eq,
        CmpOp::Ne => !eq,
        CmpOp::Ge => eq || lhs > rhs,
        CmpOp::Gt => !eq && lhs > rhs,
        CmpOp::Le => eq || lhs < rhs,
        CmpOp::Lt => !eq && lhs < rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub op: CmpOp,
    pub threshold: f64,
}

impl Comparison {
    pub fn new(op: CmpOp, threshold: f64) -> Self {
        Self { op, threshold }
    }

    pub fn holds(&self, value: f64) -> bool {
        cmp_real(value, self.op, self.threshold)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Quantifier {
    Exists,
    Forall,
    /// Comparison over the number of satisfying tuples.
    Cardinal(Comparison),
    /// Comparison over the fraction of satisfying tuples.
    Proportional(Comparison),
}

impl Quantifier {
    /// Truth of the quantifier given `count` satisfying tuples out of `n`.
    /// Proportions over an empty input are false; `Forall` over an empty
    /// input is vacuously true.
    pub fn holds(&self, count: usize, n: usize) -> bool {
        match self {
            Quantifier::Exists => count >= 1,
            Quantifier::Forall => count == n,
            Quantifier::Cardinal(c) => c.holds(count as f64),
            Quantifier::Proportional(c) => n > 0 && c.holds(count as f64 / n as f64),
        }
    }

    pub fn is_proportional(&self) -> bool {
        matches!(self, Quantifier::Proportional(_))
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantifier::Exists => f.write_str("EXISTS"),
            Quantifier::Forall => f.write_str("FORALL"),
            Quantifier::Cardinal(c) => write!(f, "COUNT {c}"),
            Quantifier::Proportional(c) => write!(f, "PROPORTION {c}"),
        }
    }
}

/// Rewrites any quantifier into its cardinal form over `n` tuples.
/// The scaled threshold stays an exact real.
pub fn normalize(q: Quantifier, n: usize) -> Quantifier {
    match q {
        Quantifier::Exists => Quantifier::Cardinal(Comparison::new(CmpOp::Ge, 1.0)),
        Quantifier::Forall => Quantifier::Cardinal(Comparison::new(CmpOp::Eq, n as f64)),
        Quantifier::Proportional(c) => {
            Quantifier::Cardinal(Comparison::new(c.op, c.threshold * n as f64))
        }
        card @ Quantifier::Cardinal(_) => card,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupAggregate {
    Count,
    Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClaimStructure {
    Simple(Quantifier),
    Ordinal {
        group_keys: Vec<String>,
        aggregate: GroupAggregate,
        target: Vec<AttrValue>,
        rank: u32,
        descending: bool,
    },
    /// Depth-two nesting: `outer` over groups, `inner` over each group's tuples.
    Nested {
        outer: Quantifier,
        group_keys: Vec<String>,
        inner: Quantifier,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<ClaimStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounded: Option<bool>,
}

impl Claim {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Default::default()
        }
    }
}

/// Record of a claims file (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<ClaimStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounded: Option<bool>,
}

impl From<ClaimRecord> for Claim {
    fn from(r: ClaimRecord) -> Self {
        Claim {
            text: r.text,
            structure: r.structure,
            grounded: r.grounded,
            ..Default::default()
        }
    }
}

/// Threshold conventions for vague quantity words, handed to the compiler
/// prompt so the oracle maps them consistently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VagueHints {
    pub hints: BTreeMap<String, String>,
}

impl Default for VagueHints {
    fn default() -> Self {
        let hints = [
            ("some", "at least 1"),
            ("multiple", "at least 2"),
            ("a handful", "5"),
            ("common", "at least 10% of scope"),
            ("majority", "more than 50%"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self { hints }
    }
}

impl VagueHints {
    pub fn render(&self) -> String {
        self.hints
            .iter()
            .map(|(k, v)| format!("- \"{k}\" means {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("could not parse decomposition output: {raw}")]
    Unparseable { raw: String },
}

/// Splits an aggregate response into claims, one oracle call per sentence,
/// then resolves vague references in each claim with a second call that
/// sees the full response as context.
pub fn decompose(
    aggregate_response: &str,
    oracle: &SemanticOracle,
) -> Result<Vec<String>, DecomposeError> {
    let mut claims = Vec::new();
    for sentence in segment_sentences(aggregate_response) {
        let prompt = format!(
            "Break the following sentence into a list of atomic claims. \
             Respond with a JSON array of strings.\n\nSentence: {sentence}"
        );
        let raw = oracle.complete_task(Task::Decompose, &sentence, &prompt)?;
        let parts: Vec<String> = serde_json::from_str(raw.trim())
            .map_err(|_| DecomposeError::Unparseable { raw: raw.clone() })?;
        claims.extend(parts.into_iter().filter(|c| !c.trim().is_empty()));
    }
    let mut resolved = Vec::with_capacity(claims.len());
    for claim in claims {
        let prompt = format!(
            "Rewrite the claim so that it has no vague references (pronouns, unknown \
             entities, partial names), using the response as context. Respond with the \
             rewritten claim only.\n\nResponse: {aggregate_response}\n\nClaim: {claim}"
        );
        let raw = oracle.complete_task(Task::Resolve, &claim, &prompt)?;
        let text = raw.trim();
        if text.is_empty() {
            return Err(DecomposeError::Unparseable { raw });
        }
        resolved.push(text.to_string());
    }
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(Quantifier::Exists, 7),
            Quantifier::Cardinal(Comparison::new(CmpOp::Ge, 1.0))
        );
        assert_eq!(
            normalize(Quantifier::Forall, 7),
            Quantifier::Cardinal(Comparison::new(CmpOp::Eq, 7.0))
        );
        assert_eq!(
            normalize(Quantifier::Proportional(Comparison::new(CmpOp::Gt, 0.5)), 4),
            Quantifier::Cardinal(Comparison::new(CmpOp::Gt, 2.0))
        );
    }

    #[test]
    fn normalize_is_idempotent_on_cardinal() {
        let q = Quantifier::Cardinal(Comparison::new(CmpOp::Lt, 3.5));
        assert_eq!(normalize(q, 10), q);
        assert_eq!(normalize(normalize(q, 10), 10), q);
    }

    fn quantifier_grid(n: usize) -> Vec<Quantifier> {
        let mut qs = vec![Quantifier::Exists, Quantifier::Forall];
        for op in CmpOp::ALL {
            for k in 0..=n + 1 {
                qs.push(Quantifier::Cardinal(Comparison::new(op, k as f64)));
            }
            for p in [0.0, 0.1, 0.25, 0.3, 1.0 / 3.0, 0.5, 0.7, 0.75, 0.9, 1.0] {
                qs.push(Quantifier::Proportional(Comparison::new(op, p)));
            }
        }
        qs
    }

    // Exhaustive over all boolean columns for n <= 8; proportions over an
    // empty scope are false by convention, so n = 0 is checked only for
    // the non-proportional quantifiers.
    #[test]
    fn normalize_preserves_truth_exhaustively() {
        for n in 0..=8usize {
            for q in quantifier_grid(n) {
                if n == 0 && q.is_proportional() {
                    continue;
                }
                let nq = normalize(q, n);
                for mask in 0u32..(1 << n) {
                    let count = mask.count_ones() as usize;
                    assert_eq!(q.holds(count, n), nq.holds(count, n), "{q} n={n} mask={mask:b}");
                }
            }
        }
    }

    #[test]
    fn normalize_preserves_truth_by_count_up_to_twelve() {
        for n in 9..=12usize {
            for q in quantifier_grid(n) {
                let nq = normalize(q, n);
                for count in 0..=n {
                    assert_eq!(q.holds(count, n), nq.holds(count, n));
                }
            }
        }
    }

    #[test]
    fn cmp_real_tolerates_rounding() {
        assert!(cmp_real(3.0, CmpOp::Ge, 0.3 * 10.0));
        assert!(cmp_real(3.0, CmpOp::Eq, 0.3 * 10.0));
        assert!(!cmp_real(3.0, CmpOp::Gt, 2.0 + 1.0));
        assert!(cmp_real(3.0, CmpOp::Gt, 2.0));
        // count > 2.0 means at least 3
        assert!(!cmp_real(2.0, CmpOp::Gt, 2.0));
    }

    #[test]
    fn empty_scope_conventions() {
        assert!(Quantifier::Forall.holds(0, 0));
        assert!(!Quantifier::Exists.holds(0, 0));
        assert!(!Quantifier::Proportional(Comparison::new(CmpOp::Ge, 0.0)).holds(0, 0));
    }
}
