//! Claim to verification-query compilation through the oracle.

use thiserror::Error;
use tracing::{debug, warn};

use super::{parse, PlanNode};
use crate::claims::{Claim, VagueHints};
use crate::oracle::{OracleError, SemanticOracle, Task};
use crate::relation::Schema;

pub const MAX_COMPILE_ATTEMPTS: usize = 3;

/// Reference documentation handed to the compiler model.
pub const DSL_DOCS: &str = r#"A verification query starts from `df` and chains operators with `.`:
  filter(predicate)                  keep tuples where predicate is true
  map(expr.alias("name"))            add a computed attribute
  aggregate([f(expr).alias("name"), ...], group_by=[col("key"), ...])
  with_rank(expr, descending=true)   dense rank over aggregated rows, column "rank"
  check(predicate)                   terminal verdict; must be last
A trailing `.collect()` is optional.

Expressions:
  col("attr")                        attribute reference
  "text", 3, 0.5, true               literals
  prompt("... {attr} ...", bool)     semantic predicate; return type bool, int, real or enum("A", "B")
  a > b, a >= b, a < b, a <= b       numeric comparisons
  a.eq(b), a.ne(b)                   equality
  (p and q), (p or q), not p         boolean logic

Aggregation functions: bool_or (exists), bool_and (for all), count_if (count of true),
proportion (fraction of true). Prompts may appear only inside filter and map.

Example, "all locations have multiple complaints about poor service quality":
df.map(
  prompt(
    "Identify whether the {text} is a complaint about "
    "poor service quality", bool
  ).alias("complains_about_service")
)
.aggregate([
  count_if(
    col("complains_about_service")
  ).alias("complaint_count")],
  group_by=[col("business_id")]
)
.aggregate([
  bool_and(
    col("complaint_count") >= 2
  ).alias("all_have_multiple_complaints")
])
.check(col("all_have_multiple_complaints"))
.collect()

Example, "the top-ranked location in terms of service is [A]":
df.filter(prompt("The {text} mentions the service at the restaurant"))
.map(prompt("Identify whether the {text} praises the service", bool).alias("praises_service"))
.aggregate([proportion(col("praises_service")).alias("service_praise_prop")],
  group_by=[col("business_id")])
.with_rank(col("service_praise_prop"))
.filter(col("business_id").eq("[A]"))
.check(col("rank").eq(1))
"#;

#[derive(Debug, Clone, PartialEq)]
pub struct CompileAttempt {
    pub program: String,
    pub error: String,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no valid query after {} attempts; last error: {}", attempts.len(), attempts.last().map_or("", |a| a.error.as_str()))]
    Exhausted { attempts: Vec<CompileAttempt> },
}

fn strip_fences(raw: &str) -> String {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t.to_string();
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().trim_end_matches("```").trim().to_string()
}

fn base_prompt(claim: &Claim, schema: &Schema, api_docs: &str, aggregation_prompt: Option<&str>) -> String {
    let mut p = String::new();
    p.push_str("Write a verification query that evaluates whether the claim holds over the relation `df`.\n");
    p.push_str("Respond with the query program only.\n\n");
    p.push_str("Query language:\n");
    p.push_str(api_docs);
    p.push_str("\nSchema:\n");
    p.push_str(&schema.describe());
    p.push_str("\n\nQuantity words:\n");
    p.push_str(&VagueHints::default().render());
    if let Some(agg) = aggregation_prompt {
        p.push_str("\n\nThe claim comes from a summary produced by this instruction: ");
        p.push_str(agg);
    }
    if let Some(scope) = &claim.scope {
        p.push_str("\n\nScope: ");
        p.push_str(scope);
    }
    p.push_str("\n\nClaim: ");
    p.push_str(&claim.text);
    p
}

/// Compiles with the built-in documentation and no aggregation prompt.
pub fn compile_claim(claim: &Claim, schema: &Schema, oracle: &SemanticOracle) -> Result<PlanNode, CompileError> {
    compile_claim_with(claim, schema, DSL_DOCS, None, oracle)
}

/// Asks the oracle for a program, re-prompting with the parse or type error
/// appended until one checks or the attempts run out.
pub fn compile_claim_with(
    claim: &Claim,
    schema: &Schema,
    api_docs: &str,
    aggregation_prompt: Option<&str>,
    oracle: &SemanticOracle,
) -> Result<PlanNode, CompileError> {
    let base = base_prompt(claim, schema, api_docs, aggregation_prompt);
    let mut attempts: Vec<CompileAttempt> = Vec::new();
    while attempts.len() < MAX_COMPILE_ATTEMPTS {
        let mut prompt = base.clone();
        for a in &attempts {
            prompt.push_str(&format!(
                "\n\nA previous answer was rejected.\nProgram:\n{}\nError: {}",
                a.program, a.error
            ));
        }
        let raw = oracle.complete_task(Task::Compile, &claim.text, &prompt)?;
        let program = strip_fences(&raw);
        match parse(&program, schema) {
            Ok(plan) => {
                debug!(attempt = attempts.len() + 1, "claim compiled");
                return Ok(plan);
            }
            Err(e) => {
                warn!(attempt = attempts.len() + 1, error = %e, "compiled program rejected");
                attempts.push(CompileAttempt {
                    program,
                    error: e.to_string(),
                });
            }
        }
    }
    Err(CompileError::Exhausted { attempts })
}
