//! Semantic oracle: the LLM abstraction behind every prompt expression.
//!
//! [`SemanticOracle`] fronts a pluggable [`OracleBackend`] (scripted,
//! remote) with a persistent prompt cache, a cost ledger and an in-flight
//! bound. Requests carry both the exact rendered prompt (the cache key and
//! what a remote model sees) and a structured context that the scripted
//! backend evaluates directly.

pub mod cache;
pub mod ledger;
#[cfg(feature = "remote")]
pub mod remote;
pub mod scripted;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::relation::AttrValue;

pub use cache::{CacheEntry, CacheStats, PromptCache};
pub use ledger::{CostLedger, ModelRate, RateTable};
pub use scripted::{ScriptedBackend, ScriptedFixture};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReturnType {
    Bool,
    Int,
    Real,
    Enum(Vec<String>),
}

impl ReturnType {
    fn describe(&self) -> String {
        match self {
            ReturnType::Bool => "true or false".to_string(),
            ReturnType::Int => "an integer".to_string(),
            ReturnType::Real => "a number".to_string(),
            ReturnType::Enum(labels) => format!("one of: {}", labels.join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Decompose,
    Resolve,
    Compile,
    SearchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub template: String,
    pub return_type: ReturnType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RequestContext {
    /// One question (or several fused) about a single tuple.
    Tuple {
        questions: Vec<Question>,
        attrs: BTreeMap<String, String>,
    },
    Task { task: Task, input: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Single(ReturnType),
    Keyed(Vec<(String, ReturnType)>),
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub model: String,
    pub temperature: f64,
    pub rendered_prompt: String,
    pub context: RequestContext,
}

impl OracleRequest {
    pub fn expected(&self) -> Expected {
        match &self.context {
            RequestContext::Tuple { questions, .. } if questions.len() == 1 => {
                Expected::Single(questions[0].return_type.clone())
            }
            RequestContext::Tuple { questions, .. } => Expected::Keyed(
                questions
                    .iter()
                    .enumerate()
                    .map(|(i, q)| (fused_key(i), q.return_type.clone()))
                    .collect(),
            ),
            RequestContext::Task { .. } => Expected::Text,
        }
    }
}

pub fn fused_key(i: usize) -> String {
    format!("q{}", i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReply {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("could not parse oracle output as {expected}: {raw:?}")]
    Parse { raw: String, expected: String },
    #[error("prompt template not covered by the scripted fixture: {0:?}")]
    UnknownTemplate(String),
    #[error("backend error: {0}")]
    Backend(String),
}

/// A completion backend. Implementations must tolerate concurrent calls.
pub trait OracleBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &OracleRequest) -> Result<OracleReply, OracleError>;
}

/// Parsed, typed answer to one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    /// One value per question (a single value for unfused requests).
    pub values: Vec<AttrValue>,
    pub raw: String,
    pub cached: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Renders `{attr}` placeholders from the tuple's attribute values.
pub fn render_template(template: &str, attrs: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if attrs.contains_key(&after[..close]) => {
                out.push_str(&attrs[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Placeholder names referenced by a prompt template, in order.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        if let Some(close) = after.find('}') {
            let name = &after[..close];
            if !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                out.push(name.to_string());
            }
            rest = &after[close + 1..];
        } else {
            break;
        }
    }
    out
}

pub fn parse_typed(raw: &str, ty: &ReturnType) -> Option<AttrValue> {
    let t = raw.trim().trim_matches('"').trim_end_matches('.').trim();
    match ty {
        ReturnType::Bool => match t.to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(AttrValue::Bool(true)),
            "false" | "no" => Some(AttrValue::Bool(false)),
            _ => None,
        },
        ReturnType::Int => t.parse().ok().map(AttrValue::Int),
        ReturnType::Real => t
            .parse::<f64>()
            .ok()
            .filter(|r| r.is_finite())
            .map(AttrValue::Real),
        ReturnType::Enum(labels) => labels
            .iter()
            .find(|l| l.eq_ignore_ascii_case(t))
            .map(|l| AttrValue::Categorical(l.clone())),
    }
}

fn parse_json_value(v: &serde_json::Value, ty: &ReturnType) -> Option<AttrValue> {
    match (v, ty) {
        (serde_json::Value::Bool(b), ReturnType::Bool) => Some(AttrValue::Bool(*b)),
        (serde_json::Value::String(s), _) => parse_typed(s, ty),
        (serde_json::Value::Number(n), _) => parse_typed(&n.to_string(), ty),
        _ => None,
    }
}

pub fn parse_answer(raw: &str, expected: &Expected) -> Result<Vec<AttrValue>, OracleError> {
    let fail = |what: String| OracleError::Parse {
        raw: raw.to_string(),
        expected: what,
    };
    match expected {
        Expected::Single(ty) => parse_typed(raw, ty)
            .map(|v| vec![v])
            .ok_or_else(|| fail(ty.describe())),
        Expected::Text => Ok(vec![AttrValue::Text(raw.to_string())]),
        Expected::Keyed(keys) => {
            let what = || format!("JSON object with keys {:?}", keys.iter().map(|k| &k.0).collect::<Vec<_>>());
            let (start, end) = (raw.find('{'), raw.rfind('}'));
            let body = match (start, end) {
                (Some(s), Some(e)) if s < e => &raw[s..=e],
                _ => return Err(fail(what())),
            };
            let obj: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(body).map_err(|_| fail(what()))?;
            keys.iter()
                .map(|(k, ty)| {
                    obj.get(k)
                        .and_then(|v| parse_json_value(v, ty))
                        .ok_or_else(|| fail(what()))
                })
                .collect()
        }
    }
}

/// Counters over the lifetime of one [`SemanticOracle`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub requests: u64,
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

struct InFlight {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut cur = self.current.lock();
        while *cur >= self.max {
            self.freed.wait(&mut cur);
        }
        *cur += 1;
        self.peak.fetch_max(*cur, Ordering::SeqCst);
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.current.lock() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct SemanticOracle {
    backend: Arc<dyn OracleBackend>,
    model: String,
    temperature: f64,
    cache: Option<Arc<PromptCache>>,
    ledger: Mutex<CostLedger>,
    in_flight: InFlight,
    requests: AtomicU64,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl fmt::Debug for SemanticOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemanticOracle")
            .field("backend", &self.backend.name())
            .field("model", &self.model)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl SemanticOracle {
    pub fn new(backend: Arc<dyn OracleBackend>, model: impl Into<String>) -> Self {
        Self {
            backend,
            model: model.into(),
            temperature: 0.0,
            cache: None,
            ledger: Mutex::new(CostLedger::new(RateTable::default())),
            in_flight: InFlight {
                max: 32,
                current: Mutex::new(0),
                freed: Condvar::new(),
                peak: AtomicUsize::new(0),
            },
            requests: AtomicU64::new(0),
            backend_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: Arc<PromptCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_rates(self, rates: RateTable) -> Self {
        *self.ledger.lock() = CostLedger::new(rates);
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.in_flight.max = max.max(1);
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn cache(&self) -> Option<&Arc<PromptCache>> {
        self.cache.as_ref()
    }

    pub fn stats(&self) -> OracleStats {
        let ledger = self.ledger.lock();
        OracleStats {
            requests: self.requests.load(Ordering::SeqCst),
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            input_tokens: ledger.total_input_tokens(),
            output_tokens: ledger.total_output_tokens(),
        }
    }

    pub fn ledger(&self) -> CostLedger {
        self.ledger.lock().clone()
    }

    /// Highest number of simultaneous backend calls observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.in_flight.peak.load(Ordering::SeqCst)
    }

    pub fn tuple_request(
        &self,
        questions: Vec<Question>,
        attrs: BTreeMap<String, String>,
    ) -> OracleRequest {
        let rendered_prompt = if questions.len() == 1 {
            format!(
                "{}\n\nAnswer with {} only.",
                render_template(&questions[0].template, &attrs),
                questions[0].return_type.describe()
            )
        } else {
            let mut p = String::from("Answer every question about the same record.\n");
            for (i, q) in questions.iter().enumerate() {
                p.push_str(&format!(
                    "{}. {} (answer: {})\n",
                    i + 1,
                    render_template(&q.template, &attrs),
                    q.return_type.describe()
                ));
            }
            let keys: Vec<String> = (0..questions.len()).map(fused_key).collect();
            p.push_str(&format!(
                "Respond with a JSON object with keys {}.",
                keys.join(", ")
            ));
            p
        };
        OracleRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            rendered_prompt,
            context: RequestContext::Tuple { questions, attrs },
        }
    }

    pub fn task_request(&self, task: Task, input: &str, prompt: &str) -> OracleRequest {
        OracleRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            rendered_prompt: prompt.to_string(),
            context: RequestContext::Task {
                task,
                input: input.to_string(),
            },
        }
    }

    /// Runs a free-form task prompt and returns the raw text.
    pub fn complete_task(&self, task: Task, input: &str, prompt: &str) -> Result<String, OracleError> {
        let req = self.task_request(task, input, prompt);
        self.evaluate_one(&req).map(|a| a.raw)
    }

    pub fn evaluate_one(&self, req: &OracleRequest) -> Result<Answer, OracleError> {
        self.evaluate_batch(std::slice::from_ref(req)).remove(0)
    }

    /// Evaluates a batch: cache hits are answered directly, misses are
    /// dispatched (concurrently when the `parallel` feature is on, never
    /// more than the in-flight bound) and written back on successful parse.
    /// Results come back in request order.
    pub fn evaluate_batch(&self, reqs: &[OracleRequest]) -> Vec<Result<Answer, OracleError>> {
        self.requests.fetch_add(reqs.len() as u64, Ordering::SeqCst);
        let mut results: Vec<Option<Result<Answer, OracleError>>> = vec![None; reqs.len()];
        let mut misses = Vec::new();
        for (i, req) in reqs.iter().enumerate() {
            match self.lookup(req) {
                Some(ans) => {
                    self.cache_hits.fetch_add(1, Ordering::SeqCst);
                    results[i] = Some(Ok(ans));
                }
                None => misses.push(i),
            }
        }
        let dispatched = par::map_auto(&misses, |&i| (i, self.dispatch(&reqs[i])));
        for (i, r) in dispatched {
            results[i] = Some(r);
        }
        results.into_iter().map(|r| r.expect("every slot filled")).collect()
    }

    /// Bypasses the cache read (used to retry a malformed answer).
    pub fn evaluate_fresh(&self, req: &OracleRequest) -> Result<Answer, OracleError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        self.dispatch(req)
    }

    fn lookup(&self, req: &OracleRequest) -> Option<Answer> {
        let cache = self.cache.as_ref()?;
        let entry = cache.get(&req.model, req.temperature, &req.rendered_prompt)?;
        let values = parse_answer(&entry.response, &req.expected()).ok()?;
        Some(Answer {
            values,
            raw: entry.response,
            cached: true,
            input_tokens: entry.input_tokens,
            output_tokens: entry.output_tokens,
        })
    }

    fn dispatch(&self, req: &OracleRequest) -> Result<Answer, OracleError> {
        let reply = {
            let _slot = self.in_flight.acquire();
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            self.backend.complete(req)?
        };
        self.ledger
            .lock()
            .record(&req.model, reply.input_tokens, reply.output_tokens);
        let values = parse_answer(&reply.text, &req.expected())?;
        if let Some(cache) = &self.cache {
            cache.put(CacheEntry {
                model: req.model.clone(),
                temperature: req.temperature,
                prompt: req.rendered_prompt.clone(),
                response: reply.text.clone(),
                input_tokens: reply.input_tokens,
                output_tokens: reply.output_tokens,
            });
        }
        Ok(Answer {
            values,
            raw: reply.text,
            cached: false,
            input_tokens: reply.input_tokens,
            output_tokens: reply.output_tokens,
        })
    }
}

/// Synthetic token count: `ceil(chars / 4)`.
pub fn synthetic_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}
