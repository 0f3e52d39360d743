//! Deterministic rule-table oracle for offline runs and tests.
//!
//! Prompt templates map to rules over the tuple's attribute values
//! (keyword and regex tables for booleans, lookup tables for the rest).
//! Free-form tasks (decomposition, reference resolution, compilation,
//! search specs) map inputs to canned outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    fused_key, placeholders, synthetic_tokens, OracleBackend, OracleError, OracleReply,
    OracleRequest, Question, RequestContext, Task,
};
use crate::relevance::keyword_hits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub any: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Rule {
    Bool {
        #[serde(default)]
        attr: Option<String>,
        /// True if any keyword is present (ignored when empty).
        #[serde(default)]
        any: Vec<String>,
        /// True only if every keyword is present.
        #[serde(default)]
        all: Vec<String>,
        #[serde(default)]
        regex: Option<String>,
        #[serde(default)]
        negate: bool,
        /// Words that signal the predicate does not hold; only used when
        /// deriving search specs.
        #[serde(default)]
        exclude_hints: Vec<String>,
    },
    Enum {
        #[serde(default)]
        attr: Option<String>,
        rules: Vec<LabelRule>,
        default: String,
    },
    Int {
        #[serde(default)]
        attr: Option<String>,
        #[serde(default)]
        table: BTreeMap<String, i64>,
        default: i64,
    },
    Real {
        #[serde(default)]
        attr: Option<String>,
        #[serde(default)]
        table: BTreeMap<String, f64>,
        default: f64,
    },
}

impl Rule {
    fn attr(&self) -> Option<&str> {
        match self {
            Rule::Bool { attr, .. }
            | Rule::Enum { attr, .. }
            | Rule::Int { attr, .. }
            | Rule::Real { attr, .. } => attr.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpecFixture {
    pub query: String,
    #[serde(default)]
    pub inclusion_keywords: Vec<String>,
    #[serde(default)]
    pub exclusion_keywords: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFixture {
    #[serde(default)]
    pub templates: BTreeMap<String, Rule>,
    /// Sentence → claims. Unlisted sentences decompose to themselves.
    #[serde(default)]
    pub decompose: BTreeMap<String, Vec<String>>,
    /// Claim → claim with references resolved. Unlisted claims pass through.
    #[serde(default)]
    pub resolve: BTreeMap<String, String>,
    /// Claim text → verification program (raw oracle output).
    #[serde(default)]
    pub compile: BTreeMap<String, String>,
    #[serde(default)]
    pub search_spec: BTreeMap<String, SearchSpecFixture>,
}

impl ScriptedFixture {
    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(src)
    }
}

pub struct ScriptedBackend {
    fixture: ScriptedFixture,
    regexes: HashMap<String, Regex>,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptedFixture) -> Result<Self, OracleError> {
        let mut regexes = HashMap::new();
        for (template, rule) in &fixture.templates {
            if let Rule::Bool { regex: Some(re), .. } = rule {
                let compiled = Regex::new(&format!("(?i){re}"))
                    .map_err(|e| OracleError::Backend(format!("bad regex for {template:?}: {e}")))?;
                regexes.insert(template.clone(), compiled);
            }
        }
        Ok(Self { fixture, regexes })
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }

    fn answer(
        &self,
        q: &Question,
        attrs: &BTreeMap<String, String>,
    ) -> Result<serde_json::Value, OracleError> {
        let rule = self
            .fixture
            .templates
            .get(&q.template)
            .ok_or_else(|| OracleError::UnknownTemplate(q.template.clone()))?;
        let attr = rule
            .attr()
            .map(str::to_string)
            .or_else(|| placeholders(&q.template).into_iter().next())
            .unwrap_or_else(|| "text".to_string());
        let text = attrs.get(&attr).map(String::as_str).unwrap_or("");
        Ok(match rule {
            Rule::Bool {
                any, all, negate, ..
            } => {
                let any_ok = any.is_empty() || keyword_hits(text, any) > 0;
                let all_ok = keyword_hits(text, all) == all.len();
                let re_ok = self.regexes.get(&q.template).is_none_or(|re| re.is_match(text));
                serde_json::Value::Bool((any_ok && all_ok && re_ok) != *negate)
            }
            Rule::Enum { rules, default, .. } => {
                let label = rules
                    .iter()
                    .find(|r| keyword_hits(text, &r.any) > 0)
                    .map_or(default, |r| &r.label);
                serde_json::Value::String(label.clone())
            }
            Rule::Int { table, default, .. } => {
                serde_json::Value::from(table.get(text).copied().unwrap_or(*default))
            }
            Rule::Real { table, default, .. } => {
                serde_json::Value::from(table.get(text).copied().unwrap_or(*default))
            }
        })
    }

    fn derived_search_spec(&self, input: &str) -> Option<SearchSpecFixture> {
        let mut include = BTreeSet::new();
        let mut exclude = BTreeSet::new();
        for (template, rule) in &self.fixture.templates {
            if !input.contains(template.as_str()) {
                continue;
            }
            if let Rule::Bool {
                any,
                all,
                exclude_hints,
                negate: false,
                ..
            } = rule
            {
                include.extend(any.iter().chain(all).cloned());
                exclude.extend(exclude_hints.iter().cloned());
            }
        }
        if include.is_empty() {
            return None;
        }
        let inclusion_keywords: Vec<String> = include.into_iter().collect();
        Some(SearchSpecFixture {
            query: inclusion_keywords.join(" "),
            inclusion_keywords,
            exclusion_keywords: exclude.into_iter().collect(),
        })
    }

    fn task(&self, task: Task, input: &str) -> String {
        let f = &self.fixture;
        match task {
            Task::Decompose => {
                let claims = f
                    .decompose
                    .get(input)
                    .cloned()
                    .unwrap_or_else(|| vec![input.to_string()]);
                serde_json::to_string(&claims).expect("strings serialize")
            }
            Task::Resolve => f.resolve.get(input).cloned().unwrap_or_else(|| input.to_string()),
            Task::Compile => f
                .compile
                .get(input)
                .cloned()
                .unwrap_or_else(|| "I am unable to write a query for this claim.".to_string()),
            Task::SearchSpec => f
                .search_spec
                .get(input)
                .cloned()
                .or_else(|| self.derived_search_spec(input))
                .map(|s| serde_json::to_string(&s).expect("spec serializes"))
                .unwrap_or_else(|| "No keywords come to mind.".to_string()),
        }
    }
}

impl OracleBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &OracleRequest) -> Result<OracleReply, OracleError> {
        let text = match &request.context {
            RequestContext::Tuple { questions, attrs } if questions.len() == 1 => {
                match self.answer(&questions[0], attrs)? {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                }
            }
            RequestContext::Tuple { questions, attrs } => {
                let mut obj = serde_json::Map::new();
                for (i, q) in questions.iter().enumerate() {
                    obj.insert(fused_key(i), self.answer(q, attrs)?);
                }
                serde_json::Value::Object(obj).to_string()
            }
            RequestContext::Task { task, input } => self.task(*task, input),
        };
        Ok(OracleReply {
            input_tokens: synthetic_tokens(&request.rendered_prompt),
            output_tokens: synthetic_tokens(&text),
            text,
        })
    }
}
