//! Data model, dataset ingestion, sentence segmentation and embeddings.
//!
//! A [`Relation`] is built once by [`ingest`] and is immutable afterwards:
//! every row carries its sentence segmentation plus unit-norm sentence and
//! document embeddings so query-time similarity work never re-embeds text.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hasher;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default dimension of the feature-hash embedder.
pub const DEFAULT_EMBED_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: embedder failed for row {row_id}: {source}")]
    Embed {
        line: usize,
        row_id: usize,
        #[source]
        source: EmbedError,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid schema declaration: {0}")]
    SchemaDecl(String),
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct EmbedError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Text,
    Int,
    Real,
    Bool,
    Categorical,
}

impl AttrType {
    pub fn name(self) -> &'static str {
        match self {
            AttrType::Text => "text",
            AttrType::Int => "int",
            AttrType::Real => "real",
            AttrType::Bool => "bool",
            AttrType::Categorical => "categorical",
        }
    }
}

/// A single attribute value. Categorical values compare by exact string
/// equality; text values may be empty but never null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Text(String),
    Int(i64),
    Real(f64),
    Bool(bool),
    Categorical(String),
}

impl AttrValue {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Int(i) => Some(*i as f64),
            AttrValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) | AttrValue::Categorical(s) => Some(s),
            _ => None,
        }
    }

    /// Rendering used for prompt placeholder substitution and group keys.
    pub fn render(&self) -> String {
        match self {
            AttrValue::Text(s) | AttrValue::Categorical(s) => s.clone(),
            AttrValue::Int(i) => i.to_string(),
            AttrValue::Real(r) => r.to_string(),
            AttrValue::Bool(b) => b.to_string(),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttrType,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub attrs: Vec<AttrDecl>,
}

impl Schema {
    pub fn new(attrs: Vec<AttrDecl>) -> Self {
        Self { attrs }
    }

    /// Parses a schema declaration file: a JSON array of
    /// `{"name", "type", "description"}` objects.
    pub fn from_json(src: &str) -> Result<Self, RelationError> {
        let schema: Schema =
            serde_json::from_str(src).map_err(|e| RelationError::SchemaDecl(e.to_string()))?;
        let mut seen = std::collections::HashSet::new();
        for a in &schema.attrs {
            if !seen.insert(a.name.as_str()) {
                return Err(RelationError::SchemaDecl(format!(
                    "duplicate attribute `{}`",
                    a.name
                )));
            }
        }
        Ok(schema)
    }

    pub fn get(&self, name: &str) -> Option<&AttrDecl> {
        self.attrs.iter().find(|a| a.name == name)
    }

    pub fn type_of(&self, name: &str) -> Option<AttrType> {
        self.get(name).map(|a| a.ty)
    }

    pub fn text_attrs(&self) -> impl Iterator<Item = &AttrDecl> {
        self.attrs.iter().filter(|a| a.ty == AttrType::Text)
    }

    /// Human-readable listing fed to claim compilation.
    pub fn describe(&self) -> String {
        self.attrs
            .iter()
            .map(|a| format!("- {} ({}): {}", a.name, a.ty.name(), a.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    /// Text attribute the sentence was segmented from.
    pub attr: String,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleRow {
    pub row_id: usize,
    pub attrs: BTreeMap<String, AttrValue>,
    pub sentences: Vec<Sentence>,
    /// One document embedding per text attribute.
    pub doc_embeddings: BTreeMap<String, Vec<f64>>,
}

impl TupleRow {
    pub fn get(&self, attr: &str) -> Option<&AttrValue> {
        self.attrs.get(attr)
    }

    pub fn doc_embedding(&self, attr: &str) -> Option<&[f64]> {
        self.doc_embeddings.get(attr).map(Vec::as_slice)
    }

    /// Concatenated text of every text attribute, used for keyword signals
    /// when no specific attribute is traced.
    pub fn text_of(&self, attr: &str) -> &str {
        self.attrs.get(attr).and_then(AttrValue::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub schema: Schema,
    pub rows: Vec<TupleRow>,
}

impl Relation {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, row_id: usize) -> &TupleRow {
        &self.rows[row_id]
    }
}

/// Text embedding model. Implementations must be deterministic for the
/// relation to be reproducible.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Token-count feature hashing: each lower-cased word is hashed into one of
/// `dim` buckets, counts are L2-normalized.
#[derive(Debug, Clone)]
pub struct FeatureHashEmbedder {
    dim: usize,
}

impl FeatureHashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for FeatureHashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBED_DIM)
    }
}

impl Embedder for FeatureHashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        let mut any = false;
        for tok in tokenize_words(text) {
            let mut h = fnv::FnvHasher::default();
            h.write(tok.as_bytes());
            v[(h.finish() % self.dim as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            // no words: fixed unit vector keeps the norm invariant
            v[0] = 1.0;
            return Ok(v);
        }
        normalize(&mut v);
        Ok(v)
    }
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0)
}

/// Lower-cased alphanumeric word tokens (apostrophes kept inside words).
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || (ch == '\'' && !cur.is_empty()) {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur).trim_end_matches('\'').to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur.trim_end_matches('\'').to_string());
    }
    out
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of input.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0;
    for (i, &(pos, ch)) in chars.iter().enumerate() {
        if matches!(ch, '.' | '!' | '?') {
            let at_boundary = chars.get(i + 1).is_none_or(|(_, next)| next.is_whitespace());
            if at_boundary {
                let end = pos + ch.len_utf8();
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

fn parse_value(
    raw: &serde_json::Value,
    decl: &AttrDecl,
    line: usize,
) -> Result<AttrValue, RelationError> {
    use serde_json::Value as J;
    let bad = || RelationError::Schema {
        line,
        message: format!(
            "attribute `{}` expects {} but got {}",
            decl.name,
            decl.ty.name(),
            raw
        ),
    };
    Ok(match (decl.ty, raw) {
        (AttrType::Text, J::String(s)) => AttrValue::Text(s.clone()),
        (AttrType::Categorical, J::String(s)) => AttrValue::Categorical(s.clone()),
        (AttrType::Categorical, J::Number(n)) => AttrValue::Categorical(n.to_string()),
        (AttrType::Int, J::Number(n)) => AttrValue::Int(n.as_i64().ok_or_else(bad)?),
        (AttrType::Real, J::Number(n)) => AttrValue::Real(n.as_f64().ok_or_else(bad)?),
        (AttrType::Bool, J::Bool(b)) => AttrValue::Bool(*b),
        _ => return Err(bad()),
    })
}

/// Ingests a line-delimited JSON record stream. Row ids are assigned
/// `0..n` in input order; blank lines are skipped.
pub fn ingest(
    name: &str,
    source: impl BufRead,
    schema: &Schema,
    embedder: &dyn Embedder,
) -> Result<Relation, RelationError> {
    let mut rows = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line)
            .map_err(|e| RelationError::Schema {
                line: line_no,
                message: format!("malformed record: {e}"),
            })?;
        if let Some(extra) = record.keys().find(|k| schema.get(k).is_none()) {
            return Err(RelationError::Schema {
                line: line_no,
                message: format!("undeclared attribute `{extra}`"),
            });
        }
        let row_id = rows.len();
        let mut attrs = BTreeMap::new();
        let mut sentences = Vec::new();
        let mut doc_embeddings = BTreeMap::new();
        for decl in &schema.attrs {
            let raw = record.get(&decl.name).ok_or_else(|| RelationError::Schema {
                line: line_no,
                message: format!("missing attribute `{}`", decl.name),
            })?;
            let value = parse_value(raw, decl, line_no)?;
            if let AttrValue::Text(text) = &value {
                let embed = |t: &str| {
                    embedder.embed(t).map_err(|source| RelationError::Embed {
                        line: line_no,
                        row_id,
                        source,
                    })
                };
                for s in segment_sentences(text) {
                    let embedding = embed(&s)?;
                    sentences.push(Sentence {
                        attr: decl.name.clone(),
                        text: s,
                        embedding,
                    });
                }
                doc_embeddings.insert(decl.name.clone(), embed(text)?);
            }
            attrs.insert(decl.name.clone(), value);
        }
        rows.push(TupleRow {
            row_id,
            attrs,
            sentences,
            doc_embeddings,
        });
    }
    Ok(Relation {
        name: name.to_string(),
        schema: schema.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            AttrDecl {
                name: "text".into(),
                ty: AttrType::Text,
                description: "review text".into(),
            },
            AttrDecl {
                name: "business_id".into(),
                ty: AttrType::Categorical,
                description: "location".into(),
            },
        ])
    }

    #[test]
    fn segments_on_terminators() {
        assert_eq!(
            segment_sentences("Great food. Bad service!"),
            vec!["Great food.", "Bad service!"]
        );
        assert_eq!(
            segment_sentences("no terminator here"),
            vec!["no terminator here"]
        );
        assert!(segment_sentences("").is_empty());
        assert_eq!(segment_sentences("Wow!! 3.5 stars? Yes"), vec!["Wow!!", "3.5 stars?", "Yes"]);
        assert!(segment_sentences("   ").is_empty());
    }

    #[test]
    fn ingest_assigns_ids_in_order() {
        let src = r#"{"text": "a. b.", "business_id": "A"}
{"text": "c", "business_id": "B"}
{"text": "", "business_id": "A"}
"#;
        let rel = ingest("r", src.as_bytes(), &schema(), &FeatureHashEmbedder::default()).unwrap();
        assert_eq!(rel.row_count(), 3);
        assert_eq!(rel.rows.iter().map(|r| r.row_id).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(rel.rows[0].sentences.len(), 2);
        assert!(rel.rows[2].sentences.is_empty());
        for row in &rel.rows {
            for s in &row.sentences {
                let n: f64 = s.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-6);
            }
            let d = row.doc_embedding("text").unwrap();
            assert!((d.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_stream_is_empty_relation() {
        let rel = ingest("r", "".as_bytes(), &schema(), &FeatureHashEmbedder::default()).unwrap();
        assert_eq!(rel.row_count(), 0);
    }

    #[test]
    fn missing_attribute_names_line() {
        let src = "{\"text\": \"ok\", \"business_id\": \"A\"}\n{\"business_id\": \"B\"}\n";
        let err = ingest("r", src.as_bytes(), &schema(), &FeatureHashEmbedder::default())
            .unwrap_err();
        match err {
            RelationError::Schema { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("text"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extra_and_mistyped_attributes_rejected() {
        let src = "{\"text\": \"ok\", \"business_id\": \"A\", \"x\": 1}\n";
        assert!(ingest("r", src.as_bytes(), &schema(), &FeatureHashEmbedder::default()).is_err());
        let src = "{\"text\": 5, \"business_id\": \"A\"}\n";
        assert!(ingest("r", src.as_bytes(), &schema(), &FeatureHashEmbedder::default()).is_err());
    }

    struct Failing;
    impl Embedder for Failing {
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, EmbedError> {
            Err(EmbedError("model offline".into()))
        }
    }

    #[test]
    fn embedder_failure_carries_row_context() {
        let src = "{\"text\": \"ok\", \"business_id\": \"A\"}\n";
        let err = ingest("r", src.as_bytes(), &schema(), &Failing).unwrap_err();
        assert!(matches!(err, RelationError::Embed { row_id: 0, line: 1, .. }));
    }

    #[test]
    fn ingest_is_reproducible() {
        let src = "{\"text\": \"Rude staff. Slow!\", \"business_id\": \"A\"}\n";
        let e = FeatureHashEmbedder::default();
        let a = serde_json::to_vec(&ingest("r", src.as_bytes(), &schema(), &e).unwrap()).unwrap();
        let b = serde_json::to_vec(&ingest("r", src.as_bytes(), &schema(), &e).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tokenizer_lowercases_words() {
        assert_eq!(tokenize_words("Service was RUDE, don't!"), ["service", "was", "rude", "don't"]);
    }

    #[test]
    fn schema_rejects_duplicates() {
        let src = r#"[{"name":"a","type":"int"},{"name":"a","type":"text"}]"#;
        assert!(Schema::from_json(src).is_err());
        let ok = Schema::from_json(r#"[{"name":"a","type":"int","description":"n"}]"#).unwrap();
        assert_eq!(ok.type_of("a"), Some(AttrType::Int));
    }
}
