//! Relevance sorting by reciprocal rank fusion, and the sentence-level
//! similarity pre-filter.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::relation::{cosine, tokenize_words, EmbedError, Embedder, TupleRow};

pub const RRF_K: f64 = 60.0;
pub const DEFAULT_TAU: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub query: String,
    pub query_embedding: Vec<f64>,
    pub inclusion_keywords: Vec<String>,
    pub exclusion_keywords: Vec<String>,
}

impl SearchSpec {
    /// Lower-cases and deduplicates the keyword lists (first occurrence
    /// wins) and embeds the query.
    pub fn new(
        query: impl Into<String>,
        inclusion: impl IntoIterator<Item = String>,
        exclusion: impl IntoIterator<Item = String>,
        embedder: &dyn Embedder,
    ) -> Result<Self, EmbedError> {
        let query = query.into();
        let query_embedding = embedder.embed(&query)?;
        Ok(Self {
            query,
            query_embedding,
            inclusion_keywords: dedup_lower(inclusion),
            exclusion_keywords: dedup_lower(exclusion),
        })
    }
}

fn dedup_lower(words: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    words
        .into_iter()
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty() && seen.insert(w.clone()))
        .collect()
}

/// Number of distinct keywords occurring in `text` as whole words
/// (case-insensitive). Multi-word keywords match as contiguous phrases.
pub fn keyword_hits(text: &str, keywords: &[String]) -> usize {
    if keywords.is_empty() {
        return 0;
    }
    let words = tokenize_words(text);
    let mut counted = BTreeSet::new();
    keywords
        .iter()
        .filter(|kw| {
            let kw_words = tokenize_words(kw);
            !kw_words.is_empty()
                && counted.insert(kw_words.clone())
                && words.windows(kw_words.len()).any(|w| w == kw_words.as_slice())
        })
        .count()
}

/// Fused score for a tuple holding 1-based `ranks` in each signal.
pub fn rrf_score(ranks: &[usize]) -> f64 {
    ranks.iter().map(|&r| 1.0 / (RRF_K + r as f64)).sum()
}

/// 1-based ranks by descending score, ties by ascending row id.
fn ranks_desc(scores: &[f64], ids: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Positions of `rows` in descending fused-relevance order. `attr` selects
/// the text attribute whose embedding and words are scored.
pub fn relevance_order(rows: &[&TupleRow], spec: &SearchSpec, attr: &str) -> Vec<usize> {
    let ids: Vec<usize> = rows.iter().map(|r| r.row_id).collect();
    let cos: Vec<f64> = rows
        .iter()
        .map(|r| r.doc_embedding(attr).map_or(-1.0, |e| cosine(e, &spec.query_embedding)))
        .collect();
    let incl: Vec<f64> = rows
        .iter()
        .map(|r| keyword_hits(r.text_of(attr), &spec.inclusion_keywords) as f64)
        .collect();
    let excl: Vec<f64> = rows
        .iter()
        .map(|r| {
            (spec.exclusion_keywords.len() - keyword_hits(r.text_of(attr), &spec.exclusion_keywords))
                as f64
        })
        .collect();
    let (r1, r2, r3) = (ranks_desc(&cos, &ids), ranks_desc(&incl, &ids), ranks_desc(&excl, &ids));
    let fused: Vec<f64> = (0..rows.len()).map(|i| rrf_score(&[r1[i], r2[i], r3[i]])).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| fused[b].total_cmp(&fused[a]).then(ids[a].cmp(&ids[b])));
    order
}

pub fn relevance_sort<'a>(rows: &[&'a TupleRow], spec: &SearchSpec, attr: &str) -> Vec<&'a TupleRow> {
    relevance_order(rows, spec, attr).into_iter().map(|i| rows[i]).collect()
}

/// Highest sentence-level cosine with the query, over sentences of `attr`
/// (all sentences when `attr` is `None`). `None` if there are no sentences.
pub fn max_sentence_similarity(row: &TupleRow, spec: &SearchSpec, attr: Option<&str>) -> Option<f64> {
    row.sentences
        .iter()
        .filter(|s| attr.is_none_or(|a| s.attr == a))
        .map(|s| cosine(&s.embedding, &spec.query_embedding))
        .reduce(f64::max)
}

/// Keep iff the best sentence similarity reaches `tau`; rows without
/// sentences are kept.
pub fn similarity_prefilter(row: &TupleRow, spec: &SearchSpec, tau: f64, attr: Option<&str>) -> bool {
    max_sentence_similarity(row, spec, attr).is_none_or(|s| s >= tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{ingest, AttrDecl, AttrType, FeatureHashEmbedder, Schema};

    fn kws(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn relation(texts: &[&str]) -> crate::relation::Relation {
        let schema = Schema::new(vec![AttrDecl {
            name: "text".into(),
            ty: AttrType::Text,
            description: "review".into(),
        }]);
        let src: String = texts
            .iter()
            .map(|t| serde_json::json!({ "text": t }).to_string() + "\n")
            .collect();
        ingest("r", src.as_bytes(), &schema, &FeatureHashEmbedder::default()).unwrap()
    }

    #[test]
    fn keyword_matching_is_whole_word() {
        assert_eq!(keyword_hits("Service was RUDE and slow", &kws(&["rude", "slow", "wait"])), 2);
        assert_eq!(keyword_hits("rudeness", &kws(&["rude"])), 0);
        assert_eq!(keyword_hits("anything", &[]), 0);
        assert_eq!(keyword_hits("rude rude", &kws(&["rude", "RUDE"])), 1);
        assert_eq!(keyword_hits("a long wait time", &kws(&["wait time"])), 1);
    }

    #[test]
    fn rrf_constant() {
        let s = rrf_score(&[1, 2, 3]);
        assert!((s - (1.0 / 61.0 + 1.0 / 62.0 + 1.0 / 63.0)).abs() < 1e-12);
        assert!((s - 0.048395).abs() < 1e-6);
    }

    #[test]
    fn witness_ranks_first_and_ties_keep_order() {
        let e = FeatureHashEmbedder::default();
        let rel = relation(&["lovely food", "same text", "same text", "staff rude and slow"]);
        let spec = SearchSpec::new("rude slow staff", kws(&["rude", "slow"]), kws(&["lovely"]), &e).unwrap();
        let rows: Vec<&TupleRow> = rel.rows.iter().collect();
        let sorted = relevance_sort(&rows, &spec, "text");
        assert_eq!(sorted[0].row_id, 3);
        let pos = |id| sorted.iter().position(|r| r.row_id == id).unwrap();
        assert!(pos(1) < pos(2));
        let mut ids: Vec<usize> = sorted.iter().map(|r| r.row_id).collect();
        ids.sort();
        assert_eq!(ids, [0, 1, 2, 3]);
    }

    #[test]
    fn prefilter_rules() {
        let e = FeatureHashEmbedder::default();
        let rel = relation(&["The staff was rude. Food ok.", "", "sunny beach holiday"]);
        let spec = SearchSpec::new("rude staff", vec![], vec![], &e).unwrap();
        assert!(similarity_prefilter(&rel.rows[0], &spec, DEFAULT_TAU, Some("text")));
        assert!(similarity_prefilter(&rel.rows[1], &spec, DEFAULT_TAU, Some("text")));
        assert!(!similarity_prefilter(&rel.rows[2], &spec, DEFAULT_TAU, Some("text")));
        assert!(similarity_prefilter(&rel.rows[2], &spec, -1.0, Some("text")));
    }

    #[test]
    fn spec_keywords_normalized() {
        let e = FeatureHashEmbedder::default();
        let spec = SearchSpec::new("q", kws(&["Rude", "rude", " slow "]), kws(&[]), &e).unwrap();
        assert_eq!(spec.inclusion_keywords, ["rude", "slow"]);
        let norm: f64 = spec.query_embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
