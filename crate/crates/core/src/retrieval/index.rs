use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Document;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: usize,
    pub tf: u32,
}

/// Immutable index over a corpus.
///
/// Documents are kept sorted by `item_id`, so nothing downstream depends on
/// the order the corpus was supplied in.
#[derive(Debug, Clone)]
pub struct Index<S> {
    docs: Vec<Document<S>>,
    postings: HashMap<String, Vec<Posting>>,
    doc_len: Vec<usize>,
    avgdl: S,
    dim: usize,
    features: BTreeSet<String>,
}

impl<S: Scalar> Index<S> {
    pub fn build(mut corpus: Vec<Document<S>>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::data("corpus", "corpus is empty"));
        }
        corpus.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        let dim = corpus[0].embedding.len();
        let mut ids = HashSet::new();
        for d in &corpus {
            if !ids.insert(d.item_id.as_str()) {
                return Err(Error::data("corpus", format!("duplicate item_id {}", d.item_id)));
            }
            if d.embedding.len() != dim {
                return Err(Error::data(
                    "corpus",
                    format!(
                        "item {} has embedding dimension {}, expected {dim}",
                        d.item_id,
                        d.embedding.len()
                    ),
                ));
            }
            if d.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::data("corpus", format!("item {} has a non-finite embedding", d.item_id)));
            }
            if let Some((f, _)) = d.popularity.iter().find(|(_, v)| !(**v >= S::zero() && v.is_finite())) {
                return Err(Error::data(
                    "corpus",
                    format!("item {} has invalid popularity count {f}", d.item_id),
                ));
            }
        }

        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(corpus.len());
        let mut features = BTreeSet::new();
        for (doc, d) in corpus.iter().enumerate() {
            doc_len.push(d.tokens.len());
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in &d.tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, tf) in tf {
                postings
                    .entry(term.to_owned())
                    .or_default()
                    .push(Posting { doc, tf });
            }
            features.extend(d.popularity.keys().cloned());
        }
        let total: usize = doc_len.iter().sum();
        let avgdl = S::from_usize_lossy(total) / S::from_usize_lossy(corpus.len());
        Ok(Self {
            docs: corpus,
            postings,
            doc_len,
            avgdl,
            dim,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document<S>] {
        &self.docs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn avgdl(&self) -> S {
        self.avgdl
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.doc_len[doc]
    }

    pub fn features(&self) -> &BTreeSet<String> {
        &self.features
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.docs
            .binary_search_by(|d| d.item_id.as_str().cmp(item_id))
            .ok()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn postings_iter(&self) -> impl Iterator<Item = (&String, &Vec<Posting>)> {
        self.postings.iter()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn tf(&self, term: &str, doc: usize) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&doc, |p| p.doc)
            .map_or(0, |i| list[i].tf)
    }

    pub fn idf(&self, term: &str) -> S {
        let n = S::from_usize_lossy(self.docs.len());
        let df = S::from_usize_lossy(self.df(term));
        let half = S::from_f64_lossy(0.5);
        (S::one() + (n - df + half) / (df + half)).ln()
    }

    fn term_weight(&self, term: &str, tf: u32, doc: usize, params: Bm25Params) -> S {
        if tf == 0 {
            return S::zero();
        }
        let k1 = S::from_f64_lossy(params.k1);
        let b = S::from_f64_lossy(params.b);
        let tf = S::from_u32(tf).expect("u32 fits a float");
        let len = S::from_usize_lossy(self.doc_len[doc]);
        let norm = if self.avgdl > S::zero() {
            S::one() - b + b * len / self.avgdl
        } else {
            S::one()
        };
        self.idf(term) * tf * (k1 + S::one()) / (tf + k1 * norm)
    }

    /// BM25 of one document; repeated query terms count once per occurrence.
    pub fn bm25_score(&self, query_tokens: &[String], doc: usize, params: Bm25Params) -> S {
        query_tokens.iter().fold(S::zero(), |acc, term| {
            acc + self.term_weight(term, self.tf(term, doc), doc, params)
        })
    }

    /// BM25 for every document, accumulated through the postings lists.
    pub fn bm25_all(&self, query_tokens: &[String], params: Bm25Params) -> Vec<S> {
        let mut scores = vec![S::zero(); self.docs.len()];
        for term in query_tokens {
            for p in self.postings(term) {
                scores[p.doc] = scores[p.doc] + self.term_weight(term, p.tf, p.doc, params);
            }
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn doc(id: &str, tokens: &[&str]) -> Document<f64> {
        Document {
            item_id: id.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            embedding: vec![1.0, 0.0],
            popularity: BTreeMap::new(),
        }
    }

    #[test]
    fn document_frequency_counts() {
        let idx = Index::build(vec![doc("a", &["sofa", "red"]), doc("b", &["chair"])]).unwrap();
        assert_eq!(idx.df("sofa"), 1);
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.df("table"), 0);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Index::<f64>::build(vec![]).is_err());
    }

    #[test]
    fn mismatched_dimension_rejected() {
        let mut b = doc("b", &[]);
        b.embedding.push(2.0);
        assert!(Index::build(vec![doc("a", &[]), b]).is_err());
        assert!(Index::build(vec![doc("a", &[]), doc("a", &[])]).is_err());
    }

    #[test]
    fn single_match_scores_ln_two() {
        // N = 2, df = 1, tf = 1, len = avgdl
        let idx = Index::build(vec![doc("a", &["sofa"]), doc("b", &["lamp"])]).unwrap();
        let q = vec!["sofa".to_string()];
        let s = idx.bm25_score(&q, idx.position("a").unwrap(), Bm25Params::default());
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(idx.bm25_score(&q, idx.position("b").unwrap(), Bm25Params::default()), 0.0);
    }

    #[test]
    fn repeated_query_term_doubles() {
        let idx = Index::build(vec![doc("a", &["sofa", "bed"]), doc("b", &["lamp"])]).unwrap();
        let once = idx.bm25_score(&["sofa".into()], 0, Bm25Params::default());
        let twice = idx.bm25_score(&["sofa".into(), "sofa".into()], 0, Bm25Params::default());
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn postings_and_direct_scores_agree() {
        let idx = Index::build(vec![
            doc("a", &["x", "y", "x"]),
            doc("b", &["y"]),
            doc("c", &["z", "x", "w", "w"]),
        ])
        .unwrap();
        let q: Vec<String> = ["x", "w", "y", "x"].iter().map(|s| s.to_string()).collect();
        let all = idx.bm25_all(&q, Bm25Params::default());
        for (d, s) in all.iter().enumerate() {
            assert_eq!(*s, idx.bm25_score(&q, d, Bm25Params::default()));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let corpus = vec![
            Document::<f32> {
                item_id: "a".into(),
                tokens: vec!["sofa".into()],
                embedding: vec![1.0],
                popularity: BTreeMap::new(),
            },
            Document::<f32> {
                item_id: "b".into(),
                tokens: vec!["lamp".into()],
                embedding: vec![1.0],
                popularity: BTreeMap::new(),
            },
        ];
        let idx = Index::build(corpus).unwrap();
        let s = idx.bm25_score(&["sofa".into()], 0, Bm25Params::default());
        assert!((s - std::f32::consts::LN_2).abs() < 1e-6);
    }
}
