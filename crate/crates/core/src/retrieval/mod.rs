//! In-memory retrieval engine whose ranking formula is shaped by a configuration.
//!
//! Every document is scored as a weighted blend of BM25, embedding cosine
//! similarity and log-damped popularity counts. A [`TransformSpec`] decides
//! how a sampled configuration sets those weights.

mod index;
mod search;
mod transform;

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use index::{Bm25Params, Index, Posting};
pub use search::{multi_search, search};
pub use transform::{Binding, TransformSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct Document<S> {
    pub item_id: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    pub embedding: Vec<S>,
    #[serde(default)]
    pub popularity: BTreeMap<String, S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct Query<S> {
    pub query_id: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<String>,
}

impl<S> Query<S> {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.embedding.is_none() && self.category_id.is_none()
    }
}

/// One scoring signal a request can weight.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Signal {
    Lexical,
    Dense,
    /// `ln(1 + count)` of the named popularity feature.
    Popularity(String),
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Lexical => f.write_str("lexical"),
            Signal::Dense => f.write_str("dense"),
            Signal::Popularity(name) => write!(f, "popularity.{name}"),
        }
    }
}

impl FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Signal::Lexical),
            "dense" => Ok(Signal::Dense),
            _ => match s.strip_prefix("popularity.") {
                Some(name) if !name.is_empty() => Ok(Signal::Popularity(name.to_owned())),
                _ => Err(format!(
                    "unknown signal `{s}` (expected lexical, dense or popularity.<feature>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for Signal {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Signal> for String {
    fn from(s: Signal) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Each signal rescaled to `[0, 1]` over the corpus before weighting.
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct QueryRequest<S> {
    pub query_id: String,
    pub weights: BTreeMap<Signal, S>,
    pub candidate_k: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub bm25: Bm25Params,
}

impl<S: Scalar> QueryRequest<S> {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_k < 1 {
            return Err(Error::config("transform.candidate_k", "must be at least 1"));
        }
        if self.weights.values().any(|w| !w.is_finite()) {
            return Err(Error::config("transform.weights", "weights must be finite"));
        }
        if self.weights.values().all(|w| w.is_zero()) {
            return Err(Error::config(
                "transform.weights",
                "at least one signal weight must be non-zero",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct RankedList<S> {
    pub query_id: String,
    /// `(item_id, score)`, descending by score, ties by ascending id.
    pub items: Vec<(String, S)>,
}

impl<S> RankedList<S> {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(id, _)| id.as_str())
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::data(path.display().to_string(), format!("line {}: {e}", n + 1))
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_names_round_trip() {
        for s in ["lexical", "dense", "popularity.views"] {
            assert_eq!(s.parse::<Signal>().unwrap().to_string(), s);
        }
        assert!("popularity.".parse::<Signal>().is_err());
        assert!("bm25".parse::<Signal>().is_err());
    }

    #[test]
    fn document_json_field_names() {
        let line = r#"{"item_id":"i1","tokens":["sofa"],"embedding":[0.5,1.0],"popularity":{"views":3.0}}"#;
        let doc: Document<f64> = serde_json::from_str(line).unwrap();
        assert_eq!(doc.popularity["views"], 3.0);
        assert_eq!(serde_json::to_string(&doc).unwrap(), line);
    }

    #[test]
    fn request_needs_a_nonzero_weight() {
        let mut req = QueryRequest::<f64> {
            query_id: "q".into(),
            weights: BTreeMap::from([(Signal::Lexical, 0.0), (Signal::Dense, 0.0)]),
            candidate_k: 5,
            normalization: Normalization::None,
            bm25: Bm25Params::default(),
        };
        assert!(req.validate().is_err());
        req.weights.insert(Signal::Dense, 0.1);
        assert!(req.validate().is_ok());
        req.candidate_k = 0;
        assert!(req.validate().is_err());
    }
}
