//! Ranking metrics at a cutoff.
//!
//! Binary metrics (precision, recall, MAP) read the `positive` flag;
//! nDCG uses the graded label as a linear gain with a `log2(rank + 1)`
//! discount. Items without a label count as negative with zero gain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::retrieval::RankedList;
use crate::scalar::Scalar;

use super::labels::QueryLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Ndcg,
    Precision,
    Recall,
    Map,
}

/// A metric and its cutoff, written `kind@K` (e.g. `ndcg@20`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Ndcg => "ndcg",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::Map => "map",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for MetricSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| format!("metric `{s}` must look like kind@K"))?;
        let kind = match name {
            "ndcg" => MetricKind::Ndcg,
            "precision" | "prec" => MetricKind::Precision,
            "recall" => MetricKind::Recall,
            "map" => MetricKind::Map,
            other => return Err(format!("unknown metric kind `{other}`")),
        };
        let k: usize = k.parse().map_err(|_| format!("bad cutoff in `{s}`"))?;
        if k == 0 {
            return Err(format!("cutoff in `{s}` must be >= 1"));
        }
        Ok(Self { kind, k })
    }
}

impl TryFrom<String> for MetricSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MetricSpec> for String {
    fn from(m: MetricSpec) -> Self {
        m.to_string()
    }
}

impl MetricSpec {
    /// `None` when the metric's precondition fails for this query.
    pub fn compute<S: Scalar>(&self, ranked: &RankedList<S>, labels: &QueryLabels<S>) -> Option<S> {
        match self.kind {
            MetricKind::Ndcg => ndcg_at_k(ranked, labels, self.k),
            MetricKind::Precision => Some(precision_at_k(ranked, labels, self.k)),
            MetricKind::Recall => recall_at_k(ranked, labels, self.k),
            MetricKind::Map => map_at_k(ranked, labels, self.k),
        }
    }
}

fn is_positive<S: Scalar>(labels: &QueryLabels<S>, id: &str) -> bool {
    labels.get(id).is_some_and(|l| l.positive)
}

fn n_positive<S: Scalar>(labels: &QueryLabels<S>) -> usize {
    labels.values().filter(|l| l.positive).count()
}

fn hits<S: Scalar>(ranked: &RankedList<S>, labels: &QueryLabels<S>, k: usize) -> usize {
    ranked.ids().take(k).filter(|id| is_positive(labels, id)).count()
}

/// Positives in the top `k`, over `k`.
pub fn precision_at_k<S: Scalar>(ranked: &RankedList<S>, labels: &QueryLabels<S>, k: usize) -> S {
    S::from_usize_lossy(hits(ranked, labels, k)) / S::from_usize_lossy(k)
}

/// Positives in the top `k`, over all positives; `None` without positives.
pub fn recall_at_k<S: Scalar>(ranked: &RankedList<S>, labels: &QueryLabels<S>, k: usize) -> Option<S> {
    let total = n_positive(labels);
    (total > 0).then(|| S::from_usize_lossy(hits(ranked, labels, k)) / S::from_usize_lossy(total))
}

/// `None` when no labeled item has a positive grade.
pub fn ndcg_at_k<S: Scalar>(ranked: &RankedList<S>, labels: &QueryLabels<S>, k: usize) -> Option<S> {
    let discount = |rank: usize| S::from_usize_lossy(rank + 1).log2();
    let mut ideal: Vec<S> = labels
        .values()
        .map(|l| l.graded)
        .filter(|g| *g > S::zero())
        .collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let idcg = ideal
        .iter()
        .take(k)
        .enumerate()
        .fold(S::zero(), |acc, (r, &g)| acc + g / discount(r + 1));
    let dcg = ranked.ids().take(k).enumerate().fold(S::zero(), |acc, (r, id)| {
        acc + labels.get(id).map_or(S::zero(), |l| l.graded) / discount(r + 1)
    });
    Some(dcg / idcg)
}

/// Mean of precision at each positive rank within `k`, normalized by
/// `min(k, positives)`; `None` without positives.
pub fn map_at_k<S: Scalar>(ranked: &RankedList<S>, labels: &QueryLabels<S>, k: usize) -> Option<S> {
    let total = n_positive(labels);
    if total == 0 {
        return None;
    }
    let mut found = 0usize;
    let mut sum = S::zero();
    for (r, id) in ranked.ids().take(k).enumerate() {
        if is_positive(labels, id) {
            found += 1;
            sum = sum + S::from_usize_lossy(found) / S::from_usize_lossy(r + 1);
        }
    }
    Some(sum / S::from_usize_lossy(k.min(total)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::labels::Label;

    fn ranked(ids: &[&str]) -> RankedList<f64> {
        RankedList {
            query_id: "q".into(),
            items: ids.iter().map(|id| (id.to_string(), 0.0)).collect(),
        }
    }

    fn binary(pos: &[&str], neg: &[&str]) -> QueryLabels<f64> {
        pos.iter()
            .map(|id| (id.to_string(), Label { graded: 1.0, positive: true }))
            .chain(neg.iter().map(|id| (id.to_string(), Label { graded: 0.0, positive: false })))
            .collect()
    }

    fn graded(gains: &[(&str, f64)]) -> QueryLabels<f64> {
        gains
            .iter()
            .map(|(id, g)| (id.to_string(), Label { graded: *g, positive: *g > 0.0 }))
            .collect()
    }

    #[test]
    fn precision_counts_positives() {
        let p = precision_at_k(&ranked(&["A", "B", "C"]), &binary(&["A", "C"], &["B"]), 3);
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(precision_at_k(&ranked(&["A", "B"]), &binary(&[], &["A"]), 3), 0.0);
    }

    #[test]
    fn precision_denominator_is_k() {
        let p = precision_at_k(&ranked(&["A"]), &binary(&["A"], &[]), 4);
        assert_eq!(p, 0.25);
    }

    #[test]
    fn recall_examples() {
        let r = recall_at_k(&ranked(&["A", "B", "C"]), &binary(&["A", "C", "D"], &[]), 3).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        let all = recall_at_k(&ranked(&["D", "A", "C", "B"]), &binary(&["A", "C", "D"], &[]), 10);
        assert_eq!(all, Some(1.0));
        assert_eq!(recall_at_k(&ranked(&["A"]), &binary(&[], &["A"]), 1), None);
    }

    #[test]
    fn ndcg_hand_example() {
        let labels = graded(&[("x", 3.0), ("y", 0.0), ("z", 1.0)]);
        let v = ndcg_at_k(&ranked(&["x", "y", "z"]), &labels, 3).unwrap();
        let idcg = 3.0 + 1.0 / 3f64.log2();
        assert!((v - 3.5 / idcg).abs() < 1e-12);
        assert!((v - 0.9639).abs() < 1e-4);
    }

    #[test]
    fn ndcg_ideal_and_equal_gains() {
        let labels = graded(&[("a", 0.5), ("b", 0.3), ("c", 0.1)]);
        assert_eq!(ndcg_at_k(&ranked(&["a", "b", "c"]), &labels, 3), Some(1.0));
        let flat = graded(&[("a", 0.2), ("b", 0.2), ("c", 0.2)]);
        let v = ndcg_at_k(&ranked(&["c", "a", "b"]), &flat, 3).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&ranked(&["a"]), &graded(&[("a", 0.0)]), 3), None);
    }

    #[test]
    fn map_examples() {
        let labels = binary(&["A", "C"], &["B"]);
        let v = map_at_k(&ranked(&["A", "B", "C"]), &labels, 3).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        let v = map_at_k(&ranked(&["A", "C"]), &labels, 2).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn spec_strings() {
        let m: MetricSpec = "prec@100".parse().unwrap();
        assert_eq!(m.to_string(), "precision@100");
        assert!("ndcg@0".parse::<MetricSpec>().is_err());
        assert!("mrr@3".parse::<MetricSpec>().is_err());
    }
}
