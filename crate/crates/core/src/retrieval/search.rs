use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Index, Normalization, Query, QueryRequest, RankedList, Signal};

fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let (mut dot, mut na, mut nb) = (S::zero(), S::zero(), S::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return S::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn min_max<S: Scalar>(values: &mut [S]) {
    let min = values.iter().copied().fold(S::infinity(), S::min);
    let max = values.iter().copied().fold(S::neg_infinity(), S::max);
    let span = max - min;
    for v in values.iter_mut() {
        *v = if span > S::zero() { (*v - min) / span } else { S::zero() };
    }
}

impl<S: Scalar> Index<S> {
    /// Raw value of `signal` for every document, in index order.
    pub fn signal(&self, signal: &Signal, request: &QueryRequest<S>, query: &Query<S>) -> Vec<S> {
        match signal {
            Signal::Lexical => self.bm25_all(&query.tokens, request.bm25),
            Signal::Dense => match &query.embedding {
                Some(q) => self.docs().iter().map(|d| cosine(q, &d.embedding)).collect(),
                None => vec![S::zero(); self.len()],
            },
            Signal::Popularity(feature) => self
                .docs()
                .iter()
                .map(|d| {
                    d.popularity
                        .get(feature)
                        .map_or(S::zero(), |&c| c.ln_1p())
                })
                .collect(),
        }
    }

    /// Blended score of every document, in index order.
    pub fn blended_scores(&self, request: &QueryRequest<S>, query: &Query<S>) -> Vec<S> {
        let mut total = vec![S::zero(); self.len()];
        for (signal, &w) in &request.weights {
            if w.is_zero() {
                continue;
            }
            let mut values = self.signal(signal, request, query);
            if request.normalization == Normalization::MinMax {
                min_max(&mut values);
            }
            for (t, v) in total.iter_mut().zip(values) {
                *t = *t + w * v;
            }
        }
        total
    }
}

/// Descending score, ascending id on ties.
pub(crate) fn rank_order<S: Scalar>(a: (&str, S), b: (&str, S)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

/// Scores the whole corpus for one query and keeps the top `candidate_k`.
pub fn search<S: Scalar>(
    index: &Index<S>,
    request: &QueryRequest<S>,
    query: &Query<S>,
) -> Result<RankedList<S>> {
    request.validate()?;
    if request.query_id != query.query_id {
        return Err(Error::data(
            "search",
            format!("request for {} paired with query {}", request.query_id, query.query_id),
        ));
    }
    if let Some(e) = &query.embedding {
        if e.len() != index.dim() {
            return Err(Error::data(
                "search",
                format!(
                    "query {} has embedding dimension {}, index has {}",
                    query.query_id,
                    e.len(),
                    index.dim()
                ),
            ));
        }
    }
    let scores = index.blended_scores(request, query);
    let mut items: Vec<(String, S)> = index
        .docs()
        .iter()
        .zip(scores)
        .map(|(d, s)| (d.item_id.clone(), s))
        .collect();
    items.sort_by(|a, b| rank_order((&a.0, a.1), (&b.0, b.1)));
    items.truncate(request.candidate_k);
    Ok(RankedList {
        query_id: query.query_id.clone(),
        items,
    })
}

/// Element-wise [`search`] over a batch, run on the current rayon pool.
/// Output is aligned with the input positions.
pub fn multi_search<S: Scalar>(
    index: &Index<S>,
    requests: &[QueryRequest<S>],
    queries: &[&Query<S>],
) -> Result<Vec<RankedList<S>>> {
    if requests.len() != queries.len() {
        return Err(Error::data(
            "multi_search",
            format!("{} requests for {} queries", requests.len(), queries.len()),
        ));
    }
    requests
        .par_iter()
        .zip(queries.par_iter())
        .enumerate()
        .map(|(position, (r, q))| {
            search(index, r, q).map_err(|e| Error::Batch {
                position,
                source: Box::new(e),
            })
        })
        .collect()
}
