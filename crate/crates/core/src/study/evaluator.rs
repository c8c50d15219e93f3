use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objectives::{derive_labels, evaluate_objectives, InteractionLog, LabelSet, ObjectiveEvaluation, ObjectiveSpec};
use crate::retrieval::{multi_search, Index, Query, QueryRequest, RankedList, TransformSpec};
use crate::scalar::Scalar;
use crate::space::{HpConfig, SearchSpace};

/// The transform → search → score path shared by training, meta evaluation and the grid oracle.
#[derive(Debug, Clone)]
pub struct Evaluator<S> {
    index: Arc<Index<S>>,
    queries: Vec<Query<S>>,
    labels: Vec<LabelSet<S>>,
    specs: Vec<ObjectiveSpec>,
    transform: TransformSpec,
    space: SearchSpace,
}

impl<S: Scalar> Evaluator<S> {
    /// Labels are derived from `log` for each objective. Queries are sorted by id.
    pub fn new(
        index: Arc<Index<S>>,
        queries: Vec<Query<S>>,
        log: &InteractionLog,
        specs: Vec<ObjectiveSpec>,
        transform: TransformSpec,
        space: SearchSpace,
    ) -> Result<Self> {
        let labels = specs
            .iter()
            .map(|s| derive_labels(log, s))
            .collect::<Result<Vec<_>>>()?;
        Self::with_labels(index, queries, labels, specs, transform, space)
    }

    pub fn with_labels(
        index: Arc<Index<S>>,
        mut queries: Vec<Query<S>>,
        labels: Vec<LabelSet<S>>,
        specs: Vec<ObjectiveSpec>,
        transform: TransformSpec,
        space: SearchSpace,
    ) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::data("queries", "no queries to evaluate"));
        }
        if let Some(q) = queries.iter().find(|q| q.is_empty()) {
            return Err(Error::data(
                "queries",
                format!("query {} has no tokens, embedding or category", q.query_id),
            ));
        }
        queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        if let Some(w) = queries.windows(2).find(|w| w[0].query_id == w[1].query_id) {
            return Err(Error::data("queries", format!("duplicate query_id {}", w[0].query_id)));
        }
        if labels.len() != specs.len() {
            return Err(Error::data("labels", "one label set per objective is required"));
        }
        transform.validate(&space)?;
        Ok(Self {
            index,
            queries,
            labels,
            specs,
            transform,
            space,
        })
    }

    pub fn index(&self) -> &Arc<Index<S>> {
        &self.index
    }

    pub fn queries(&self) -> &[Query<S>] {
        &self.queries
    }

    pub fn query_ids(&self) -> BTreeSet<String> {
        self.queries.iter().map(|q| q.query_id.clone()).collect()
    }

    pub fn labels(&self) -> &[LabelSet<S>] {
        &self.labels
    }

    pub fn specs(&self) -> &[ObjectiveSpec] {
        &self.specs
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn transform(&self) -> &TransformSpec {
        &self.transform
    }

    pub fn requests(&self, h: &HpConfig) -> Result<Vec<QueryRequest<S>>> {
        self.queries
            .iter()
            .map(|q| self.transform.apply(h, q, &self.space))
            .collect()
    }

    /// Rankings for every query, in query-id order.
    pub fn rank(&self, h: &HpConfig) -> Result<Vec<RankedList<S>>> {
        let requests = self.requests(h)?;
        let queries: Vec<&Query<S>> = self.queries.iter().collect();
        multi_search(&self.index, &requests, &queries)
    }

    pub fn evaluate(&self, h: &HpConfig) -> Result<ObjectiveEvaluation<S>> {
        evaluate_objectives(&self.rank(h)?, &self.labels, &self.specs)
    }

    /// Aggregated objective vector `z_1..z_M` as 64-bit reals.
    pub fn objective_values(&self, h: &HpConfig) -> Result<Vec<f64>> {
        Ok(self
            .evaluate(h)?
            .values()
            .into_iter()
            .map(Scalar::to_f64_lossy)
            .collect())
    }
}
