use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RankedList;
use crate::scalar::Scalar;

use super::labels::{LabelSet, ObjectiveSpec};

/// Queries left out of a metric's mean, by reason.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Queries with no labels at all for this objective.
    pub unlabeled_queries: Vec<String>,
    /// Per metric, the queries whose precondition failed.
    pub excluded: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct ObjectiveScore<S> {
    pub name: String,
    /// Aggregate `z_m`: mean over admitted queries of the within-query metric mean.
    pub value: S,
    /// Per metric, mean over the queries that admit it.
    pub per_metric: Vec<(String, Option<S>)>,
    pub admitted_queries: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct ObjectiveEvaluation<S> {
    pub objectives: Vec<ObjectiveScore<S>>,
}

impl<S: Scalar> ObjectiveEvaluation<S> {
    pub fn values(&self) -> Vec<S> {
        self.objectives.iter().map(|o| o.value).collect()
    }

    pub fn to_f64(&self) -> ObjectiveEvaluation<f64> {
        ObjectiveEvaluation {
            objectives: self
                .objectives
                .iter()
                .map(|o| ObjectiveScore {
                    name: o.name.clone(),
                    value: o.value.to_f64_lossy(),
                    per_metric: o
                        .per_metric
                        .iter()
                        .map(|(m, v)| (m.clone(), v.map(|v| v.to_f64_lossy())))
                        .collect(),
                    admitted_queries: o.admitted_queries,
                    diagnostics: o.diagnostics.clone(),
                })
                .collect(),
        }
    }
}

/// Arithmetic mean in slice order; `None` when empty.
pub fn mean_of<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(S::zero(), |a, &v| a + v);
    Some(sum / S::from_usize_lossy(values.len()))
}

/// Scores a batch of rankings against every objective.
///
/// Queries are visited in ascending `query_id` order so the result does not
/// depend on batch order. Within a query the admissible metrics are averaged
/// first; the objective is the mean of those per-query values. Precision on a
/// query with no labels counts as 0; the other metrics skip such queries.
pub fn evaluate_objectives<S: Scalar>(
    ranked: &[RankedList<S>],
    labels: &[LabelSet<S>],
    specs: &[ObjectiveSpec],
) -> Result<ObjectiveEvaluation<S>> {
    if labels.len() != specs.len() {
        return Err(Error::data(
            "evaluation",
            format!("{} label sets for {} objectives", labels.len(), specs.len()),
        ));
    }
    let mut order: Vec<&RankedList<S>> = ranked.iter().collect();
    order.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    if let Some(w) = order.windows(2).find(|w| w[0].query_id == w[1].query_id) {
        return Err(Error::data(
            "evaluation",
            format!("query {} appears twice in the batch", w[0].query_id),
        ));
    }

    let empty = BTreeMap::new();
    let mut objectives = Vec::with_capacity(specs.len());
    for (spec, set) in specs.iter().zip(labels) {
        let mut diagnostics = Diagnostics::default();
        let mut per_query = Vec::with_capacity(order.len());
        let mut per_metric: Vec<Vec<S>> = vec![Vec::new(); spec.metrics.len()];
        for list in &order {
            let query_labels = match set.get(&list.query_id) {
                Some(l) => l,
                None => {
                    diagnostics.unlabeled_queries.push(list.query_id.clone());
                    &empty
                }
            };
            let mut admitted = Vec::with_capacity(spec.metrics.len());
            for (j, metric) in spec.metrics.iter().enumerate() {
                match metric.compute(list, query_labels) {
                    Some(v) => {
                        admitted.push(v);
                        per_metric[j].push(v);
                    }
                    None => diagnostics
                        .excluded
                        .entry(metric.to_string())
                        .or_default()
                        .push(list.query_id.clone()),
                }
            }
            if let Some(v) = mean_of(&admitted) {
                per_query.push(v);
            }
        }
        let value = mean_of(&per_query).ok_or_else(|| Error::NoAdmissibleQueries(spec.name.clone()))?;
        objectives.push(ObjectiveScore {
            name: spec.name.clone(),
            value,
            per_metric: spec
                .metrics
                .iter()
                .zip(&per_metric)
                .map(|(m, v)| (m.to_string(), mean_of(v)))
                .collect(),
            admitted_queries: per_query.len(),
            diagnostics,
        });
    }
    Ok(ObjectiveEvaluation { objectives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::labels::{Label, QueryLabels};

    fn list(q: &str, ids: &[&str]) -> RankedList<f64> {
        RankedList {
            query_id: q.into(),
            items: ids.iter().map(|i| (i.to_string(), 1.0)).collect(),
        }
    }

    fn labels(rows: &[(&str, &str, bool)]) -> LabelSet<f64> {
        let mut set = LabelSet::default();
        for (q, i, pos) in rows {
            set.queries
                .entry(q.to_string())
                .or_insert_with(QueryLabels::new)
                .insert(
                    i.to_string(),
                    Label {
                        graded: if *pos { 1.0 } else { 0.0 },
                        positive: *pos,
                    },
                );
        }
        set
    }

    fn spec(metrics: &[&str]) -> ObjectiveSpec {
        ObjectiveSpec::new("ctr", 0.5, metrics.iter().map(|m| m.parse().unwrap()).collect())
    }

    #[test]
    fn single_query_aggregate_is_its_value() {
        let l = labels(&[("q1", "a", true), ("q1", "b", false)]);
        let e = evaluate_objectives(&[list("q1", &["b", "a"])], &[l], &[spec(&["precision@2"])]).unwrap();
        assert_eq!(e.values(), vec![0.5]);
    }

    #[test]
    fn two_queries_average() {
        let l = labels(&[
            ("q1", "a", true),
            ("q2", "a", true),
            ("q2", "b", true),
            ("q2", "c", true),
        ]);
        let batch = [list("q1", &["a", "x", "y", "z", "w"]), list("q2", &["a", "b", "c", "x", "y"])];
        let e = evaluate_objectives(&batch, &[l], &[spec(&["precision@5"])]).unwrap();
        assert!((e.values()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn unadmissible_queries_are_excluded_and_reported() {
        let l = labels(&[("q1", "a", true), ("q2", "a", false)]);
        let batch = [list("q1", &["a"]), list("q2", &["a"]), list("q3", &["a"])];
        let e = evaluate_objectives(&batch, &[l], &[spec(&["recall@1"])]).unwrap();
        let o = &e.objectives[0];
        assert_eq!(o.value, 1.0);
        assert_eq!(o.admitted_queries, 1);
        assert_eq!(o.diagnostics.unlabeled_queries, vec!["q3"]);
        assert_eq!(o.diagnostics.excluded["recall@1"], vec!["q2", "q3"]);
    }

    #[test]
    fn no_admissible_queries_names_the_objective() {
        let l = labels(&[("q1", "a", false)]);
        let err = evaluate_objectives(&[list("q1", &["a"])], &[l], &[spec(&["ndcg@3"])]).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleQueries(ref n) if n == "ctr"));
    }

    #[test]
    fn average_of_table_metrics() {
        let avg: f64 = mean_of(&[0.7431, 0.5950, 0.5395]).unwrap();
        assert!((avg - 0.6259).abs() < 5e-5);
    }

    #[test]
    fn duplicate_queries_rejected() {
        let l = labels(&[("q1", "a", true)]);
        let batch = [list("q1", &["a"]), list("q1", &["a"])];
        assert!(evaluate_objectives(&batch, &[l], &[spec(&["precision@1"])]).is_err());
    }
}
