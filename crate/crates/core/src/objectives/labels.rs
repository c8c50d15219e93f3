use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trial::Direction;

use super::log::{Counts, InteractionLog};
use super::metrics::MetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Clicks,
    Carts,
    Purchases,
}

impl Event {
    pub fn count(self, c: &Counts) -> u64 {
        match self {
            Event::Clicks => c.clicks,
            Event::Carts => c.carts,
            Event::Purchases => c.purchases,
        }
    }
}

/// Beta-prior smoothing: `(events + alpha) / (impressions + alpha + beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    /// `ctr`, `ctcar`, `ctcvr`, or any custom name with an explicit numerator.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerator: Option<Event>,
    #[serde(default = "default_min_impressions")]
    pub min_impressions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<Smoothing>,
    pub positive_threshold: f64,
    pub metrics: Vec<MetricSpec>,
    #[serde(default)]
    pub direction: Direction,
}

fn default_min_impressions() -> u64 {
    10
}

impl ObjectiveSpec {
    pub fn new(name: &str, positive_threshold: f64, metrics: Vec<MetricSpec>) -> Self {
        Self {
            name: name.to_owned(),
            numerator: None,
            min_impressions: default_min_impressions(),
            smoothing: None,
            positive_threshold,
            metrics,
            direction: Direction::Maximize,
        }
    }

    pub fn numerator_event(&self) -> Result<Event> {
        if let Some(e) = self.numerator {
            return Ok(e);
        }
        match self.name.as_str() {
            "ctr" => Ok(Event::Clicks),
            "ctcar" => Ok(Event::Carts),
            "ctcvr" => Ok(Event::Purchases),
            other => Err(Error::config(
                format!("objectives.{other}.numerator"),
                "custom objectives must name their numerator event",
            )),
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        self.numerator_event()?;
        if !(0.0..=1.0).contains(&self.positive_threshold) {
            return Err(Error::config(format!("{key}.positive_threshold"), "must lie in [0, 1]"));
        }
        if let Some(s) = self.smoothing {
            if !(s.alpha > 0.0 && s.beta > 0.0) {
                return Err(Error::config(format!("{key}.smoothing"), "alpha and beta must be positive"));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::config(format!("{key}.metrics"), "at least one metric is required"));
        }
        if self.direction != Direction::Maximize {
            return Err(Error::config(format!("{key}.direction"), "rate objectives are maximized"));
        }
        Ok(())
    }

    /// Event rate of one log row, `None` when undefined.
    pub fn rate<S: Scalar>(&self, counts: &Counts) -> Result<Option<S>> {
        let events = self.numerator_event()?.count(counts) as f64;
        let imps = counts.impressions as f64;
        let rate = match self.smoothing {
            Some(Smoothing { alpha, beta }) => (events + alpha) / (imps + alpha + beta),
            None if counts.impressions == 0 => return Ok(None),
            None => events / imps,
        };
        Ok(Some(S::from_f64_lossy(rate)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct Label<S> {
    pub graded: S,
    pub positive: bool,
}

pub type QueryLabels<S> = BTreeMap<String, Label<S>>;

/// Per-query item labels for one objective.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct LabelSet<S> {
    pub queries: BTreeMap<String, QueryLabels<S>>,
}

impl<S: Scalar> LabelSet<S> {
    pub fn get(&self, query_id: &str) -> Option<&QueryLabels<S>> {
        self.queries.get(query_id)
    }

    /// One JSON line per labeled `(query_id, item_id)` pair.
    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a, S> {
            query_id: &'a str,
            item_id: &'a str,
            graded: S,
            positive: bool,
        }
        let mut out = String::new();
        for (q, items) in &self.queries {
            for (i, l) in items {
                out.push_str(&serde_json::to_string(&Line {
                    query_id: q,
                    item_id: i,
                    graded: l.graded,
                    positive: l.positive,
                })?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Graded label = event rate (optionally smoothed); positive = rate at or above the threshold.
/// Rows below `min_impressions`, or with an undefined rate, are dropped.
pub fn derive_labels<S: Scalar>(log: &InteractionLog, spec: &ObjectiveSpec) -> Result<LabelSet<S>> {
    let threshold = S::from_f64_lossy(spec.positive_threshold);
    let mut set = LabelSet::default();
    for ((q, i), counts) in &log.rows {
        if counts.impressions < spec.min_impressions {
            continue;
        }
        let Some(rate) = spec.rate::<S>(counts)? else {
            continue;
        };
        set.queries.entry(q.clone()).or_insert_with(BTreeMap::new).insert(
            i.clone(),
            Label {
                graded: rate,
                positive: rate >= threshold,
            },
        );
    }
    Ok(set)
}
