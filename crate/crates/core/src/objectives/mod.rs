//! Engagement and conversion objectives computed from interaction logs.

mod evaluate;
mod labels;
mod log;
mod metrics;

pub use evaluate::{evaluate_objectives, mean_of, Diagnostics, ObjectiveEvaluation, ObjectiveScore};
pub use labels::{derive_labels, Event, Label, LabelSet, ObjectiveSpec, QueryLabels, Smoothing};
pub use log::{Counts, InteractionLog};
pub use metrics::{map_at_k, ndcg_at_k, precision_at_k, recall_at_k, MetricKind, MetricSpec};
