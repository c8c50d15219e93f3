//! Multi-objective hyperparameter optimization for retrieval ranking.
//!
//! A study samples a configuration from a [`SearchSpace`], turns it into a
//! search request for every query, ranks an in-memory corpus, scores the
//! rankings against click / cart / purchase labels derived from an
//! interaction log and feeds the aggregated objective vector back to the
//! sampler. After optimization the top configurations are re-scored on a
//! held-out split and elected by voting; later stages can be warm-started
//! from the best observations of earlier ones.
//!
//! Numeric kernels (retrieval scoring, label derivation, ranking metrics)
//! are generic over [`Scalar`]. The aliases at the crate root fix the scalar
//! to `f64`, which is what the study pipeline and the CLI use.

pub mod config;
pub mod datagen;
pub mod error;
pub mod meta;
pub mod objectives;
pub mod retrieval;
pub mod sampler;
pub mod scalar;
pub mod space;
pub mod study;
pub mod trial;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use space::{Domain, HpConfig, ParamSpec, Scale, SearchSpace, Value};
pub use trial::{Direction, ObservationDataset, Provenance, Trial};

pub type Document = retrieval::Document<f64>;
pub type Query = retrieval::Query<f64>;
pub type Index = retrieval::Index<f64>;
pub type QueryRequest = retrieval::QueryRequest<f64>;
pub type RankedList = retrieval::RankedList<f64>;
pub type LabelSet = objectives::LabelSet<f64>;
pub type Evaluator = study::Evaluator<f64>;
