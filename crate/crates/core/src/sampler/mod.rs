//! Proposal strategies behind one pluggable interface.
//!
//! A sampler is a pure function of the search space, the observations made
//! so far, the objective directions and the random stream. Further strategies
//! (Gaussian-process or evolutionary) plug in by implementing [`Sampler`].

mod grid;
mod parzen;
mod random;
mod tpe;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::space::{HpConfig, SearchSpace};
use crate::trial::{Direction, ObservationDataset};

pub use grid::{grid_configs, grid_next, GridSampler};
pub use parzen::{parzen_fit, DensityModel};
pub use random::RandomSampler;
pub(crate) use tpe::quantile_sorted;
pub use tpe::{
    ei_log_score, tpe_next, tpe_split, weighted_sum_reduce, ObjectiveMode, TpeSampler,
    TpeSettings, TpeSplit,
};

pub trait Sampler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Proposes the next configuration. Deterministic in its arguments.
    fn next(
        &self,
        space: &SearchSpace,
        dataset: &ObservationDataset,
        directions: &[Direction],
        rng: &mut dyn RngCore,
    ) -> Result<HpConfig>;
}

/// Sampler selection as written in a study config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", try_from = "RawSamplerSpec")]
pub enum SamplerSpec {
    Random,
    Grid,
    Tpe {
        #[serde(default)]
        mode: ModeSpec,
        #[serde(flatten)]
        settings: TpeSettings,
    },
}

/// Flat form of [`SamplerSpec`] so that unknown keys are rejected.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSamplerSpec {
    name: String,
    mode: Option<ModeSpec>,
    gamma: Option<f64>,
    n_startup: Option<usize>,
    n_candidates: Option<usize>,
    bandwidth_floor: Option<f64>,
    categorical_prior: Option<f64>,
}

impl TryFrom<RawSamplerSpec> for SamplerSpec {
    type Error = String;

    fn try_from(raw: RawSamplerSpec) -> std::result::Result<Self, String> {
        let tpe_only = [
            ("mode", raw.mode.is_some()),
            ("gamma", raw.gamma.is_some()),
            ("n_startup", raw.n_startup.is_some()),
            ("n_candidates", raw.n_candidates.is_some()),
            ("bandwidth_floor", raw.bandwidth_floor.is_some()),
            ("categorical_prior", raw.categorical_prior.is_some()),
        ];
        let plain = |spec: SamplerSpec| match tpe_only.iter().find(|(_, set)| *set) {
            Some((key, _)) => Err(format!("`{key}` only applies to the tpe sampler")),
            None => Ok(spec),
        };
        match raw.name.as_str() {
            "random" => plain(SamplerSpec::Random),
            "grid" => plain(SamplerSpec::Grid),
            "tpe" => {
                let d = TpeSettings::default();
                Ok(SamplerSpec::Tpe {
                    mode: raw.mode.unwrap_or_default(),
                    settings: TpeSettings {
                        gamma: raw.gamma.unwrap_or(d.gamma),
                        n_startup: raw.n_startup.unwrap_or(d.n_startup),
                        n_candidates: raw.n_candidates.unwrap_or(d.n_candidates),
                        bandwidth_floor: raw.bandwidth_floor.unwrap_or(d.bandwidth_floor),
                        categorical_prior: raw.categorical_prior.unwrap_or(d.categorical_prior),
                    },
                })
            }
            other => Err(format!("unknown sampler `{other}` (expected random, grid or tpe)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Separate,
    WeightedSum,
}

impl SamplerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerSpec::Random => "random",
            SamplerSpec::Grid => "grid",
            SamplerSpec::Tpe { .. } => "tpe",
        }
    }

    /// `weights` are the study's objective weights, used by weighted-sum TPE.
    pub fn build(&self, weights: &[f64]) -> Result<Box<dyn Sampler>> {
        Ok(match self {
            SamplerSpec::Random => Box::new(RandomSampler),
            SamplerSpec::Grid => Box::new(GridSampler),
            SamplerSpec::Tpe { mode, settings } => {
                settings.validate()?;
                let mode = match mode {
                    ModeSpec::Separate => ObjectiveMode::Separate,
                    ModeSpec::WeightedSum => ObjectiveMode::WeightedSum(weights.to_vec()),
                };
                Box::new(TpeSampler::new(mode, settings.clone()))
            }
        })
    }
}
