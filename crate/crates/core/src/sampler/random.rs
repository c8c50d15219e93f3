use rand::RngCore;

use crate::error::Result;
use crate::space::{HpConfig, SearchSpace};
use crate::trial::{Direction, ObservationDataset};

use super::Sampler;

/// Independent uniform draws, ignoring all observations.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSampler;

impl Sampler for RandomSampler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn next(
        &self,
        space: &SearchSpace,
        _dataset: &ObservationDataset,
        _directions: &[Direction],
        rng: &mut dyn RngCore,
    ) -> Result<HpConfig> {
        Ok(space.sample_uniform(rng))
    }
}
