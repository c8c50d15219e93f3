//! Multi-objective tree-structured Parzen estimator.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{HpConfig, SearchSpace};
use crate::trial::{Direction, ObservationDataset};

use super::parzen::{parzen_fit, DensityModel};
use super::Sampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeSettings {
    /// Quantile splitting good from bad observations.
    pub gamma: f64,
    /// Observations needed before densities are modelled; earlier proposals are uniform.
    pub n_startup: usize,
    /// Candidates drawn from the good density per proposal.
    pub n_candidates: usize,
    /// Lower bound on the kernel bandwidth, as a fraction of the range.
    pub bandwidth_floor: f64,
    pub categorical_prior: f64,
}

impl Default for TpeSettings {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            bandwidth_floor: 1e-3,
            categorical_prior: 1.0,
        }
    }
}

impl TpeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("sampler.gamma", "must lie in (0, 1)"));
        }
        if self.n_startup < 1 {
            return Err(Error::config("sampler.n_startup", "must be at least 1"));
        }
        if self.n_candidates < 1 {
            return Err(Error::config("sampler.n_candidates", "must be at least 1"));
        }
        if self.bandwidth_floor.is_nan() || self.bandwidth_floor <= 0.0 {
            return Err(Error::config("sampler.bandwidth_floor", "must be positive"));
        }
        if self.categorical_prior.is_nan() || self.categorical_prior <= 0.0 {
            return Err(Error::config("sampler.categorical_prior", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveMode {
    /// One good/bad density pair per objective; candidates scored by the product of ratios.
    Separate,
    /// Objectives collapsed to one weighted scalar before splitting.
    WeightedSum(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpeSplit {
    /// Threshold in minimization convention.
    pub gamma: f64,
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Splits observations of one objective at its `v`-quantile.
///
/// Values are canonicalized to minimization first; `good` holds every index
/// at or below the threshold and is never empty.
pub fn tpe_split(values: &[f64], v: f64, direction: Direction) -> TpeSplit {
    assert!(!values.is_empty(), "tpe_split needs at least one value");
    let canonical: Vec<f64> = values.iter().map(|&z| direction.canonical(z)).collect();
    let mut sorted = canonical.clone();
    sorted.sort_by(f64::total_cmp);
    let gamma = quantile_sorted(&sorted, v);
    let (good, bad) = (0..values.len()).partition(|&i| canonical[i] <= gamma);
    TpeSplit { gamma, good, bad }
}

/// Weighted objective sum, oriented so that larger is better.
pub fn weighted_sum_reduce(z: &[f64], weights: &[f64], directions: &[Direction]) -> Result<f64> {
    if z.len() != weights.len() || z.len() != directions.len() {
        return Err(Error::data(
            "weighted sum",
            format!(
                "{} values, {} weights, {} directions",
                z.len(),
                weights.len(),
                directions.len()
            ),
        ));
    }
    Ok(z
        .iter()
        .zip(weights)
        .zip(directions)
        .map(|((&z, &w), d)| w * d.oriented(z))
        .sum())
}

/// Log of the product of density ratios `l_m / g_m`.
pub fn ei_log_score(log_ratios: &[f64]) -> f64 {
    log_ratios.iter().sum()
}

struct DensityPair {
    good: Vec<DensityModel>,
    bad: Vec<DensityModel>,
}

impl DensityPair {
    fn fit(
        space: &SearchSpace,
        configs: &[&HpConfig],
        split: &TpeSplit,
        settings: &TpeSettings,
    ) -> Self {
        let pick = |idx: &[usize]| -> Vec<&HpConfig> { idx.iter().map(|&i| configs[i]).collect() };
        let (good, bad) = (pick(&split.good), pick(&split.bad));
        Self {
            good: space
                .params
                .iter()
                .map(|p| parzen_fit(&good, p, settings))
                .collect(),
            bad: space
                .params
                .iter()
                .map(|p| parzen_fit(&bad, p, settings))
                .collect(),
        }
    }

    fn log_ratio(&self, space: &SearchSpace, candidate: &HpConfig) -> f64 {
        space
            .params
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let v = candidate.get(&p.name).expect("candidate covers the space");
                self.good[j].log_density(v) - self.bad[j].log_density(v)
            })
            .sum()
    }
}

/// Proposes the next configuration.
///
/// Below `n_startup` observations this is exactly [`SearchSpace::sample_uniform`].
/// Otherwise every objective is split at its `gamma` quantile, good and bad
/// densities are fitted per parameter, `n_candidates` configurations are
/// drawn from the good densities of one uniformly chosen objective, and the
/// candidate with the largest summed log ratio wins (first index on ties).
pub fn tpe_next(
    space: &SearchSpace,
    dataset: &ObservationDataset,
    directions: &[Direction],
    mode: &ObjectiveMode,
    settings: &TpeSettings,
    rng: &mut dyn RngCore,
) -> Result<HpConfig> {
    if dataset.len() < settings.n_startup {
        return Ok(space.sample_uniform(rng));
    }
    let configs: Vec<&HpConfig> = dataset.trials().iter().map(|t| &t.config).collect();
    let splits: Vec<TpeSplit> = match mode {
        ObjectiveMode::Separate => (0..directions.len())
            .map(|m| tpe_split(&dataset.column(m), settings.gamma, directions[m]))
            .collect(),
        ObjectiveMode::WeightedSum(weights) => {
            let reduced = dataset
                .trials()
                .iter()
                .map(|t| weighted_sum_reduce(&t.objective_values, weights, directions))
                .collect::<Result<Vec<_>>>()?;
            vec![tpe_split(&reduced, settings.gamma, Direction::Maximize)]
        }
    };
    let pairs: Vec<DensityPair> = splits
        .iter()
        .map(|s| DensityPair::fit(space, &configs, s, settings))
        .collect();

    let source = rng.random_range(0..pairs.len());
    let mut best: Option<(f64, HpConfig)> = None;
    for _ in 0..settings.n_candidates {
        let candidate = HpConfig {
            assignments: space
                .params
                .iter()
                .zip(&pairs[source].good)
                .map(|(p, density)| (p.name.clone(), density.sample(rng)))
                .collect(),
        };
        let ratios: Vec<f64> = pairs.iter().map(|pair| pair.log_ratio(space, &candidate)).collect();
        let score = ei_log_score(&ratios);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate));
        }
    }
    Ok(best.expect("n_candidates >= 1").1)
}

#[derive(Debug, Clone)]
pub struct TpeSampler {
    pub mode: ObjectiveMode,
    pub settings: TpeSettings,
}

impl TpeSampler {
    pub fn new(mode: ObjectiveMode, settings: TpeSettings) -> Self {
        Self { mode, settings }
    }
}

impl Sampler for TpeSampler {
    fn name(&self) -> &'static str {
        "tpe"
    }

    fn next(
        &self,
        space: &SearchSpace,
        dataset: &ObservationDataset,
        directions: &[Direction],
        rng: &mut dyn RngCore,
    ) -> Result<HpConfig> {
        tpe_next(space, dataset, directions, &self.mode, &self.settings, rng)
    }
}
