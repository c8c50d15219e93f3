use std::collections::HashSet;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::space::{HpConfig, SearchSpace, Value};
use crate::trial::{Direction, ObservationDataset};

use super::Sampler;

/// Walks the Cartesian product of all grid values.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridSampler;

impl Sampler for GridSampler {
    fn name(&self) -> &'static str {
        "grid"
    }

    fn next(
        &self,
        space: &SearchSpace,
        dataset: &ObservationDataset,
        _directions: &[Direction],
        _rng: &mut dyn RngCore,
    ) -> Result<HpConfig> {
        grid_next(space, dataset)
    }
}

/// First grid configuration, in lexicographic order of the declared
/// parameters (last parameter varying fastest), not already present in
/// `dataset`. Returns [`Error::Exhausted`] once every point has been seen.
pub fn grid_next(space: &SearchSpace, dataset: &ObservationDataset) -> Result<HpConfig> {
    let axes: Vec<Vec<Value>> = space
        .params
        .iter()
        .map(|p| {
            p.grid_values().ok_or_else(|| {
                Error::config(
                    format!("space.params.{}", p.name),
                    "grid sampler needs explicit grid points, not a continuous range",
                )
            })
        })
        .collect::<Result<_>>()?;
    if axes.iter().any(Vec::is_empty) {
        return Err(Error::Exhausted);
    }
    let seen: HashSet<&HpConfig> = dataset.trials().iter().map(|t| &t.config).collect();
    let mut odometer = vec![0usize; axes.len()];
    loop {
        let config = HpConfig {
            assignments: space
                .params
                .iter()
                .zip(&axes)
                .zip(&odometer)
                .map(|((p, axis), &i)| (p.name.clone(), axis[i]))
                .collect(),
        };
        if !seen.contains(&config) {
            return Ok(config);
        }
        let mut pos = axes.len();
        loop {
            if pos == 0 {
                return Err(Error::Exhausted);
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < axes[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

/// Every configuration of an all-discrete space, in the order [`grid_next`] visits them.
/// Refuses with [`Error::GridTooLarge`] when the product exceeds `cap`.
pub fn grid_configs(space: &SearchSpace, cap: u128) -> Result<Vec<HpConfig>> {
    let count = space.grid_size().ok_or_else(|| {
        Error::config("space", "grid enumeration needs explicit grid points, not a continuous range")
    })?;
    if count > cap {
        return Err(Error::GridTooLarge { count, cap });
    }
    let axes: Vec<Vec<Value>> = space
        .params
        .iter()
        .map(|p| p.grid_values().expect("grid_size checked"))
        .collect();
    let mut out: Vec<Vec<Value>> = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(*v);
                    next
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|values| HpConfig {
            assignments: space.params.iter().map(|p| p.name.clone()).zip(values).collect(),
        })
        .collect())
}
