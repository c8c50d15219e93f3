//! The optimization loop and the staged pipeline around it.

mod evaluator;
mod report;

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::meta::{
    extract_top_configs, meta_evaluate, seed_next_stage, vote_select, CumulativeSettings, TopSet,
};
use crate::sampler::{weighted_sum_reduce, Sampler, SamplerSpec};
use crate::scalar::Scalar;
use crate::space::{HpConfig, SearchSpace};
use crate::trial::{pareto_front, Direction, ObservationDataset, Provenance, Trial};

pub use evaluator::Evaluator;
pub use report::{render_csv, render_text, StageReport, StudyReport, TopIds};

/// Random stream driving every sampler decision of a study.
pub type StudyRng = ChaCha8Rng;

pub fn study_rng(seed: u64) -> StudyRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs up to `budget` trials of one stage, appending to `dataset`.
///
/// Each trial: propose, evaluate every query, store. Returns how many trials
/// ran, fewer than `budget` only when a grid sampler runs out of points.
#[allow(clippy::too_many_arguments)]
pub fn optimize<S: Scalar>(
    sampler: &dyn Sampler,
    space: &SearchSpace,
    evaluator: &Evaluator<S>,
    directions: &[Direction],
    dataset: &mut ObservationDataset,
    stage: usize,
    budget: usize,
    next_id: &mut u64,
    rng: &mut StudyRng,
) -> Result<usize> {
    for done in 0..budget {
        let config = match sampler.next(space, dataset, directions, rng) {
            Ok(c) => c,
            Err(Error::Exhausted) => return Ok(done),
            Err(e) => return Err(e),
        };
        debug_assert!(space.contains(&config), "sampler left the search space");
        let objective_values = evaluator.objective_values(&config)?;
        dataset.push(Trial {
            id: *next_id,
            stage,
            config,
            objective_values,
            provenance: Provenance::Sampled,
        })?;
        *next_id += 1;
    }
    Ok(budget)
}

/// Weighted-sum best of a dataset: `(score, trial id)`, lowest id on ties.
pub fn best_weighted(
    dataset: &ObservationDataset,
    weights: &[f64],
    directions: &[Direction],
) -> Result<Option<(f64, u64)>> {
    let mut best: Option<(f64, u64)> = None;
    for t in dataset.trials() {
        let s = weighted_sum_reduce(&t.objective_values, weights, directions)?;
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, t.id));
        }
    }
    Ok(best)
}

/// A fully specified study: data, space, sampler and selection settings.
#[derive(Debug, Clone)]
pub struct Study<S> {
    pub space: SearchSpace,
    pub sampler: SamplerSpec,
    pub train: Evaluator<S>,
    pub meta: Evaluator<S>,
    /// Normalized objective weights.
    pub weights: Vec<f64>,
    pub top_n: usize,
    pub cumulative: CumulativeSettings,
    pub seed: u64,
    /// Worker threads for query and candidate fan-out; results do not depend on it.
    pub parallelism: usize,
    /// Lets the meta split reuse training queries. Only meant for tests.
    pub allow_identity_split: bool,
}

impl<S: Scalar> Study<S> {
    pub fn objective_names(&self) -> Vec<String> {
        self.train.specs().iter().map(|s| s.name.clone()).collect()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.train.specs().iter().map(|s| s.direction).collect()
    }

    /// Runs every stage and returns the report.
    pub fn run(&self) -> Result<StudyReport> {
        self.space.validate()?;
        self.cumulative.validate(self.train.specs().len())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism.max(1))
            .build()
            .map_err(|e| Error::config("parallelism", e.to_string()))?;
        pool.install(|| self.run_stages())
    }

    fn run_stages(&self) -> Result<StudyReport> {
        let sampler = self.sampler.build(&self.weights)?;
        let directions = self.directions();
        let names = self.objective_names();
        let train_ids = self.train.query_ids();
        let mut rng = study_rng(self.seed);
        let mut next_id = 1u64;
        let mut stages = Vec::with_capacity(self.cumulative.stages.len());
        let mut previous: Option<(ObservationDataset, TopSet)> = None;

        for (index, &budget) in self.cumulative.stages.iter().enumerate() {
            let wrap = |e: Error| Error::Stage {
                index,
                source: Box::new(e),
            };
            let (mut dataset, seed_fallback, seed_gammas) = match &previous {
                None => (ObservationDataset::new(), false, Vec::new()),
                Some((prev, prev_top)) => {
                    let seeded = seed_next_stage(
                        prev,
                        &self.cumulative,
                        &directions,
                        &self.weights,
                        index,
                        &mut next_id,
                    )
                    .map_err(wrap)?;
                    let mut ds = seeded.dataset;
                    carry_top_configs(&mut ds, prev_top, index, &mut next_id).map_err(wrap)?;
                    (ds, seeded.fallback, seeded.gammas)
                }
            };
            let seeded = dataset.len();
            let sampled = optimize(
                sampler.as_ref(),
                &self.space,
                &self.train,
                &directions,
                &mut dataset,
                index,
                budget,
                &mut next_id,
                &mut rng,
            )
            .map_err(wrap)?;
            if dataset.is_empty() {
                return Err(wrap(Error::data("stage", "no trials were evaluated")));
            }
            let top = extract_top_configs(&dataset, &names, &directions, &self.weights, self.top_n)
                .map_err(wrap)?;
            let meta_scores = meta_evaluate(
                &top.pool(),
                &self.meta,
                &train_ids,
                &self.weights,
                self.allow_identity_split,
            )
            .map_err(wrap)?;
            let (winner, tally) = vote_select(&meta_scores, self.top_n).map_err(wrap)?;
            let winner_meta = self.meta.evaluate(&winner.config).map_err(wrap)?.to_f64();
            let (best_weighted, best_trial_id) = best_weighted(&dataset, &self.weights, &directions)
                .map_err(wrap)?
                .expect("dataset is non-empty");
            let train_best_meta_weighted = meta_scores
                .candidates
                .iter()
                .find(|c| c.trial_id == best_trial_id)
                .and_then(|c| c.scores.last().copied());
            let best_objectives = (0..directions.len())
                .map(|m| {
                    dataset
                        .column(m)
                        .into_iter()
                        .map(|z| directions[m].oriented(z))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            stages.push(StageReport {
                index,
                budget,
                sampled,
                seeded,
                seed_fallback,
                seed_gammas,
                best_weighted,
                best_trial_id,
                best_objectives,
                pareto_front: pareto_front(dataset.trials(), &directions)
                    .iter()
                    .map(|t| t.id)
                    .collect(),
                top_sets: top
                    .lists
                    .iter()
                    .map(|l| TopIds {
                        criterion: l.criterion.clone(),
                        trial_ids: l.trials.iter().map(|t| t.id).collect(),
                    })
                    .collect(),
                meta_scores,
                tally,
                winner,
                winner_meta,
                train_best_meta_weighted,
                trials: dataset.trials().to_vec(),
            });
            previous = Some((dataset, top));
        }

        let winner = stages.last().expect("at least one stage").winner.clone();
        Ok(StudyReport {
            sampler: self.sampler.clone(),
            objectives: names,
            directions,
            weights: self.weights.clone(),
            seed: self.seed,
            space: self.space.clone(),
            stages,
            winner,
        })
    }
}

/// Adds the previous stage's top configurations not already present as seeded trials,
/// so every earlier top configuration stays visible to the sampler.
fn carry_top_configs(
    dataset: &mut ObservationDataset,
    previous_top: &TopSet,
    stage: usize,
    next_id: &mut u64,
) -> Result<()> {
    let present: HashSet<HpConfig> = dataset.trials().iter().map(|t| t.config.clone()).collect();
    for t in previous_top.pool() {
        if present.contains(&t.config) {
            continue;
        }
        dataset.push(Trial {
            id: *next_id,
            stage,
            config: t.config,
            objective_values: t.objective_values,
            provenance: Provenance::Seeded,
        })?;
        *next_id += 1;
    }
    Ok(())
}
