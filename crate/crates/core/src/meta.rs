//! Post-optimization selection: top-configuration extraction, held-out
//! re-scoring, voting, and warm-start seeding of the next stage.

use std::cmp::Ordering;
use std::collections::HashSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::weighted_sum_reduce;
use crate::scalar::Scalar;
use crate::space::HpConfig;
use crate::study::Evaluator;
use crate::trial::{Direction, ObservationDataset, Provenance, Trial};

pub const WEIGHTED_CRITERION: &str = "weighted";

/// Criterion names: every objective, then the weighted sum.
pub fn criteria_names(objectives: &[String]) -> Vec<String> {
    objectives
        .iter()
        .cloned()
        .chain(std::iter::once(WEIGHTED_CRITERION.to_owned()))
        .collect()
}

/// Per-criterion scores of a trial, oriented so that larger is better.
fn criterion_scores(z: &[f64], weights: &[f64], directions: &[Direction]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = z.iter().zip(directions).map(|(&v, d)| d.oriented(v)).collect();
    out.push(weighted_sum_reduce(z, weights, directions)?);
    Ok(out)
}

/// Descending score, then ascending trial id.
fn by_score_then_id(a: (f64, u64), b: (f64, u64)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopList {
    pub criterion: String,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopSet {
    pub lists: Vec<TopList>,
}

impl TopSet {
    /// Union of all lists, one trial per distinct config (lowest id kept), by trial id.
    pub fn pool(&self) -> Vec<Trial> {
        let mut all: Vec<&Trial> = self.lists.iter().flat_map(|l| &l.trials).collect();
        all.sort_by_key(|t| t.id);
        let mut seen = HashSet::new();
        all.into_iter()
            .filter(|t| seen.insert(&t.config))
            .cloned()
            .collect()
    }
}

/// Top `n` trials for every objective and for the weighted sum.
pub fn extract_top_configs(
    dataset: &ObservationDataset,
    objective_names: &[String],
    directions: &[Direction],
    weights: &[f64],
    n: usize,
) -> Result<TopSet> {
    if n == 0 {
        return Err(Error::config("selection.top_n", "must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(Error::data("top configs", "dataset is empty"));
    }
    let scored: Vec<(Vec<f64>, &Trial)> = dataset
        .trials()
        .iter()
        .map(|t| Ok((criterion_scores(&t.objective_values, weights, directions)?, t)))
        .collect::<Result<_>>()?;
    let lists = criteria_names(objective_names)
        .into_iter()
        .enumerate()
        .map(|(c, criterion)| {
            let mut order: Vec<&(Vec<f64>, &Trial)> = scored.iter().collect();
            order.sort_by(|a, b| by_score_then_id((a.0[c], a.1.id), (b.0[c], b.1.id)));
            TopList {
                criterion,
                trials: order.into_iter().take(n).map(|(_, t)| (*t).clone()).collect(),
            }
        })
        .collect();
    Ok(TopSet { lists })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCandidate {
    pub trial_id: u64,
    pub config: HpConfig,
    /// One score per criterion, larger is better; the weighted sum is last.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaScores {
    pub criteria: Vec<String>,
    pub candidates: Vec<MetaCandidate>,
}

impl MetaScores {
    fn weighted_index(&self) -> Option<usize> {
        self.criteria.iter().position(|c| c == WEIGHTED_CRITERION)
    }
}

/// Re-scores every pool configuration on the meta split through the training
/// evaluation path. The splits must not share query ids unless
/// `allow_identity_split` is set.
pub fn meta_evaluate<S: Scalar>(
    pool: &[Trial],
    meta: &Evaluator<S>,
    train_query_ids: &std::collections::BTreeSet<String>,
    weights: &[f64],
    allow_identity_split: bool,
) -> Result<MetaScores> {
    if !allow_identity_split {
        let overlap: Vec<String> = meta.query_ids().intersection(train_query_ids).cloned().collect();
        if !overlap.is_empty() {
            return Err(Error::SplitOverlap(overlap));
        }
    }
    let directions: Vec<Direction> = meta.specs().iter().map(|s| s.direction).collect();
    let names: Vec<String> = meta.specs().iter().map(|s| s.name.clone()).collect();
    let candidates = pool
        .par_iter()
        .map(|t| {
            let z = meta.objective_values(&t.config)?;
            Ok(MetaCandidate {
                trial_id: t.id,
                config: t.config.clone(),
                scores: criterion_scores(&z, weights, &directions)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaScores {
        criteria: criteria_names(&names),
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub trial_id: u64,
    pub config: HpConfig,
    pub votes: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub criteria: Vec<String>,
    pub top_n: usize,
    /// In candidate order.
    pub entries: Vec<TallyEntry>,
}

/// Counts, for every candidate, the criteria under which it ranks in the
/// meta top `n`, and elects the most voted. Ties go to the higher weighted
/// meta score, then to the lower trial id.
pub fn vote_select(meta: &MetaScores, n: usize) -> Result<(TallyEntry, VoteTally)> {
    if meta.candidates.is_empty() || meta.criteria.is_empty() {
        return Err(Error::data("vote", "need at least one candidate and one criterion"));
    }
    let mut votes = vec![0usize; meta.candidates.len()];
    for c in 0..meta.criteria.len() {
        let mut order: Vec<usize> = (0..meta.candidates.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&meta.candidates[a], &meta.candidates[b]);
            by_score_then_id((ca.scores[c], ca.trial_id), (cb.scores[c], cb.trial_id))
        });
        for &i in order.iter().take(n) {
            votes[i] += 1;
        }
    }
    let weighted = meta.weighted_index();
    let tie_score = |i: usize| weighted.map_or(0.0, |w| meta.candidates[i].scores[w]);
    let winner = (0..meta.candidates.len())
        .min_by(|&a, &b| {
            votes[b]
                .cmp(&votes[a])
                .then_with(|| by_score_then_id(
                    (tie_score(a), meta.candidates[a].trial_id),
                    (tie_score(b), meta.candidates[b].trial_id),
                ))
        })
        .expect("non-empty");
    let entries: Vec<TallyEntry> = meta
        .candidates
        .iter()
        .zip(&votes)
        .map(|(c, &v)| TallyEntry {
            trial_id: c.trial_id,
            config: c.config.clone(),
            votes: v,
            scores: c.scores.clone(),
        })
        .collect();
    Ok((
        entries[winner].clone(),
        VoteTally {
            criteria: meta.criteria.clone(),
            top_n: n,
            entries,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CumulativeSettings {
    /// Per-objective quantile defining the seed threshold `gamma_m`.
    pub seed_quantile: Vec<f64>,
    pub max_seeds: usize,
    /// Trial budget of every stage.
    pub stages: Vec<usize>,
}

impl CumulativeSettings {
    pub fn validate(&self, n_objectives: usize) -> Result<()> {
        if self.stages.is_empty() || self.stages.contains(&0) {
            return Err(Error::config("cumulative.stages", "need at least one stage, each with budget >= 1"));
        }
        if self.seed_quantile.len() != n_objectives {
            return Err(Error::config(
                "cumulative.seed_quantile",
                format!("expected {n_objectives} quantiles, got {}", self.seed_quantile.len()),
            ));
        }
        if self.seed_quantile.iter().any(|q| !(0.0..1.0).contains(q)) {
            return Err(Error::config("cumulative.seed_quantile", "quantiles must lie in [0, 1)"));
        }
        if self.max_seeds == 0 {
            return Err(Error::config("cumulative.max_seeds", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub dataset: ObservationDataset,
    /// Thresholds in larger-is-better orientation.
    pub gammas: Vec<f64>,
    /// True when the conjunction was empty and the weighted best was used instead.
    pub fallback: bool,
    /// Ids, in the previous dataset, of the trials that were carried over.
    pub source_ids: Vec<u64>,
}

/// Builds the initial observations of the next stage from the trials of the
/// previous one that clear every objective's threshold.
///
/// `gamma_m` is the `seed_quantile[m]` quantile of objective `m` over
/// `prev`. At most `max_seeds` survivors are kept, preferring larger weighted
/// sums. Survivors are re-issued, in their original order, as seeded trials of
/// `stage` with ids from `next_id` on.
pub fn seed_next_stage(
    prev: &ObservationDataset,
    settings: &CumulativeSettings,
    directions: &[Direction],
    weights: &[f64],
    stage: usize,
    next_id: &mut u64,
) -> Result<SeedOutcome> {
    if prev.is_empty() {
        return Err(Error::data("seeding", "previous stage has no trials"));
    }
    let gammas: Vec<f64> = (0..directions.len())
        .map(|m| {
            let mut col: Vec<f64> = prev.column(m).into_iter().map(|z| directions[m].oriented(z)).collect();
            col.sort_by(f64::total_cmp);
            crate::sampler::quantile_sorted(&col, settings.seed_quantile[m])
        })
        .collect();
    let mut chosen: Vec<(f64, &Trial)> = prev
        .trials()
        .iter()
        .filter(|t| {
            t.objective_values
                .iter()
                .zip(directions)
                .zip(&gammas)
                .all(|((&z, d), &g)| d.oriented(z) >= g)
        })
        .map(|t| Ok((weighted_sum_reduce(&t.objective_values, weights, directions)?, t)))
        .collect::<Result<_>>()?;
    let fallback = chosen.is_empty();
    if fallback {
        warn!("stage {stage}: no trial clears every seed threshold; seeding with the weighted best");
        let best = prev
            .trials()
            .iter()
            .map(|t| Ok((weighted_sum_reduce(&t.objective_values, weights, directions)?, t)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min_by(|a, b| by_score_then_id((a.0, a.1.id), (b.0, b.1.id)))
            .expect("non-empty");
        chosen.push(best);
    }
    chosen.sort_by(|a, b| by_score_then_id((a.0, a.1.id), (b.0, b.1.id)));
    chosen.truncate(settings.max_seeds);
    chosen.sort_by_key(|(_, t)| t.id);

    let mut dataset = ObservationDataset::new();
    let mut source_ids = Vec::with_capacity(chosen.len());
    for (_, t) in chosen {
        source_ids.push(t.id);
        dataset.push(Trial {
            id: *next_id,
            stage,
            config: t.config.clone(),
            objective_values: t.objective_values.clone(),
            provenance: Provenance::Seeded,
        })?;
        *next_id += 1;
    }
    Ok(SeedOutcome {
        dataset,
        gammas,
        fallback,
        source_ids,
    })
}
