//! Trials, the observation dataset, and Pareto dominance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::HpConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    /// Value in minimization convention, as consumed by samplers.
    pub fn canonical(self, z: f64) -> f64 {
        match self {
            Direction::Maximize => -z,
            Direction::Minimize => z,
        }
    }

    /// Value oriented so that larger is better.
    pub fn oriented(self, z: f64) -> f64 {
        -self.canonical(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sampled,
    Seeded,
}

/// Field order is the JSON-lines export order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub stage: usize,
    pub config: HpConfig,
    pub objective_values: Vec<f64>,
    pub provenance: Provenance,
}

/// Append-only record of evaluated trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationDataset {
    trials: Vec<Trial>,
}

impl ObservationDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn last_id(&self) -> Option<u64> {
        self.trials.last().map(|t| t.id)
    }

    pub fn n_sampled(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.provenance == Provenance::Sampled)
            .count()
    }

    /// Appends a trial, enforcing increasing ids, finite values of a
    /// consistent width, and seeded-before-sampled within a stage.
    pub fn push(&mut self, trial: Trial) -> Result<()> {
        let bad = |msg: String| Err(Error::data("observation dataset", msg));
        if trial.objective_values.iter().any(|v| !v.is_finite()) {
            return bad(format!("trial {} has non-finite objective values", trial.id));
        }
        if let Some(last) = self.trials.last() {
            if trial.id <= last.id {
                return bad(format!("trial id {} does not follow {}", trial.id, last.id));
            }
            if trial.objective_values.len() != last.objective_values.len() {
                return bad(format!(
                    "trial {} has {} objective values, expected {}",
                    trial.id,
                    trial.objective_values.len(),
                    last.objective_values.len()
                ));
            }
            if trial.provenance == Provenance::Seeded
                && self
                    .trials
                    .iter()
                    .any(|t| t.stage == trial.stage && t.provenance == Provenance::Sampled)
            {
                return bad(format!(
                    "seeded trial {} follows sampled trials of stage {}",
                    trial.id, trial.stage
                ));
            }
        }
        self.trials.push(trial);
        Ok(())
    }

    /// Column of objective `m` in trial order.
    pub fn column(&self, m: usize) -> Vec<f64> {
        self.trials.iter().map(|t| t.objective_values[m]).collect()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io("<trials jsonl>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let mut ds = Self::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            ds.push(serde_json::from_str(line)?)?;
        }
        Ok(ds)
    }
}

impl FromIterator<Trial> for ObservationDataset {
    /// Collects without validation; callers own the ordering guarantees.
    fn from_iter<I: IntoIterator<Item = Trial>>(iter: I) -> Self {
        Self {
            trials: iter.into_iter().collect(),
        }
    }
}

/// True iff `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64], directions: &[Direction]) -> bool {
    let mut strictly = false;
    for ((&x, &y), d) in a.iter().zip(b).zip(directions) {
        let (x, y) = (d.oriented(x), d.oriented(y));
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Non-dominated trials, ordered by trial id.
pub fn pareto_front(trials: &[Trial], directions: &[Direction]) -> Vec<Trial> {
    let mut front: Vec<Trial> = trials
        .iter()
        .filter(|t| {
            !trials
                .iter()
                .any(|o| dominates(&o.objective_values, &t.objective_values, directions))
        })
        .cloned()
        .collect();
    front.sort_by_key(|t| t.id);
    front
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(id: u64, z: &[f64]) -> Trial {
        Trial {
            id,
            stage: 0,
            config: HpConfig::new(),
            objective_values: z.to_vec(),
            provenance: Provenance::Sampled,
        }
    }

    const MAX2: [Direction; 2] = [Direction::Maximize, Direction::Maximize];

    #[test]
    fn strict_domination_leaves_one() {
        let front = pareto_front(&[trial(1, &[1.0, 1.0]), trial(2, &[0.0, 0.0])], &MAX2);
        assert_eq!(front.iter().map(|t| t.id).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn incomparable_pair_both_kept() {
        let front = pareto_front(&[trial(2, &[0.0, 1.0]), trial(1, &[1.0, 0.0])], &MAX2);
        assert_eq!(front.iter().map(|t| t.id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn minimize_flips_domination() {
        let dirs = [Direction::Minimize, Direction::Minimize];
        let front = pareto_front(&[trial(1, &[1.0, 1.0]), trial(2, &[0.0, 0.0])], &dirs);
        assert_eq!(front[0].id, 2);
    }

    #[test]
    fn equal_vectors_do_not_dominate() {
        let front = pareto_front(&[trial(1, &[0.5, 0.5]), trial(2, &[0.5, 0.5])], &MAX2);
        assert_eq!(front.len(), 2);
        assert!(pareto_front(&[], &MAX2).is_empty());
    }

    #[test]
    fn push_rejects_out_of_order_ids() {
        let mut ds = ObservationDataset::new();
        ds.push(trial(3, &[0.1])).unwrap();
        assert!(ds.push(trial(3, &[0.2])).is_err());
        assert!(ds.push(trial(4, &[f64::NAN])).is_err());
        assert!(ds.push(trial(5, &[0.1, 0.2])).is_err());
        let mut seeded = trial(6, &[0.3]);
        seeded.provenance = Provenance::Seeded;
        assert!(ds.push(seeded).is_err());
    }

    #[test]
    fn jsonl_field_order_is_fixed() {
        let mut ds = ObservationDataset::new();
        ds.push(trial(1, &[0.25])).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "{\"id\":1,\"stage\":0,\"config\":{},\"objective_values\":[0.25],\"provenance\":\"sampled\"}\n"
        );
        assert_eq!(ObservationDataset::read_jsonl(&line).unwrap(), ds);
    }
}
