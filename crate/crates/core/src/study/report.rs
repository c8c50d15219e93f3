use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{criteria_names, MetaScores, TallyEntry, VoteTally};
use crate::objectives::ObjectiveEvaluation;
use crate::sampler::{weighted_sum_reduce, SamplerSpec};
use crate::space::{Domain, SearchSpace, Value};
use crate::trial::{Direction, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopIds {
    pub criterion: String,
    pub trial_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub index: usize,
    pub budget: usize,
    /// Trials proposed by the sampler in this stage.
    pub sampled: usize,
    /// Trials carried in from the previous stage.
    pub seeded: usize,
    pub seed_fallback: bool,
    pub seed_gammas: Vec<f64>,
    /// Largest weighted score over every trial of the stage, seeded included.
    pub best_weighted: f64,
    pub best_trial_id: u64,
    /// Per objective, the best value of the stage in larger-is-better orientation.
    pub best_objectives: Vec<f64>,
    pub pareto_front: Vec<u64>,
    pub top_sets: Vec<TopIds>,
    pub meta_scores: MetaScores,
    pub tally: VoteTally,
    pub winner: TallyEntry,
    pub winner_meta: ObjectiveEvaluation<f64>,
    /// Weighted meta score of the training-best trial.
    pub train_best_meta_weighted: Option<f64>,
    pub trials: Vec<Trial>,
}

impl StageReport {
    pub fn trial(&self, id: u64) -> Option<&Trial> {
        self.trials.iter().find(|t| t.id == id)
    }

    /// Weighted meta score of the elected configuration.
    pub fn winner_meta_weighted(&self) -> f64 {
        *self.winner.scores.last().expect("weighted criterion present")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub sampler: SamplerSpec,
    pub objectives: Vec<String>,
    pub directions: Vec<Direction>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub space: SearchSpace,
    pub stages: Vec<StageReport>,
    /// Winner of the final stage.
    pub winner: TallyEntry,
}

fn value_cell(space: &SearchSpace, name: &str, value: Value) -> String {
    match (space.param(name).map(|p| &p.domain), value) {
        (Some(Domain::Categorical { choices }), Value::Cat(i)) => {
            choices.get(i).cloned().unwrap_or_else(|| value.to_string())
        }
        (_, Value::Cat(i)) => i.to_string(),
        _ => value.to_string(),
    }
}

impl StudyReport {
    pub fn all_trials(&self) -> impl Iterator<Item = &Trial> {
        self.stages.iter().flat_map(|s| &s.trials)
    }

    pub fn weighted(&self, trial: &Trial) -> Result<f64> {
        weighted_sum_reduce(&trial.objective_values, &self.weights, &self.directions)
    }

    /// One row per trial of every stage, parameters and objectives as columns.
    pub fn trials_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["stage".to_owned(), "id".into(), "provenance".into()];
        header.extend(self.space.params.iter().map(|p| p.name.clone()));
        header.extend(self.objectives.iter().cloned());
        header.push("weighted".into());
        w.write_record(&header)?;
        for t in self.all_trials() {
            let mut row = vec![
                t.stage.to_string(),
                t.id.to_string(),
                format!("{:?}", t.provenance).to_lowercase(),
            ];
            row.extend(
                self.space
                    .params
                    .iter()
                    .map(|p| t.config.get(&p.name).map_or(String::new(), |v| value_cell(&self.space, &p.name, v))),
            );
            row.extend(t.objective_values.iter().map(f64::to_string));
            row.push(self.weighted(t)?.to_string());
            w.write_record(&row)?;
        }
        csv_string(w)
    }

    /// Writes `report.json`, `trials.csv`, `trials.jsonl` and `pareto.jsonl` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut jsonl = String::new();
        for t in self.all_trials() {
            jsonl.push_str(&serde_json::to_string(t)?);
            jsonl.push('\n');
        }
        let mut pareto = String::new();
        for stage in &self.stages {
            for id in &stage.pareto_front {
                let t = stage.trial(*id).expect("front ids come from the stage");
                pareto.push_str(&serde_json::to_string(t)?);
                pareto.push('\n');
            }
        }
        let files = [
            ("report.json", serde_json::to_string_pretty(self)? + "\n"),
            ("trials.csv", self.trials_csv()?),
            ("trials.jsonl", jsonl),
            ("pareto.jsonl", pareto),
        ];
        let mut written = Vec::with_capacity(files.len());
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path.display().to_string(), e.to_string()))
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::data("csv", e.to_string()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Objectives as rows, metrics as columns, plus the per-objective value.
fn metric_grid(out: &mut String, eval: &ObjectiveEvaluation<f64>) {
    let mut metrics: Vec<String> = Vec::new();
    for o in &eval.objectives {
        for (m, _) in &o.per_metric {
            if !metrics.contains(m) {
                metrics.push(m.clone());
            }
        }
    }
    let _ = write!(out, "    {:<12}", "objective");
    for m in &metrics {
        let _ = write!(out, " {m:>14}");
    }
    let _ = writeln!(out, " {:>10}", "value");
    for o in &eval.objectives {
        let _ = write!(out, "    {:<12}", o.name);
        for m in &metrics {
            let v = o.per_metric.iter().find(|(n, _)| n == m).and_then(|(_, v)| *v);
            let _ = write!(out, " {:>14}", fmt_opt(v));
        }
        let _ = writeln!(out, " {:>10.4}", o.value);
    }
}

/// Plain-text summary of a study.
pub fn render_text(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sampler: {}  seed: {}", report.sampler.name(), report.seed);
    let objectives: Vec<String> = report
        .objectives
        .iter()
        .zip(&report.weights)
        .map(|(n, w)| format!("{n} (w={w:.3})"))
        .collect();
    let _ = writeln!(out, "objectives: {}", objectives.join(", "));
    let criteria = criteria_names(&report.objectives);
    for stage in &report.stages {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "stage {}: budget {}, sampled {}, seeded {}{}",
            stage.index,
            stage.budget,
            stage.sampled,
            stage.seeded,
            if stage.seed_fallback { " (seed fallback)" } else { "" }
        );
        let _ = writeln!(
            out,
            "  best weighted {:.4} (trial {}), pareto front {} trials",
            stage.best_weighted,
            stage.best_trial_id,
            stage.pareto_front.len()
        );
        let _ = write!(out, "  {:>8} {:>6}", "trial", "votes");
        for c in &criteria {
            let _ = write!(out, " {c:>10}");
        }
        let _ = writeln!(out);
        let mut entries: Vec<&TallyEntry> = stage.tally.entries.iter().collect();
        entries.sort_by(|a, b| b.votes.cmp(&a.votes).then(a.trial_id.cmp(&b.trial_id)));
        for e in entries {
            let _ = write!(out, "  {:>8} {:>6}", e.trial_id, e.votes);
            for s in &e.scores {
                let _ = write!(out, " {s:>10.4}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "  winner: trial {} with {} votes: {}",
            stage.winner.trial_id,
            stage.winner.votes,
            stage.winner.config.describe(&report.space)
        );
        metric_grid(&mut out, &stage.winner_meta);
    }
    out
}

/// One row per (stage, criterion): training best and elected winner under that criterion.
pub fn render_csv(report: &StudyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "stage",
        "criterion",
        "train_best_trial",
        "train_best_score",
        "winner_trial",
        "winner_votes",
        "winner_meta_score",
    ])?;
    for stage in &report.stages {
        for (c, top) in stage.top_sets.iter().enumerate() {
            let best = top.trial_ids.first().and_then(|id| stage.trial(*id));
            let best_score = match best {
                Some(t) if c < report.objectives.len() => {
                    Some(report.directions[c].oriented(t.objective_values[c]))
                }
                Some(t) => Some(report.weighted(t)?),
                None => None,
            };
            w.write_record([
                stage.index.to_string(),
                top.criterion.clone(),
                best.map_or(String::new(), |t| t.id.to_string()),
                best_score.map_or(String::new(), |v| v.to_string()),
                stage.winner.trial_id.to_string(),
                stage.winner.votes.to_string(),
                stage.winner.scores.get(c).map_or(String::new(), f64::to_string),
            ])?;
        }
    }
    csv_string(w)
}
