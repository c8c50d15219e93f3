//! TOML study configuration.
//!
//! ```toml
//! seed = 7
//! parallelism = 4          # optional, defaults to the available cores
//! out_dir = "out"          # optional
//! scalar = "f64"           # or "f32"
//!
//! [data]                   # paths are relative to this file
//! corpus = "data/corpus.jsonl"
//! queries = "data/queries.jsonl"
//! train_log = "data/train_log.csv"
//! meta_log = "data/meta_log.csv"
//!
//! [[space.params]]
//! name = "w_lexical"
//! type = "continuous"      # continuous | integer | categorical | grid
//! lo = 0.05
//! hi = 1.0
//! scale = "linear"         # or "log"
//!
//! [sampler]
//! name = "tpe"             # random | grid | tpe
//! mode = "separate"        # or "weighted-sum"
//! gamma = 0.25
//!
//! [[objectives]]
//! name = "ctr"
//! weight = 1.0
//! positive_threshold = 0.03
//! metrics = ["ndcg@10", "precision@10"]
//!
//! [transform]
//! normalization = "min-max"
//! candidate_k = 50
//! weights = { lexical = "w_lexical", dense = 0.5 }
//!
//! [cumulative]
//! stages = [100]
//! seed_quantile = 0.8      # one value for every objective, or a list
//! max_seeds = 20
//!
//! [selection]
//! top_n = 10
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::{Table, Value as TomlValue};

use crate::error::{Error, Result};
use crate::meta::CumulativeSettings;
use crate::objectives::{InteractionLog, ObjectiveSpec};
use crate::retrieval::{read_jsonl, Document, Index, Query, TransformSpec};
use crate::sampler::SamplerSpec;
use crate::scalar::Scalar;
use crate::space::SearchSpace;
use crate::study::{Evaluator, Study};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub train_log: PathBuf,
    pub meta_log: PathBuf,
}

impl DataPaths {
    fn entries(&self) -> [(&'static str, &PathBuf); 4] {
        [
            ("data.corpus", &self.corpus),
            ("data.queries", &self.queries),
            ("data.train_log", &self.train_log),
            ("data.meta_log", &self.meta_log),
        ]
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.corpus, &mut self.queries, &mut self.train_log, &mut self.meta_log] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEntry {
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(flatten)]
    pub spec: ObjectiveSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantiles {
    One(f64),
    PerObjective(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CumulativeConfig {
    pub stages: Vec<usize>,
    pub seed_quantile: Quantiles,
    pub max_seeds: usize,
}

impl Default for CumulativeConfig {
    fn default() -> Self {
        Self {
            stages: vec![100],
            seed_quantile: Quantiles::One(0.8),
            max_seeds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub top_n: usize,
    /// Lets the meta log reuse training query ids.
    pub allow_identity_split: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            top_n: 10,
            allow_identity_split: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub scalar: ScalarKind,
    pub data: DataPaths,
    pub space: SearchSpace,
    pub sampler: SamplerSpec,
    pub objectives: Vec<ObjectiveEntry>,
    pub transform: TransformSpec,
    #[serde(default)]
    pub cumulative: CumulativeConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
}

/// Line (1-based) of the first assignment or table header naming the last segment of `key`.
fn locate(text: &str, key: &str) -> Option<usize> {
    let leaf = key
        .rsplit('.')
        .find(|s| !s.is_empty() && !s.ends_with(']') && s.parse::<usize>().is_err())?;
    let leaf = leaf.split('[').next()?;
    text.lines().position(|line| {
        let l = line.trim_start();
        l.strip_prefix(leaf).is_some_and(|rest| rest.trim_start().starts_with('='))
            || (l.starts_with('[') && l.trim_end_matches(']').ends_with(leaf))
    })
    .map(|i| i + 1)
}

fn toml_error(source: &str, e: impl std::fmt::Display) -> Error {
    Error::config(source, e.to_string().trim_end().to_owned())
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn override_value(raw: &str) -> TomlValue {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| TomlValue::String(raw.to_owned()))
}

fn set_path(node: &mut TomlValue, path: &str, segments: &[&str], value: TomlValue) -> Result<()> {
    let (seg, rest) = segments.split_first().expect("non-empty path");
    let slot = match node {
        TomlValue::Table(t) if rest.is_empty() => {
            t.insert(seg.to_string(), value);
            return Ok(());
        }
        TomlValue::Table(t) => t
            .entry(seg.to_string())
            .or_insert_with(|| TomlValue::Table(Table::new())),
        TomlValue::Array(a) => {
            let i: usize = seg
                .parse()
                .map_err(|_| Error::config(path, format!("`{seg}` is not an array index")))?;
            let len = a.len();
            a.get_mut(i)
                .ok_or_else(|| Error::config(path, format!("index {i} out of range ({len} entries)")))?
        }
        _ => return Err(Error::config(path, format!("cannot descend into `{seg}`"))),
    };
    if rest.is_empty() {
        *slot = value;
        Ok(())
    } else {
        set_path(slot, path, rest, value)
    }
}

/// Applies one `key=value` override. Keys are dot-separated; numeric segments index arrays.
pub fn apply_override(root: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let path = path.trim();
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(path, "empty segment in override key"));
    }
    let mut node = TomlValue::Table(std::mem::take(root));
    let outcome = set_path(&mut node, path, &segments, override_value(raw.trim()));
    if let TomlValue::Table(t) = node {
        *root = t;
    }
    outcome
}

impl StudyConfig {
    /// Parses and validates a config. Relative data and output paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self> {
        let mut config: StudyConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| toml_error("config", e))?
        } else {
            let mut table: Table = text.parse().map_err(|e| toml_error("config", e))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            table.try_into().map_err(|e| toml_error("config", e))?
        };
        config.data.resolve(base_dir);
        if let Some(out) = &mut config.out_dir {
            *out = base_dir.join(&*out);
        }
        config.validate().map_err(|e| match e {
            Error::Config { key, message } => match locate(text, &key) {
                Some(line) => Error::config(key, format!("{message} (line {line})")),
                None => Error::config(key, message),
            },
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, overrides)
    }

    /// Checks every cross-field invariant. Errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.objectives.is_empty() {
            return Err(Error::config("objectives", "at least one objective is required"));
        }
        for (i, o) in self.objectives.iter().enumerate() {
            let key = format!("objectives[{i}]");
            o.spec.validate(&key)?;
            if !(o.weight >= 0.0 && o.weight.is_finite()) {
                return Err(Error::config(format!("{key}.weight"), "must be finite and non-negative"));
            }
            if self.objectives[..i].iter().any(|p| p.spec.name == o.spec.name) {
                return Err(Error::config(format!("{key}.name"), format!("duplicate objective `{}`", o.spec.name)));
            }
        }
        if self.objectives.iter().map(|o| o.weight).sum::<f64>() <= 0.0 {
            return Err(Error::config("objectives.weight", "weights must not all be zero"));
        }
        self.transform.validate(&self.space)?;
        self.sampler.build(&self.weights())?;
        self.cumulative_settings()?.validate(self.objectives.len())?;
        if self.selection.top_n == 0 {
            return Err(Error::config("selection.top_n", "must be at least 1"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("parallelism", "must be at least 1"));
        }
        for (key, path) in self.data.entries() {
            if !path.is_file() {
                return Err(Error::config(key, format!("file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Objective weights scaled to sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.objectives.iter().map(|o| o.weight).sum();
        self.objectives.iter().map(|o| o.weight / total).collect()
    }

    pub fn specs(&self) -> Vec<ObjectiveSpec> {
        self.objectives.iter().map(|o| o.spec.clone()).collect()
    }

    pub fn cumulative_settings(&self) -> Result<CumulativeSettings> {
        let m = self.objectives.len();
        let seed_quantile = match &self.cumulative.seed_quantile {
            Quantiles::One(q) => vec![*q; m],
            Quantiles::PerObjective(qs) => qs.clone(),
        };
        Ok(CumulativeSettings {
            seed_quantile,
            max_seeds: self.cumulative.max_seeds,
            stages: self.cumulative.stages.clone(),
        })
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
        })
    }

    /// Loads the data files and assembles a runnable study.
    pub fn build_study<S: Scalar>(&self) -> Result<Study<S>> {
        let (train, meta) = self.evaluators::<S>()?;
        Ok(Study {
            space: self.space.clone(),
            sampler: self.sampler.clone(),
            train,
            meta,
            weights: self.weights(),
            top_n: self.selection.top_n,
            cumulative: self.cumulative_settings()?,
            seed: self.seed,
            parallelism: self.parallelism(),
            allow_identity_split: self.selection.allow_identity_split,
        })
    }

    /// Training and meta evaluators. Each split evaluates the queries that appear in its log.
    pub fn evaluators<S: Scalar>(&self) -> Result<(Evaluator<S>, Evaluator<S>)> {
        let corpus: Vec<Document<S>> = read_jsonl(&self.data.corpus)?;
        let queries: Vec<Query<S>> = read_jsonl(&self.data.queries)?;
        let index = Arc::new(Index::build(corpus)?);
        let split = |log_path: &Path| -> Result<Evaluator<S>> {
            let log = InteractionLog::load(log_path)?;
            let ids = log.query_ids();
            let subset: Vec<Query<S>> = queries.iter().filter(|q| ids.contains(&q.query_id)).cloned().collect();
            if subset.is_empty() {
                return Err(Error::data(
                    log_path.display().to_string(),
                    "no query in the log appears in the queries file",
                ));
            }
            Evaluator::new(
                Arc::clone(&index),
                subset,
                &log,
                self.specs(),
                self.transform.clone(),
                self.space.clone(),
            )
        };
        Ok((split(&self.data.train_log)?, split(&self.data.meta_log)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3

[data]
corpus = "corpus.jsonl"
queries = "queries.jsonl"
train_log = "train_log.csv"
meta_log = "meta_log.csv"

[[space.params]]
name = "w_lex"
type = "continuous"
lo = 0.05
hi = 1.0

[sampler]
name = "tpe"
gamma = 0.3

[[objectives]]
name = "ctr"
weight = 3.0
positive_threshold = 0.03
metrics = ["ndcg@10"]

[[objectives]]
name = "ctcvr"
positive_threshold = 0.003
metrics = ["precision@10"]

[transform]
weights = { lexical = "w_lex", dense = 0.5 }
"#;

    fn with_files() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["corpus.jsonl", "queries.jsonl", "train_log.csv", "meta_log.csv"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        dir
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let dir = with_files();
        let c = StudyConfig::parse(MINIMAL, dir.path(), &[]).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.weights(), vec![0.75, 0.25]);
        assert_eq!(c.cumulative_settings().unwrap().seed_quantile, vec![0.8, 0.8]);
        assert_eq!(c.selection.top_n, 10);
        assert_eq!(c.objectives[1].spec.min_impressions, 10);
        match &c.sampler {
            SamplerSpec::Tpe { settings, .. } => assert_eq!(settings.gamma, 0.3),
            other => panic!("{other:?}"),
        }
        assert!(c.data.corpus.starts_with(dir.path()));
    }

    #[test]
    fn overrides_edit_the_tree() {
        let dir = with_files();
        let overrides = vec![
            "seed=11".to_owned(),
            "objectives.1.weight=1".to_owned(),
            "cumulative.stages=[5, 5]".to_owned(),
            r#"sampler={ name = "random" }"#.to_owned(),
        ];
        let c = StudyConfig::parse(MINIMAL, dir.path(), &overrides).unwrap();
        assert_eq!(c.seed, 11);
        assert_eq!(c.weights(), vec![0.75, 0.25]);
        assert_eq!(c.cumulative.stages, vec![5, 5]);
        assert_eq!(c.sampler, SamplerSpec::Random);
    }

    #[test]
    fn errors_name_the_key() {
        let dir = with_files();
        let bad = MINIMAL.replace("\"w_lex\", dense", "\"missing\", dense");
        let err = StudyConfig::parse(&bad, dir.path(), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "transform.weights.lexical"), "{err}");

        let bad = MINIMAL.replace("gamma = 0.3", "gamma = 0.3\nbogus = 1");
        let err = StudyConfig::parse(&bad, dir.path(), &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        let bad = MINIMAL.replace("weight = 3.0", "weight = -1.0");
        let err = StudyConfig::parse(&bad, dir.path(), &[]).unwrap_err();
        assert!(err.to_string().contains("objectives[0].weight"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");

        let err = StudyConfig::parse(MINIMAL, Path::new("/nonexistent"), &[]).unwrap_err();
        assert!(err.to_string().contains("data.corpus"), "{err}");
    }

    #[test]
    fn quantile_list_must_match_objectives() {
        let dir = with_files();
        let o = vec!["cumulative.seed_quantile=[0.5]".to_owned()];
        let err = StudyConfig::parse(MINIMAL, dir.path(), &o).unwrap_err();
        assert!(err.to_string().contains("cumulative.seed_quantile"), "{err}");
    }

    #[test]
    fn override_values_fall_back_to_strings() {
        let mut t = Table::new();
        apply_override(&mut t, "out_dir=results/a").unwrap();
        apply_override(&mut t, "selection.top_n=4").unwrap();
        assert_eq!(t["out_dir"].as_str(), Some("results/a"));
        assert_eq!(t["selection"]["top_n"].as_integer(), Some(4));
        assert!(apply_override(&mut t, "novalue").is_err());
    }
}
