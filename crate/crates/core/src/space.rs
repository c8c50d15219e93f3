//! Hyperparameter search spaces and sampled configurations.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    #[serde(alias = "logarithmic")]
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical { choices: Vec<String> },
    Grid { points: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
    #[serde(default)]
    pub scale: Scale,
}

/// One assigned hyperparameter value.
///
/// Categorical values are stored as an index into the declared choices.
/// Grid values hold the grid point itself.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Real(f64),
    Int(i64),
    Cat(usize),
}

// Reals compare bitwise so that equality agrees with hashing.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Cat(a), Value::Cat(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Real(v) => {
                0u8.hash(state);
                v.to_bits().hash(state);
            }
            Value::Int(v) => {
                1u8.hash(state);
                v.hash(state);
            }
            Value::Cat(v) => {
                2u8.hash(state);
                v.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Cat(v) => write!(f, "#{v}"),
        }
    }
}

/// A sampled configuration: one value per parameter, in search-space order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HpConfig {
    pub assignments: IndexMap<String, Value>,
}

impl Hash for HpConfig {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for (k, v) in &self.assignments {
            k.hash(state);
            v.hash(state);
        }
    }
}

impl HpConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.assignments.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.assignments.get(name).copied()
    }

    /// Human-readable rendering that resolves categorical labels.
    pub fn describe(&self, space: &SearchSpace) -> String {
        self.assignments
            .iter()
            .map(|(name, value)| {
                let shown = match (space.param(name).map(|p| &p.domain), value) {
                    (Some(Domain::Categorical { choices }), Value::Cat(i)) => {
                        choices.get(*i).cloned().unwrap_or_else(|| value.to_string())
                    }
                    _ => value.to_string(),
                };
                format!("{name}={shown}")
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl ParamSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Continuous { lo, hi },
            scale: Scale::Linear,
        }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Integer { lo, hi },
            scale: Scale::Linear,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
            scale: Scale::Linear,
        }
    }

    pub fn grid(name: impl Into<String>, points: impl IntoIterator<Item = f64>) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Grid {
                points: points.into_iter().collect(),
            },
            scale: Scale::Linear,
        }
    }

    pub fn log(mut self) -> Self {
        self.scale = Scale::Log;
        self
    }

    fn violations(&self, out: &mut Vec<String>) {
        let name = &self.name;
        match &self.domain {
            Domain::Continuous { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    out.push(format!("{name}: bounds must be finite"));
                } else if lo >= hi {
                    out.push(format!("{name}: lo < hi violated ({lo} >= {hi})"));
                }
                if self.scale == Scale::Log && (lo.is_nan() || *lo <= 0.0) {
                    out.push(format!("{name}: log scale requires lo > 0"));
                }
            }
            Domain::Integer { lo, hi } => {
                if lo >= hi {
                    out.push(format!("{name}: lo < hi violated ({lo} >= {hi})"));
                }
                if self.scale == Scale::Log && *lo <= 0 {
                    out.push(format!("{name}: log scale requires lo > 0"));
                }
            }
            Domain::Categorical { choices } => {
                if choices.is_empty() {
                    out.push(format!("{name}: categorical choice list is empty"));
                }
                let unique: HashSet<&String> = choices.iter().collect();
                if unique.len() != choices.len() {
                    out.push(format!("{name}: categorical choices are not unique"));
                }
                if self.scale == Scale::Log {
                    out.push(format!("{name}: log scale applies to ranges only"));
                }
            }
            Domain::Grid { points } => {
                if points.is_empty() {
                    out.push(format!("{name}: grid point list is empty"));
                }
                if points.iter().any(|p| !p.is_finite()) {
                    out.push(format!("{name}: grid points must be finite"));
                }
                let unique: HashSet<u64> = points.iter().map(|p| p.to_bits()).collect();
                if unique.len() != points.len() {
                    out.push(format!("{name}: grid points are not unique"));
                }
                if self.scale == Scale::Log {
                    out.push(format!("{name}: log scale applies to ranges only"));
                }
            }
        }
    }

    /// Whether `value` lies in this parameter's domain.
    pub fn contains(&self, value: Value) -> bool {
        match (&self.domain, value) {
            (Domain::Continuous { lo, hi }, Value::Real(v)) => v.is_finite() && *lo <= v && v <= *hi,
            (Domain::Integer { lo, hi }, Value::Int(v)) => *lo <= v && v <= *hi,
            (Domain::Categorical { choices }, Value::Cat(i)) => i < choices.len(),
            (Domain::Grid { points }, Value::Real(v)) => {
                points.iter().any(|p| p.to_bits() == v.to_bits())
            }
            _ => false,
        }
    }

    /// Every value of a finite domain in declaration order; `None` for continuous ranges.
    pub fn grid_values(&self) -> Option<Vec<Value>> {
        match &self.domain {
            Domain::Continuous { .. } => None,
            Domain::Integer { lo, hi } => Some((*lo..=*hi).map(Value::Int).collect()),
            Domain::Categorical { choices } => Some((0..choices.len()).map(Value::Cat).collect()),
            Domain::Grid { points } => Some(points.iter().copied().map(Value::Real).collect()),
        }
    }

    /// Number of distinct values, `None` when continuous.
    pub fn cardinality(&self) -> Option<u128> {
        match &self.domain {
            Domain::Continuous { .. } => None,
            Domain::Integer { lo, hi } => Some((*hi as i128 - *lo as i128 + 1).max(0) as u128),
            Domain::Categorical { choices } => Some(choices.len() as u128),
            Domain::Grid { points } => Some(points.len() as u128),
        }
    }

    /// Numeric reading of a value, used when a parameter feeds a request field.
    ///
    /// Categorical labels must parse as numbers.
    pub fn numeric(&self, value: Value) -> Option<f64> {
        match (&self.domain, value) {
            (_, Value::Real(v)) => Some(v),
            (_, Value::Int(v)) => Some(v as f64),
            (Domain::Categorical { choices }, Value::Cat(i)) => {
                choices.get(i).and_then(|c| c.trim().parse().ok())
            }
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match &self.domain {
            Domain::Continuous { lo, hi } => {
                let u: f64 = rng.random();
                let v = match self.scale {
                    Scale::Linear => lo + u * (hi - lo),
                    Scale::Log => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
                };
                Value::Real(v.clamp(*lo, *hi))
            }
            Domain::Integer { lo, hi } => match self.scale {
                Scale::Linear => Value::Int(rng.random_range(*lo..=*hi)),
                Scale::Log => {
                    let (a, b) = ((*lo as f64 - 0.5).ln(), (*hi as f64 + 0.5).ln());
                    let u: f64 = rng.random();
                    let v = (a + u * (b - a)).exp().round() as i64;
                    Value::Int(v.clamp(*lo, *hi))
                }
            },
            Domain::Categorical { choices } => Value::Cat(rng.random_range(0..choices.len())),
            Domain::Grid { points } => Value::Real(points[rng.random_range(0..points.len())]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Self {
        Self { params }
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Lists every violated invariant; empty means the space is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.params.is_empty() {
            out.push("search space has no parameters".to_owned());
        }
        let mut seen = HashSet::new();
        for p in &self.params {
            if !seen.insert(p.name.as_str()) {
                out.push(format!("{}: duplicate parameter name", p.name));
            }
            p.violations(&mut out);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let report = self.violations();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::Space(report))
        }
    }

    /// Whether `config` assigns exactly one in-domain value to every parameter, in order.
    pub fn contains(&self, config: &HpConfig) -> bool {
        config.assignments.len() == self.params.len()
            && self
                .params
                .iter()
                .zip(&config.assignments)
                .all(|(p, (name, v))| *name == p.name && p.contains(*v))
    }

    /// Draws every parameter independently and uniformly (log-uniform on log scales).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> HpConfig {
        HpConfig {
            assignments: self
                .params
                .iter()
                .map(|p| (p.name.clone(), p.sample(rng)))
                .collect(),
        }
    }

    /// Size of the Cartesian product, `None` if any parameter is continuous.
    pub fn grid_size(&self) -> Option<u128> {
        self.params
            .iter()
            .try_fold(1u128, |acc, p| p.cardinality().map(|c| acc.saturating_mul(c)))
    }

    /// Replaces every continuous range, and every integer range wider than
    /// `resolution`, by `resolution` evenly spaced grid points (geometric on log scales).
    pub fn discretize(&self, resolution: usize) -> Result<SearchSpace> {
        if resolution < 2 {
            return Err(Error::config("resolution", "grid resolution must be at least 2"));
        }
        let steps = |lo: f64, hi: f64, scale: Scale| -> Vec<f64> {
            (0..resolution)
                .map(|i| {
                    let t = i as f64 / (resolution - 1) as f64;
                    match scale {
                        Scale::Linear => lo + t * (hi - lo),
                        Scale::Log => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
                    }
                })
                .collect()
        };
        let params = self
            .params
            .iter()
            .map(|p| match &p.domain {
                Domain::Continuous { lo, hi } => ParamSpec::grid(p.name.clone(), steps(*lo, *hi, p.scale)),
                Domain::Integer { lo, hi } if (*hi - *lo + 1) as usize > resolution => {
                    let mut pts: Vec<f64> = steps(*lo as f64, *hi as f64, p.scale)
                        .into_iter()
                        .map(f64::round)
                        .collect();
                    pts.dedup();
                    ParamSpec::grid(p.name.clone(), pts)
                }
                _ => p.clone(),
            })
            .collect();
        Ok(SearchSpace { params })
    }
}
