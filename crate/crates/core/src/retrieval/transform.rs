use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{HpConfig, SearchSpace};

use super::{Bm25Params, Normalization, Query, QueryRequest, Signal};

/// Source of one request field: a constant or a hyperparameter by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Const(f64),
    Param(String),
}

impl Binding {
    fn resolve(&self, key: &str, h: &HpConfig, space: &SearchSpace) -> Result<f64> {
        match self {
            Binding::Const(v) => Ok(*v),
            Binding::Param(name) => {
                let value = h.get(name).ok_or_else(|| {
                    Error::config(key, format!("parameter `{name}` is not assigned in the configuration"))
                })?;
                let spec = space.param(name).ok_or_else(|| {
                    Error::config(key, format!("parameter `{name}` is not in the search space"))
                })?;
                spec.numeric(value).ok_or_else(|| {
                    Error::config(key, format!("parameter `{name}` has no numeric reading"))
                })
            }
        }
    }
}

/// How a configuration shapes each query's request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    /// Signals absent from this map get weight 0.
    pub weights: BTreeMap<Signal, Binding>,
    #[serde(default = "default_candidate_k")]
    pub candidate_k: Binding,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<Binding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Binding>,
}

fn default_candidate_k() -> Binding {
    Binding::Const(100.0)
}

impl TransformSpec {
    fn bindings(&self) -> impl Iterator<Item = (String, &Binding)> {
        self.weights
            .iter()
            .map(|(s, b)| (format!("transform.weights.{s}"), b))
            .chain(std::iter::once(("transform.candidate_k".to_owned(), &self.candidate_k)))
            .chain(self.k1.iter().map(|b| ("transform.k1".to_owned(), b)))
            .chain(self.b.iter().map(|b| ("transform.b".to_owned(), b)))
    }

    /// Checks that every bound parameter exists in `space` and reads as a number.
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        for (key, binding) in self.bindings() {
            match binding {
                Binding::Const(v) if !v.is_finite() => {
                    return Err(Error::config(key, "constant must be finite"));
                }
                Binding::Const(_) => {}
                Binding::Param(name) => {
                    let p = space.param(name).ok_or_else(|| {
                        Error::config(&key, format!("parameter `{name}` is not in the search space"))
                    })?;
                    let numeric = p
                        .grid_values()
                        .is_none_or(|vals| vals.into_iter().all(|v| p.numeric(v).is_some()));
                    if !numeric {
                        return Err(Error::config(
                            key,
                            format!("parameter `{name}` has non-numeric categorical choices"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds the search request for `query` under configuration `h`. Pure.
    pub fn apply<S: Scalar>(
        &self,
        h: &HpConfig,
        query: &Query<S>,
        space: &SearchSpace,
    ) -> Result<QueryRequest<S>> {
        let mut weights = BTreeMap::new();
        for (signal, binding) in &self.weights {
            let w = binding.resolve(&format!("transform.weights.{signal}"), h, space)?;
            weights.insert(signal.clone(), S::from_f64_lossy(w));
        }
        let k = self.candidate_k.resolve("transform.candidate_k", h, space)?.round();
        if k.is_nan() || k < 1.0 {
            return Err(Error::config("transform.candidate_k", format!("resolved to {k}, must be >= 1")));
        }
        let mut bm25 = Bm25Params::default();
        if let Some(b) = &self.k1 {
            bm25.k1 = b.resolve("transform.k1", h, space)?;
        }
        if let Some(b) = &self.b {
            bm25.b = b.resolve("transform.b", h, space)?;
        }
        let request = QueryRequest {
            query_id: query.query_id.clone(),
            weights,
            candidate_k: k as usize,
            normalization: self.normalization,
            bm25,
        };
        request.validate()?;
        Ok(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ParamSpec, Value};

    fn space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0),
            ParamSpec::continuous("unused", 0.0, 1.0),
            ParamSpec::categorical("k", ["10", "20"]),
        ])
    }

    fn spec() -> TransformSpec {
        TransformSpec {
            weights: BTreeMap::from([
                (Signal::Lexical, Binding::Param("a".into())),
                (Signal::Dense, Binding::Const(0.0)),
            ]),
            candidate_k: Binding::Param("k".into()),
            normalization: Normalization::MinMax,
            k1: None,
            b: None,
        }
    }

    fn query() -> Query<f64> {
        Query {
            query_id: "q1".into(),
            tokens: vec!["sofa".into()],
            embedding: None,
            category_id: None,
        }
    }

    fn cfg(a: f64, unused: f64) -> HpConfig {
        HpConfig::new()
            .with("a", Value::Real(a))
            .with("unused", Value::Real(unused))
            .with("k", Value::Cat(1))
    }

    #[test]
    fn binds_weight_from_parameter() {
        let r = spec().apply(&cfg(0.7, 0.1), &query(), &space()).unwrap();
        assert_eq!(r.weights[&Signal::Lexical], 0.7);
        assert_eq!(r.candidate_k, 20);
        assert_eq!(r.query_id, "q1");
    }

    #[test]
    fn all_zero_weights_is_a_config_error() {
        let err = spec().apply(&cfg(0.0, 0.1), &query(), &space()).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn unmapped_parameters_do_not_matter() {
        let a = spec().apply::<f64>(&cfg(0.4, 0.1), &query(), &space()).unwrap();
        let b = spec().apply::<f64>(&cfg(0.4, 0.9), &query(), &space()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_parameter_is_reported() {
        let h = HpConfig::new().with("k", Value::Cat(0));
        let err = spec().apply::<f64>(&h, &query(), &space()).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "transform.weights.lexical"),
            other => panic!("{other}"),
        }
        let mut bad = spec();
        bad.weights.insert(Signal::Dense, Binding::Param("nope".into()));
        assert!(bad.validate(&space()).is_err());
        assert!(spec().validate(&space()).is_ok());
    }

    #[test]
    fn parses_from_toml() {
        let spec: TransformSpec = toml::from_str(
            r#"
            candidate_k = 50
            normalization = "min-max"
            [weights]
            lexical = "w_lex"
            "popularity.views" = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(spec.candidate_k, Binding::Const(50.0));
        assert_eq!(
            spec.weights[&Signal::Popularity("views".into())],
            Binding::Const(0.5)
        );
    }
}
