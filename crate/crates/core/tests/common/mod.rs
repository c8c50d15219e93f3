#![allow(dead_code)]

use std::collections::BTreeMap;

use rankopt::datagen::{self, GeneratedData, GeneratorSpec, SALES_FEATURE};
use rankopt::meta::CumulativeSettings;
use rankopt::objectives::ObjectiveSpec;
use rankopt::retrieval::{Binding, Normalization, Signal, TransformSpec};
use rankopt::sampler::{SamplerSpec, TpeSettings};
use rankopt::study::{best_weighted, optimize, study_rng, Study};
use rankopt::{Direction, Evaluator, ObservationDataset, ParamSpec, SearchSpace};

pub const WEIGHTS: [f64; 2] = [0.5, 0.5];

pub fn popularity() -> Signal {
    Signal::Popularity(SALES_FEATURE.into())
}

/// Three signal weights, each in [0.05, 1].
pub fn space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::continuous("w_lexical", 0.05, 1.0),
        ParamSpec::continuous("w_dense", 0.05, 1.0),
        ParamSpec::continuous("w_popularity", 0.05, 1.0),
    ])
}

pub fn transform() -> TransformSpec {
    TransformSpec {
        weights: BTreeMap::from([
            (Signal::Lexical, Binding::Param("w_lexical".into())),
            (Signal::Dense, Binding::Param("w_dense".into())),
            (popularity(), Binding::Param("w_popularity".into())),
        ]),
        candidate_k: Binding::Const(20.0),
        normalization: Normalization::MinMax,
        k1: None,
        b: None,
    }
}

pub fn ctr() -> ObjectiveSpec {
    ObjectiveSpec::new(
        "ctr",
        0.03,
        vec!["ndcg@10".parse().unwrap(), "precision@10".parse().unwrap()],
    )
}

pub fn ctcvr() -> ObjectiveSpec {
    ObjectiveSpec::new(
        "ctcvr",
        0.003,
        vec!["ndcg@10".parse().unwrap(), "precision@10".parse().unwrap()],
    )
}

/// Clicks follow lexical and dense match; conversion follows sales popularity.
pub fn generator(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        conversion_weights: BTreeMap::from([(Signal::Dense, 0.3), (popularity(), 0.7)]),
        ..GeneratorSpec::default()
    }
}

pub struct Bench {
    pub data: GeneratedData,
    pub train: Evaluator,
    pub meta: Evaluator,
}

impl Bench {
    pub fn new(spec: &GeneratorSpec, specs: Vec<ObjectiveSpec>) -> Bench {
        let data = datagen::generate(spec).unwrap();
        let train = datagen::evaluator_for(&data, false, specs.clone(), transform(), space()).unwrap();
        let meta = datagen::evaluator_for(&data, true, specs, transform(), space()).unwrap();
        Bench { data, train, meta }
    }

    pub fn planted(seed: u64) -> Bench {
        Bench::new(&generator(seed), vec![ctr(), ctcvr()])
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.train.specs().iter().map(|s| s.direction).collect()
    }

    /// One optimization stage of `budget` trials on the training split.
    pub fn optimize(&self, sampler: &SamplerSpec, weights: &[f64], budget: usize, seed: u64) -> ObservationDataset {
        let s = sampler.build(weights).unwrap();
        let mut ds = ObservationDataset::new();
        let mut next_id = 1;
        let mut rng = study_rng(seed);
        optimize(
            s.as_ref(),
            &space(),
            &self.train,
            &self.directions(),
            &mut ds,
            0,
            budget,
            &mut next_id,
            &mut rng,
        )
        .unwrap();
        ds
    }

    pub fn best(&self, ds: &ObservationDataset, weights: &[f64]) -> f64 {
        best_weighted(ds, weights, &self.directions()).unwrap().unwrap().0
    }

    pub fn study(&self, sampler: SamplerSpec, stages: Vec<usize>, seed: u64, parallelism: usize) -> Study<f64> {
        Study {
            space: space(),
            sampler,
            train: self.train.clone(),
            meta: self.meta.clone(),
            weights: WEIGHTS.to_vec(),
            top_n: 10,
            cumulative: CumulativeSettings {
                seed_quantile: vec![0.8, 0.8],
                max_seeds: 20,
                stages,
            },
            seed,
            parallelism,
            allow_identity_split: false,
        }
    }
}

pub fn tpe() -> SamplerSpec {
    SamplerSpec::Tpe {
        mode: Default::default(),
        settings: TpeSettings::default(),
    }
}
