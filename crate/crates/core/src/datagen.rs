//! Synthetic corpus, queries and interaction logs with a planted preference
//! model, plus an exhaustive grid oracle over the same evaluation path.
//!
//! Items and queries share topic clusters: a query's tokens come from its
//! topic's term distribution and its embedding sits near the topic center.
//! Each `(query, item)` pair gets a latent relevance, a weighted blend of the
//! per-query standardized retrieval signals. Clicks, carts and purchases are
//! then drawn through a binomial funnel.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Normal, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Counts, InteractionLog};
use crate::retrieval::{self, Bm25Params, Document, Index, Normalization, Query, QueryRequest, Signal};
use crate::sampler::{grid_configs, weighted_sum_reduce};
use crate::scalar::Scalar;
use crate::space::HpConfig;
use crate::study::Evaluator;
use crate::trial::Direction;

/// Name of the popularity feature every generated item carries.
pub const SALES_FEATURE: &str = "sales";
pub const VIEWS_FEATURE: &str = "views";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Funnel {
    pub base_ctr: f64,
    pub click_to_cart: f64,
    pub cart_to_purchase: f64,
}

impl Default for Funnel {
    fn default() -> Self {
        Self {
            base_ctr: 0.06,
            click_to_cart: 0.25,
            cart_to_purchase: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_items: usize,
    /// Training queries; the meta split gets `n_meta_queries` (default: the same count).
    pub n_queries: usize,
    pub n_meta_queries: Option<usize>,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub n_topics: usize,
    pub tokens_per_item: usize,
    pub tokens_per_query: usize,
    /// Exponent of the power-law term distribution.
    pub zipf_exponent: f64,
    /// Spread of item and query embeddings around their topic center.
    pub topic_spread: f64,
    /// Planted click preference over signals; the optimum the tuner should find.
    pub true_weights: BTreeMap<Signal, f64>,
    /// Planted preference for the meta log; defaults to `true_weights`.
    /// Setting it different simulates a shift between the two periods.
    pub meta_true_weights: Option<BTreeMap<Signal, f64>>,
    /// Optional second preference that modulates click-to-cart conversion.
    /// Empty keeps the conversion rates constant.
    pub conversion_weights: BTreeMap<Signal, f64>,
    /// Multiplier applied to the blended relevance before the logistic link.
    pub relevance_scale: f64,
    /// Standard deviation of per-pair noise added to the relevance.
    pub relevance_noise: f64,
    pub funnel: Funnel,
    pub impressions_per_pair: u64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_items: 200,
            n_queries: 50,
            n_meta_queries: None,
            vocab_size: 500,
            embedding_dim: 8,
            n_topics: 10,
            tokens_per_item: 12,
            tokens_per_query: 2,
            zipf_exponent: 1.1,
            topic_spread: 0.7,
            true_weights: BTreeMap::from([
                (Signal::Lexical, 0.5),
                (Signal::Dense, 0.35),
                (Signal::Popularity(SALES_FEATURE.into()), 0.15),
            ]),
            meta_true_weights: None,
            conversion_weights: BTreeMap::new(),
            relevance_scale: 2.0,
            relevance_noise: 0.5,
            funnel: Funnel::default(),
            impressions_per_pair: 200,
            seed: 0,
        }
    }
}

fn check_weights(key: &str, weights: &BTreeMap<Signal, f64>) -> Result<()> {
    if let Some((s, w)) = weights.iter().find(|(_, w)| !w.is_finite()) {
        return Err(Error::config(format!("{key}.{s}"), format!("weight {w} is not finite")));
    }
    Ok(())
}

impl GeneratorSpec {
    pub fn n_meta(&self) -> usize {
        self.n_meta_queries.unwrap_or(self.n_queries)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("n_items", self.n_items),
            ("n_queries", self.n_queries),
            ("n_meta_queries", self.n_meta()),
            ("vocab_size", self.vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("n_topics", self.n_topics),
            ("tokens_per_item", self.tokens_per_item),
            ("tokens_per_query", self.tokens_per_query),
        ];
        if let Some((key, _)) = sizes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::config(*key, "must be at least 1"));
        }
        if self.impressions_per_pair == 0 {
            return Err(Error::config("impressions_per_pair", "must be at least 1"));
        }
        let probs = [
            ("funnel.base_ctr", self.funnel.base_ctr),
            ("funnel.click_to_cart", self.funnel.click_to_cart),
            ("funnel.cart_to_purchase", self.funnel.cart_to_purchase),
        ];
        if let Some((key, p)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(*key, format!("probability {p} outside [0, 1]")));
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return Err(Error::config("zipf_exponent", "must be positive"));
        }
        for (key, v) in [
            ("topic_spread", self.topic_spread),
            ("relevance_scale", self.relevance_scale),
            ("relevance_noise", self.relevance_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        check_weights("true_weights", &self.true_weights)?;
        check_weights("conversion_weights", &self.conversion_weights)?;
        if let Some(w) = &self.meta_true_weights {
            check_weights("meta_true_weights", w)?;
        }
        if self.true_weights.is_empty() {
            return Err(Error::config("true_weights", "at least one signal is required"));
        }
        Ok(())
    }
}

/// Everything [`generate`] produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub corpus: Vec<Document<f64>>,
    /// Training queries followed by meta queries.
    pub queries: Vec<Query<f64>>,
    pub train_log: InteractionLog,
    pub meta_log: InteractionLog,
}

impl GeneratedData {
    pub const FILES: [&'static str; 4] = ["corpus.jsonl", "queries.jsonl", "train_log.csv", "meta_log.csv"];

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths: Vec<PathBuf> = Self::FILES.iter().map(|f| dir.join(f)).collect();
        retrieval::write_jsonl(&paths[0], &self.corpus)?;
        retrieval::write_jsonl(&paths[1], &self.queries)?;
        self.train_log.save(&paths[2])?;
        self.meta_log.save(&paths[3])?;
        Ok(paths)
    }

    /// Queries whose ids appear in `log`.
    pub fn queries_in(&self, log: &InteractionLog) -> Vec<Query<f64>> {
        let ids = log.query_ids();
        self.queries.iter().filter(|q| ids.contains(&q.query_id)).cloned().collect()
    }
}

struct Topic {
    center: Vec<f64>,
    /// Rank-to-term map of the topic's term distribution.
    terms: Vec<usize>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn near<R: Rng>(center: &[f64], spread: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    center.iter().map(|c| c + spread * noise.sample(rng)).collect()
}

fn draw_tokens<R: Rng>(topic: &Topic, zipf: &Zipf<f64>, n: usize, rng: &mut R) -> Vec<String> {
    (0..n)
        .map(|_| {
            let rank = zipf.sample(rng) as usize - 1;
            format!("t{}", topic.terms[rank.min(topic.terms.len() - 1)])
        })
        .collect()
}

/// Standardizes `values` to mean 0 and unit variance; a constant vector maps to zeros.
fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in values.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Blend of standardized signals for every document, in index order.
fn blend(index: &Index<f64>, query: &Query<f64>, weights: &BTreeMap<Signal, f64>) -> Vec<f64> {
    let request = QueryRequest {
        query_id: query.query_id.clone(),
        weights: BTreeMap::new(),
        candidate_k: 1,
        normalization: Normalization::None,
        bm25: Bm25Params::default(),
    };
    let mut total = vec![0.0; index.len()];
    for (signal, &w) in weights {
        let mut values = index.signal(signal, &request, query);
        standardize(&mut values);
        for (t, v) in total.iter_mut().zip(values) {
            *t += w * v;
        }
    }
    total
}

fn binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0)).expect("p in [0, 1]").sample(rng)
}

fn simulate_log<R: Rng>(
    spec: &GeneratorSpec,
    index: &Index<f64>,
    queries: &[Query<f64>],
    click_weights: &BTreeMap<Signal, f64>,
    rng: &mut R,
) -> Result<InteractionLog> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut log = InteractionLog::new();
    for q in queries {
        let click = blend(index, q, click_weights);
        let conversion = (!spec.conversion_weights.is_empty())
            .then(|| blend(index, q, &spec.conversion_weights));
        for (d, doc) in index.docs().iter().enumerate() {
            let relevance = spec.relevance_scale * click[d] + spec.relevance_noise * noise.sample(rng);
            let impressions = spec.impressions_per_pair;
            let clicks = binomial(impressions, spec.funnel.base_ctr * logistic(relevance), rng);
            let p_cart = match &conversion {
                // Centered on the base rate: a neutral item converts at `click_to_cart`.
                Some(c) => 2.0 * spec.funnel.click_to_cart * logistic(spec.relevance_scale * c[d]),
                None => spec.funnel.click_to_cart,
            };
            let carts = binomial(clicks, p_cart, rng);
            let purchases = binomial(carts, spec.funnel.cart_to_purchase, rng);
            log.insert(
                &q.query_id,
                &doc.item_id,
                Counts {
                    impressions,
                    clicks,
                    carts,
                    purchases,
                },
            )?;
        }
    }
    Ok(log)
}

/// Generates a corpus, training and meta queries, and one interaction log per split.
/// Fully determined by `spec`, including its seed.
pub fn generate(spec: &GeneratorSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let zipf = Zipf::new(spec.vocab_size as f64, spec.zipf_exponent)
        .map_err(|e| Error::config("zipf_exponent", e.to_string()))?;
    let sales = LogNormal::<f64>::new(3.0, 1.5).expect("valid log-normal");

    let topics: Vec<Topic> = (0..spec.n_topics)
        .map(|_| {
            let center = (0..spec.embedding_dim).map(|_| unit.sample(&mut rng)).collect();
            let mut terms: Vec<usize> = (0..spec.vocab_size).collect();
            terms.shuffle(&mut rng);
            Topic { center, terms }
        })
        .collect();

    let id_width = (spec.n_items.max(spec.n_queries + spec.n_meta())).to_string().len();
    let corpus: Vec<Document<f64>> = (0..spec.n_items)
        .map(|i| {
            let topic = &topics[rng.random_range(0..topics.len())];
            let tokens = draw_tokens(topic, &zipf, spec.tokens_per_item, &mut rng);
            let embedding = near(&topic.center, spec.topic_spread, &mut rng);
            let sold = sales.sample(&mut rng).floor();
            let viewed = (sold * (1.0 + 20.0 * rng.random::<f64>())).floor();
            Document {
                item_id: format!("i{i:0id_width$}"),
                tokens,
                embedding,
                popularity: BTreeMap::from([
                    (SALES_FEATURE.to_owned(), sold),
                    (VIEWS_FEATURE.to_owned(), viewed),
                ]),
            }
        })
        .collect();
    let index = Index::build(corpus.clone())?;

    let make_queries = |range: std::ops::Range<usize>, rng: &mut ChaCha8Rng| -> Vec<Query<f64>> {
        range
            .map(|q| {
                let topic = &topics[rng.random_range(0..topics.len())];
                Query {
                    query_id: format!("q{q:0id_width$}"),
                    tokens: draw_tokens(topic, &zipf, spec.tokens_per_query, rng),
                    embedding: Some(near(&topic.center, spec.topic_spread, rng)),
                    category_id: None,
                }
            })
            .collect()
    };
    let train_queries = make_queries(0..spec.n_queries, &mut rng);
    let meta_queries = make_queries(spec.n_queries..spec.n_queries + spec.n_meta(), &mut rng);

    let train_log = simulate_log(spec, &index, &train_queries, &spec.true_weights, &mut rng)?;
    let meta_weights = spec.meta_true_weights.as_ref().unwrap_or(&spec.true_weights);
    let meta_log = simulate_log(spec, &index, &meta_queries, meta_weights, &mut rng)?;

    let mut queries = train_queries;
    queries.extend(meta_queries);
    Ok(GeneratedData {
        corpus,
        queries,
        train_log,
        meta_log,
    })
}

/// Default cap on the number of configurations [`oracle_best`] will evaluate.
pub const ORACLE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Weighted-sum argmax; the first in grid order on ties.
    pub best_config: HpConfig,
    pub best_weighted: f64,
    pub best_values: Vec<f64>,
    /// Per objective, the best value over the grid in larger-is-better orientation.
    pub objective_maxima: Vec<f64>,
    pub evaluated: usize,
}

/// Evaluates every configuration of the evaluator's space discretized at
/// `resolution` points per continuous axis, through the same
/// transform, search and scoring path as a study.
pub fn oracle_best<S: Scalar>(
    evaluator: &Evaluator<S>,
    weights: &[f64],
    resolution: usize,
    cap: u128,
) -> Result<OracleResult> {
    let grid = evaluator.space().discretize(resolution)?;
    let configs = grid_configs(&grid, cap)?;
    let directions: Vec<Direction> = evaluator.specs().iter().map(|s| s.direction).collect();
    let values: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|h| evaluator.objective_values(h))
        .collect::<Result<_>>()?;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, z) in values.iter().enumerate() {
        let s = weighted_sum_reduce(z, weights, &directions)?;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    let objective_maxima = (0..directions.len())
        .map(|m| {
            values
                .iter()
                .map(|z| directions[m].oriented(z[m]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(OracleResult {
        best_config: configs[best].clone(),
        best_weighted: best_score,
        best_values: values[best].clone(),
        objective_maxima,
        evaluated: configs.len(),
    })
}

/// Convenience wrapper building an [`Evaluator`] from generated data for one split.
pub fn evaluator_for(
    data: &GeneratedData,
    meta: bool,
    specs: Vec<crate::objectives::ObjectiveSpec>,
    transform: crate::retrieval::TransformSpec,
    space: crate::space::SearchSpace,
) -> Result<Evaluator<f64>> {
    let index = Arc::new(Index::build(data.corpus.clone())?);
    let log = if meta { &data.meta_log } else { &data.train_log };
    Evaluator::new(index, data.queries_in(log), log, specs, transform, space)
}
