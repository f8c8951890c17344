use std::collections::HashSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{build_dataset, Dataset, Gold, ItemId, ModelParams, RawComparison, Side};
use crate::error::{Error, Result};
use crate::models::{logistic, ModelKind};

/// Settings for the factorBT generative simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_items: usize,
    /// Number of distinct unordered item pairs used as tasks.
    pub n_pairs: usize,
    pub n_workers: usize,
    /// Distinct workers voting on each pair.
    pub votes_per_pair: usize,
    /// Number of random task features, each uniform over {−1, 0, 1}.
    pub feature_dim: usize,
    /// Prepends a presentation-side feature that is +1 for the left item.
    pub side_feature: bool,
    /// Replaces every sampled worker `γ` with this value.
    pub gamma_override: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_items: 100,
            n_pairs: 400,
            n_workers: 100,
            votes_per_pair: 10,
            feature_dim: 2,
            side_feature: false,
            gamma_override: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn total_features(&self) -> usize {
        self.feature_dim + usize::from(self.side_feature)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items < 2 {
            return Err(Error::InvalidConfig("need at least two items".into()));
        }
        let max_pairs = self.n_items * (self.n_items - 1) / 2;
        if self.n_pairs > max_pairs {
            return Err(Error::InvalidConfig(format!(
                "{} pairs requested but only {max_pairs} exist",
                self.n_pairs
            )));
        }
        if self.votes_per_pair > self.n_workers {
            return Err(Error::InvalidConfig("votes_per_pair exceeds n_workers".into()));
        }
        Ok(())
    }
}

/// Simulated data with the parameters that generated it.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub dataset: Dataset,
    /// True factorBT parameters aligned with `dataset`'s indices.
    pub truth: ModelParams,
}

pub(crate) fn item_name(i: usize) -> String {
    format!("d{i}")
}

pub(crate) fn worker_name(k: usize) -> String {
    format!("w{k}")
}

/// Draws a factorBT dataset: gold scores are a random permutation of
/// `0..n_items`, worker `γ` and reaction components are standard normal, and
/// each vote favours the first (left) item of its pair with probability
/// `f(γ) f(s_1 − s_2) + (1 − f(γ)) f(⟨x, r⟩)`.
pub fn generate(config: &SimConfig) -> Result<Simulated> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_items;
    let m = config.total_features();

    let mut quality: Vec<usize> = (0..n).collect();
    quality.shuffle(&mut rng);
    let quality: Vec<f64> = quality.into_iter().map(|q| q as f64).collect();

    let mut gamma = Vec::with_capacity(config.n_workers);
    let mut reaction = Vec::with_capacity(config.n_workers);
    for _ in 0..config.n_workers {
        let g: f64 = StandardNormal.sample(&mut rng);
        gamma.push(config.gamma_override.unwrap_or(g));
        reaction.push((0..m).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>());
    }

    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(config.n_pairs);
    while pairs.len() < config.n_pairs {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            pairs.push((a, b));
        }
    }

    let mut rows = Vec::with_capacity(config.n_pairs * config.votes_per_pair);
    for &(a, b) in &pairs {
        let mut features = Vec::with_capacity(m);
        if config.side_feature {
            features.push(1.0);
        }
        features.extend((0..config.feature_dim).map(|_| rng.random_range(-1i32..=1) as f64));
        for k in sample(&mut rng, config.n_workers, config.votes_per_pair) {
            let w = logistic(gamma[k]);
            let bias = logistic(crate::models::dot(&features, &reaction[k]));
            let p_first = w * logistic(quality[a] - quality[b]) + (1.0 - w) * bias;
            let winner = if rng.random::<f64>() < p_first { Side::Left } else { Side::Right };
            rows.push(RawComparison {
                worker: worker_name(k).into(),
                left: item_name(a).into(),
                right: item_name(b).into(),
                winner,
                features: features.clone(),
            });
        }
    }

    let gold: Gold = (0..n).map(|i| (ItemId::from(item_name(i)), quality[i])).collect();
    let dataset = build_dataset(&rows, Some(gold))?;

    let mut truth = ModelParams::zeros(ModelKind::FactorBt, &dataset);
    for (idx, id) in dataset.items().ids().iter().enumerate() {
        let i: usize = id.0[1..].parse().expect("generated id");
        truth.scores[idx] = quality[i];
    }
    let mut true_gamma = vec![0.0; dataset.n_workers()];
    let mut true_reaction = vec![vec![0.0; m]; dataset.n_workers()];
    for (idx, id) in dataset.workers().ids().iter().enumerate() {
        let k: usize = id.0[1..].parse().expect("generated id");
        true_gamma[idx] = gamma[k];
        true_reaction[idx] = reaction[k].clone();
    }
    truth.worker_gamma = Some(true_gamma);
    truth.worker_reaction = Some(true_reaction);
    Ok(Simulated { dataset, truth })
}

/// Two-system comparison data standing in for search-result-page studies:
/// each query has one page from system A and one from system B, shown in
/// random order. System A is better by `offset` and its pages carry a
/// distinguishing feature that workers may react to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SerpConfig {
    pub n_queries: usize,
    pub n_workers: usize,
    pub votes_per_task: usize,
    /// Score advantage of system A's page on every query.
    pub offset: f64,
    /// Standard deviation of the per-query base quality.
    pub query_spread: f64,
    /// Mean worker reaction to the distinguishing feature of system A.
    pub feature_attraction: f64,
    pub seed: u64,
}

impl Default for SerpConfig {
    fn default() -> Self {
        Self {
            n_queries: 133,
            n_workers: 194,
            votes_per_task: 20,
            offset: 1.0,
            query_spread: 1.0,
            feature_attraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SerpSimulated {
    pub dataset: Dataset,
    /// `(system A page, system B page)` per query.
    pub pairs: Vec<(ItemId, ItemId)>,
    pub truth: ModelParams,
}

/// Features are `[side, system]`: side is +1 (left item shown left) and
/// system is +1 when the left page comes from system A (the better one).
pub fn generate_serp(config: &SerpConfig) -> Result<SerpSimulated> {
    if config.votes_per_task > config.n_workers || config.n_queries == 0 {
        return Err(Error::InvalidConfig("invalid SERP simulation sizes".into()));
    }
    let spread = Normal::new(0.0, config.query_spread).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let attraction = Normal::new(config.feature_attraction, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut gamma = Vec::with_capacity(config.n_workers);
    let mut reaction = Vec::with_capacity(config.n_workers);
    for _ in 0..config.n_workers {
        gamma.push(StandardNormal.sample(&mut rng));
        let side: f64 = StandardNormal.sample(&mut rng);
        reaction.push([side, attraction.sample(&mut rng)]);
    }

    let mut rows = Vec::new();
    let mut pairs = Vec::with_capacity(config.n_queries);
    let mut quality = Vec::new();
    for q in 0..config.n_queries {
        let base = spread.sample(&mut rng);
        let a = ItemId::from(format!("q{q}_a"));
        let b = ItemId::from(format!("q{q}_b"));
        quality.push((a.clone(), base + config.offset));
        quality.push((b.clone(), base));
        let a_left = rng.random::<bool>();
        let (left, right, s_left, s_right) = if a_left {
            (&a, &b, base + config.offset, base)
        } else {
            (&b, &a, base, base + config.offset)
        };
        let features = vec![1.0, if a_left { 1.0 } else { -1.0 }];
        for k in sample(&mut rng, config.n_workers, config.votes_per_task) {
            let w: f64 = logistic(gamma[k]);
            let bias = logistic(crate::models::dot(&features, &reaction[k]));
            let p_left = w * logistic(s_left - s_right) + (1.0 - w) * bias;
            let winner = if rng.random::<f64>() < p_left { Side::Left } else { Side::Right };
            rows.push(RawComparison {
                worker: worker_name(k).into(),
                left: left.clone(),
                right: right.clone(),
                winner,
                features: features.clone(),
            });
        }
        pairs.push((a, b));
    }

    let gold: Gold = quality.into_iter().collect();
    let dataset = build_dataset(&rows, Some(gold.clone()))?;
    let mut truth = ModelParams::zeros(ModelKind::FactorBt, &dataset);
    for (idx, id) in dataset.items().ids().iter().enumerate() {
        truth.scores[idx] = gold[id];
    }
    let mut tg = vec![0.0; dataset.n_workers()];
    let mut tr = vec![vec![0.0; 2]; dataset.n_workers()];
    for (idx, id) in dataset.workers().ids().iter().enumerate() {
        let k: usize = id.0[1..].parse().expect("generated id");
        tg[idx] = gamma[k];
        tr[idx] = reaction[k].to_vec();
    }
    truth.worker_gamma = Some(tg);
    truth.worker_reaction = Some(tr);
    Ok(SerpSimulated { dataset, pairs, truth })
}
