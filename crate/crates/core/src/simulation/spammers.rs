use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RawComparison, Side, WorkerId};
use crate::error::{Error, Result};

/// Deterministic answering policy of a uniform spammer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpammerKind {
    /// Always picks the item shown on `side`.
    Side { side: Side },
    /// Always picks the item carrying feature `feature` (0-based component of
    /// the left-vs-right feature vector). When neither item carries it the
    /// spammer picks the left item.
    Attribute { feature: usize },
}

impl SpammerKind {
    pub fn answer(&self, left_features: &[f64]) -> Side {
        match self {
            SpammerKind::Side { side } => *side,
            SpammerKind::Attribute { feature } => match left_features[*feature] {
                x if x < 0.0 => Side::Right,
                _ => Side::Left,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpammer {
    #[serde(flatten)]
    pub kind: SpammerKind,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
}

fn default_trials() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpammerSpec {
    pub spammers: Vec<WeightedSpammer>,
    /// Tasks per spammer; defaults to the rounded mean number of tasks per
    /// original worker.
    #[serde(default)]
    pub tasks_per_spammer: Option<usize>,
    /// Spammer counts as fractions of the original worker count.
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl SpammerSpec {
    pub fn single(kind: SpammerKind) -> Self {
        Self {
            spammers: vec![WeightedSpammer { kind, weight: 1.0 }],
            tasks_per_spammer: None,
            fractions: default_fractions(),
            trials: default_trials(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spammers.is_empty() {
            return Err(Error::InvalidConfig("no spammer kinds given".into()));
        }
        if self.spammers.iter().any(|s| !(s.weight >= 0.0)) {
            return Err(Error::InvalidConfig("spammer weights must be nonnegative".into()));
        }
        let total: f64 = self.spammers.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("spammer weights sum to {total}, not 1")));
        }
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidConfig("fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Kind of the `i`-th of `n` spammers: spammers are split among kinds in
    /// proportion to the weights, in listed order.
    fn kind_for(&self, i: usize, n: usize) -> &SpammerKind {
        let position = (i as f64 + 0.5) / n as f64;
        let mut cumulative = 0.0;
        for s in &self.spammers {
            cumulative += s.weight;
            if position < cumulative {
                return &s.kind;
            }
        }
        &self.spammers.last().expect("validated").kind
    }
}

/// Number of spammers added for `fraction` of `workers` original workers.
pub fn spammer_count(fraction: f64, workers: usize) -> usize {
    (fraction * workers as f64 + 1e-9).floor() as usize
}

/// Adds `⌊fraction·K⌋` spammers. Each answers `tasks_per_spammer` tasks drawn
/// uniformly, with replacement, from the dataset's distinct tasks.
pub fn inject_spammers(dataset: &Dataset, spec: &SpammerSpec, fraction: f64, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("fraction {fraction} outside [0, 1]")));
    }
    for s in &spec.spammers {
        if let SpammerKind::Attribute { feature } = s.kind {
            if feature >= dataset.feature_dim() {
                return Err(Error::UnknownFeature {
                    index: feature,
                    dim: dataset.feature_dim(),
                });
            }
        }
    }
    let count = spammer_count(fraction, dataset.n_workers());
    if count == 0 {
        return Ok(dataset.clone());
    }
    let tasks = dataset.tasks();
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("dataset has no tasks to assign".into()));
    }
    let per_spammer = spec
        .tasks_per_spammer
        .unwrap_or_else(|| dataset.mean_tasks_per_worker().round() as usize);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count * per_spammer);
    for i in 0..count {
        let mut name = format!("spammer-{i}");
        while dataset.workers().get(&WorkerId::from(name.as_str())).is_some() {
            name.push('_');
        }
        let worker = WorkerId::from(name);
        let kind = spec.kind_for(i, count);
        for _ in 0..per_spammer {
            let task = &tasks[rng.random_range(0..tasks.len())];
            rows.push(RawComparison {
                worker: worker.clone(),
                left: dataset.items().id(task.left).clone(),
                right: dataset.items().id(task.right).clone(),
                winner: kind.answer(&task.features),
                features: task.features.clone(),
            });
        }
    }
    dataset.extended(&rows)
}
