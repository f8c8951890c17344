//! Items, workers, comparisons and fitted parameters shared by every model.
//!
//! Identifiers are opaque strings interned into dense indices `0..N` (items)
//! and `0..K` (workers) in order of first appearance. Each stored comparison
//! keeps its feature vector in *winner-first* orientation together with the
//! side the winner was shown on, so the presentation order can always be
//! recovered for export and for side-dependent models.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(ItemId);
string_id!(WorkerId);

/// Ground-truth quality per item. Only the induced order is ever used.
pub type Gold = BTreeMap<ItemId, f64>;

/// Bijection between identifiers and dense indices.
#[derive(Clone, Debug)]
pub struct Registry<T> {
    ids: Vec<T>,
    index: HashMap<T, usize>,
}

impl<T> Default for Registry<T> {
    fn default() -> Self {
        Self {
            ids: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Clone + Eq + Hash> Registry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, registering it if unseen.
    pub fn intern(&mut self, id: &T) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.clone());
        self.index.insert(id.clone(), i);
        i
    }

    pub fn get(&self, id: &T) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &T {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[T] {
        &self.ids
    }
}

/// Presentation side of an item in a pairwise task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Parse(format!("winner must be `left` or `right`, got `{other}`"))),
        }
    }
}

/// One input row: a task shown as (left, right) with features in left-vs-right
/// orientation, and the side the worker picked.
#[derive(Clone, Debug, PartialEq)]
pub struct RawComparison {
    pub worker: WorkerId,
    pub left: ItemId,
    pub right: ItemId,
    pub winner: Side,
    pub features: Vec<f64>,
}

impl RawComparison {
    /// A row whose winner was shown on the left, so `features` are already in
    /// winner-first orientation.
    pub fn winner_first(
        worker: impl Into<WorkerId>,
        winner: impl Into<ItemId>,
        loser: impl Into<ItemId>,
        features: Vec<f64>,
    ) -> Self {
        Self {
            worker: worker.into(),
            left: winner.into(),
            right: loser.into(),
            winner: Side::Left,
            features,
        }
    }

    pub fn winner_item(&self) -> &ItemId {
        match self.winner {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn loser_item(&self) -> &ItemId {
        match self.winner {
            Side::Left => &self.right,
            Side::Right => &self.left,
        }
    }
}

/// Declares which feature components change sign when the two items of a
/// task swap places. Components like "item on the left" or "item has a
/// distinguishing design" are antisymmetric; "both items carry ads" is not.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub antisymmetric: Vec<bool>,
}

impl FeatureSchema {
    pub fn all_antisymmetric(dim: usize) -> Self {
        Self {
            antisymmetric: vec![true; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.antisymmetric.len()
    }

    /// Re-expresses `features` for the swapped item order.
    pub fn flip(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.antisymmetric)
            .map(|(&v, &anti)| if anti && v != 0.0 { -v } else { v })
            .collect()
    }
}

/// A comparison in dense-index form.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub worker: usize,
    pub winner: usize,
    pub loser: usize,
    /// Side the winner was presented on.
    pub winner_side: Side,
    /// Task features oriented winner-first.
    pub features: Vec<f64>,
}

impl Comparison {
    /// Index of the item presented on the left.
    pub fn left(&self) -> usize {
        match self.winner_side {
            Side::Left => self.winner,
            Side::Right => self.loser,
        }
    }

    pub fn right(&self) -> usize {
        match self.winner_side {
            Side::Left => self.loser,
            Side::Right => self.winner,
        }
    }
}

/// A task as presented to workers, independent of who answered it.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub left: usize,
    pub right: usize,
    /// Features in left-vs-right orientation.
    pub features: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    items: Registry<ItemId>,
    workers: Registry<WorkerId>,
    comparisons: Vec<Comparison>,
    schema: FeatureSchema,
    gold: Option<Gold>,
}

/// Builds a dataset, inferring the feature dimension from the first row and
/// treating every feature as antisymmetric.
pub fn build_dataset(rows: &[RawComparison], gold: Option<Gold>) -> Result<Dataset> {
    let dim = rows.first().map_or(0, |r| r.features.len());
    build_dataset_with_schema(rows, gold, FeatureSchema::all_antisymmetric(dim))
}

pub fn build_dataset_with_schema(
    rows: &[RawComparison],
    gold: Option<Gold>,
    schema: FeatureSchema,
) -> Result<Dataset> {
    let mut dataset = Dataset {
        items: Registry::new(),
        workers: Registry::new(),
        comparisons: Vec::with_capacity(rows.len()),
        schema,
        gold: None,
    };
    dataset.push_rows(rows)?;
    if let Some(gold) = gold {
        for id in gold.keys() {
            if id.0.is_empty() {
                return Err(Error::EmptyId);
            }
            dataset.items.intern(id);
        }
        dataset.gold = Some(gold);
    }
    Ok(dataset)
}

impl Dataset {
    fn push_rows(&mut self, rows: &[RawComparison]) -> Result<()> {
        let dim = self.schema.dim();
        for row in rows {
            if row.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.features.len(),
                });
            }
            if row.worker.0.is_empty() || row.left.0.is_empty() || row.right.0.is_empty() {
                return Err(Error::EmptyId);
            }
            if row.left == row.right {
                return Err(Error::SelfComparison(row.left.0.clone()));
            }
            let worker = self.workers.intern(&row.worker);
            let left = self.items.intern(&row.left);
            let right = self.items.intern(&row.right);
            let (winner, loser, features) = match row.winner {
                Side::Left => (left, right, row.features.clone()),
                Side::Right => (right, left, self.schema.flip(&row.features)),
            };
            self.comparisons.push(Comparison {
                worker,
                winner,
                loser,
                winner_side: row.winner,
                features,
            });
        }
        Ok(())
    }

    /// Returns a copy of this dataset with `rows` appended. New identifiers
    /// are registered after the existing ones, so existing indices are kept.
    pub fn extended(&self, rows: &[RawComparison]) -> Result<Dataset> {
        let mut out = self.clone();
        out.push_rows(rows)?;
        Ok(out)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn items(&self) -> &Registry<ItemId> {
        &self.items
    }

    pub fn workers(&self) -> &Registry<WorkerId> {
        &self.workers
    }

    pub fn comparisons(&self) -> &[Comparison] {
        &self.comparisons
    }

    pub fn gold(&self) -> Option<&Gold> {
        self.gold.as_ref()
    }

    /// Features of comparison `c` in left-vs-right orientation.
    pub fn left_features(&self, c: &Comparison) -> Vec<f64> {
        match c.winner_side {
            Side::Left => c.features.clone(),
            Side::Right => self.schema.flip(&c.features),
        }
    }

    /// Exports the comparisons as input rows, in stored order.
    pub fn to_rows(&self) -> Vec<RawComparison> {
        self.comparisons
            .iter()
            .map(|c| RawComparison {
                worker: self.workers.id(c.worker).clone(),
                left: self.items.id(c.left()).clone(),
                right: self.items.id(c.right()).clone(),
                winner: c.winner_side,
                features: self.left_features(c),
            })
            .collect()
    }

    /// Number of comparisons made by each worker, indexed densely.
    pub fn tasks_per_worker(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_workers()];
        for c in &self.comparisons {
            counts[c.worker] += 1;
        }
        counts
    }

    pub fn mean_tasks_per_worker(&self) -> f64 {
        if self.workers.is_empty() {
            return 0.0;
        }
        self.comparisons.len() as f64 / self.workers.len() as f64
    }

    /// Distinct presented tasks in order of first appearance.
    pub fn tasks(&self) -> Vec<Task> {
        let mut seen: HashMap<(usize, usize, Vec<u64>), ()> = HashMap::new();
        let mut out = Vec::new();
        for c in &self.comparisons {
            let features = self.left_features(c);
            let key = (
                c.left(),
                c.right(),
                features.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            );
            if seen.insert(key, ()).is_none() {
                out.push(Task {
                    left: c.left(),
                    right: c.right(),
                    features,
                });
            }
        }
        out
    }
}

/// Nonnegative regularization and stopping settings for likelihood fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Weight of the virtual-node term; 0 disables it.
    pub regularization_lambda: f64,
    pub max_iterations: usize,
    /// Stop once the gradient's max-norm falls to this value.
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            regularization_lambda: 1.0,
            max_iterations: 1000,
            gradient_tolerance: 1e-5,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Defaults for `kind`: plain BT is unregularized, the crowd models use
    /// the virtual node with weight 1.
    pub fn for_model(kind: ModelKind) -> Self {
        let mut config = Self::default();
        if kind == ModelKind::Bt {
            config.regularization_lambda = 0.0;
        }
        config
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.regularization_lambda >= 0.0) || !self.regularization_lambda.is_finite() {
            return Err(Error::InvalidConfig("lambda must be a finite nonnegative number".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gradient_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted parameters, stored densely and aligned with `item_ids` / `worker_ids`.
///
/// Which worker groups are present depends on the model: BT has none,
/// CrowdBT has `worker_eta`, factorBT has `worker_gamma` and
/// `worker_reaction`, HITS has `worker_ability`, linear has `worker_gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub item_ids: Vec<ItemId>,
    pub worker_ids: Vec<WorkerId>,
    pub scores: Vec<f64>,
    pub virtual_score: f64,
    pub worker_eta: Option<Vec<f64>>,
    pub worker_gamma: Option<Vec<f64>>,
    pub worker_reaction: Option<Vec<Vec<f64>>>,
    pub worker_ability: Option<Vec<f64>>,
}

impl ModelParams {
    /// All-zero parameters with exactly the groups `kind` needs.
    pub fn zeros(kind: ModelKind, dataset: &Dataset) -> Self {
        let k = dataset.n_workers();
        let m = dataset.feature_dim();
        Self {
            kind,
            item_ids: dataset.items().ids().to_vec(),
            worker_ids: dataset.workers().ids().to_vec(),
            scores: vec![0.0; dataset.n_items()],
            virtual_score: 0.0,
            worker_eta: (kind == ModelKind::CrowdBt).then(|| vec![0.0; k]),
            worker_gamma: matches!(kind, ModelKind::FactorBt | ModelKind::Linear)
                .then(|| vec![0.0; k]),
            worker_reaction: (kind == ModelKind::FactorBt).then(|| vec![vec![0.0; m]; k]),
            worker_ability: (kind == ModelKind::PairwiseHits).then(|| vec![0.0; k]),
        }
    }

    pub fn score_of(&self, id: &ItemId) -> Option<f64> {
        self.item_ids.iter().position(|x| x == id).map(|i| self.scores[i])
    }

    /// Identifier → score lookup table.
    pub fn score_map(&self) -> HashMap<&ItemId, f64> {
        self.item_ids.iter().zip(self.scores.iter().copied()).collect()
    }

    /// Checks the group-presence and domain invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.worker_ids.len();
        if self.scores.len() != self.item_ids.len() {
            return Err(Error::LengthMismatch(self.scores.len(), self.item_ids.len()));
        }
        let need_eta = self.kind == ModelKind::CrowdBt;
        let need_gamma = matches!(self.kind, ModelKind::FactorBt | ModelKind::Linear);
        let need_reaction = self.kind == ModelKind::FactorBt;
        let need_ability = self.kind == ModelKind::PairwiseHits;
        let groups = [
            ("eta", self.worker_eta.as_ref().map(Vec::len), need_eta),
            ("gamma", self.worker_gamma.as_ref().map(Vec::len), need_gamma),
            ("reaction", self.worker_reaction.as_ref().map(Vec::len), need_reaction),
            ("ability", self.worker_ability.as_ref().map(Vec::len), need_ability),
        ];
        for (name, len, needed) in groups {
            match (len, needed) {
                (Some(len), true) if len != k => return Err(Error::LengthMismatch(len, k)),
                (Some(_), false) => {
                    return Err(Error::DomainError(format!(
                        "{} parameters carry an unexpected `{name}` group",
                        self.kind
                    )))
                }
                (None, true) => {
                    return Err(Error::DomainError(format!(
                        "{} parameters are missing the `{name}` group",
                        self.kind
                    )))
                }
                _ => {}
            }
        }
        if let Some(eta) = &self.worker_eta {
            if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                return Err(Error::DomainError(format!("eta {bad} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Items ordered by descending score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    /// Item indices, best first.
    pub order: Vec<usize>,
    /// `ranks[i]` is the 1-based rank of item `i`.
    pub ranks: Vec<usize>,
}

impl Ranking {
    pub fn rank_of(&self, item: usize) -> usize {
        self.ranks[item]
    }
}

/// Sorts items by descending score. Equal scores are ordered by ascending
/// item identifier (plain string order).
pub fn ranking_from_scores(params: &ModelParams) -> Ranking {
    let mut order: Vec<usize> = (0..params.scores.len()).collect();
    order.sort_by(|&a, &b| {
        params.scores[b]
            .total_cmp(&params.scores[a])
            .then_with(|| params.item_ids[a].cmp(&params.item_ids[b]))
    });
    let mut ranks = vec![0; order.len()];
    for (pos, &item) in order.iter().enumerate() {
        ranks[item] = pos + 1;
    }
    Ranking { order, ranks }
}
