//! Starting points for the iterative fits.

use crate::data::{Dataset, ModelParams, Side};
use crate::models::{logistic, ModelKind};

/// Optimistic starting reliability for CrowdBT workers.
pub const DEFAULT_CROWDBT_ETA: f64 = 0.9;

/// FactorBT starting point.
///
/// Scores and `s_0` start at 0. A worker whose answers all land on the same
/// presentation side starts with `γ_k = f(−1)`, everyone else with `f(1)`.
/// Each reaction component starts at `log a_kl`, where `a_kl` is the
/// Laplace-smoothed fraction of the worker's tasks with feature `l` active in
/// which the chosen item carried the feature.
pub fn init_factorbt(dataset: &Dataset) -> ModelParams {
    let k = dataset.n_workers();
    let m = dataset.feature_dim();
    let mut first_side: Vec<Option<Side>> = vec![None; k];
    let mut constant = vec![true; k];
    let mut chosen = vec![vec![0usize; m]; k];
    let mut active = vec![vec![0usize; m]; k];

    for c in dataset.comparisons() {
        match first_side[c.worker] {
            None => first_side[c.worker] = Some(c.winner_side),
            Some(side) if side != c.winner_side => constant[c.worker] = false,
            Some(_) => {}
        }
        for (l, &x) in c.features.iter().enumerate() {
            if x == 1.0 {
                chosen[c.worker][l] += 1;
            }
            if x == 1.0 || x == -1.0 {
                active[c.worker][l] += 1;
            }
        }
    }

    let mut params = ModelParams::zeros(ModelKind::FactorBt, dataset);
    params.worker_gamma = Some(
        (0..k)
            .map(|w| if constant[w] { logistic(-1.0) } else { logistic(1.0) })
            .collect(),
    );
    params.worker_reaction = Some(
        (0..k)
            .map(|w| {
                (0..m)
                    .map(|l| smoothed_fraction(chosen[w][l], active[w][l]).ln())
                    .collect()
            })
            .collect(),
    );
    params
}

/// `(hits + 1) / (trials + 2)`, always strictly inside (0, 1).
pub fn smoothed_fraction(hits: usize, trials: usize) -> f64 {
    (hits as f64 + 1.0) / (trials as f64 + 2.0)
}

/// Neutral starting points: zero scores everywhere, CrowdBT reliabilities at
/// [`DEFAULT_CROWDBT_ETA`], HITS abilities at 1, and the factorBT rule above.
pub fn init_default(kind: ModelKind, dataset: &Dataset) -> ModelParams {
    match kind {
        ModelKind::FactorBt => init_factorbt(dataset),
        ModelKind::CrowdBt => init_crowdbt(dataset, DEFAULT_CROWDBT_ETA),
        ModelKind::PairwiseHits => {
            let mut p = ModelParams::zeros(kind, dataset);
            p.worker_ability = Some(vec![1.0; dataset.n_workers()]);
            p
        }
        ModelKind::Bt | ModelKind::Linear => ModelParams::zeros(kind, dataset),
    }
}

pub fn init_crowdbt(dataset: &Dataset, eta: f64) -> ModelParams {
    let mut p = ModelParams::zeros(ModelKind::CrowdBt, dataset);
    p.worker_eta = Some(vec![eta; dataset.n_workers()]);
    p
}
