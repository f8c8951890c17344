//! Linear position-bias model.
//!
//! Each comparison is encoded as `Y = +1` when the left item wins and `−1`
//! otherwise, and modelled as `Y ≈ s_left − s_right + γ_k`. The fit minimizes
//! the squared residuals plus `penalty · Σ_k |γ_k|` by cyclic coordinate
//! descent, soft-thresholding the worker biases. Scores are unpenalized and
//! re-centred to zero mean per connected component after every pass.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{build_dataset_with_schema, Dataset, ModelParams, Side};
use crate::error::{Error, Result};
use crate::graph::Components;
use crate::models::ModelKind;

/// Penalties tried by cross-validation when none is given.
pub const PENALTY_GRID: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
pub const CV_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFitConfig {
    /// L1 weight on the worker biases; `None` selects it by cross-validation
    /// over [`PENALTY_GRID`].
    pub l1_penalty: Option<f64>,
    pub max_passes: usize,
    pub tol: f64,
    /// Seeds the fold assignment for cross-validation.
    pub seed: u64,
}

impl Default for LinearFitConfig {
    fn default() -> Self {
        Self {
            l1_penalty: None,
            max_passes: 1000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearFit {
    pub params: ModelParams,
    pub penalty: f64,
    pub passes: usize,
    /// Objective after each pass.
    pub objective_trace: Vec<f64>,
    pub components: usize,
}

/// `argmin_γ Σ_c (t_c − γ)² + penalty·|γ|` given `Σ_c t_c` over `n` terms.
pub fn soft_threshold_update(sum: f64, n: usize, penalty: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let half = penalty / 2.0;
    let shrunk = if sum > half {
        sum - half
    } else if sum < -half {
        sum + half
    } else {
        0.0
    };
    shrunk / n as f64
}

fn outcome(side: Side) -> f64 {
    match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    }
}

/// Fits the linear model; a disconnected pair graph yields
/// [`Error::SingularSystem`] carrying the per-component solution.
pub fn linear_fit(dataset: &Dataset, config: &LinearFitConfig) -> Result<ModelParams> {
    let fit = linear_fit_detailed(dataset, config)?;
    if fit.components > 1 {
        return Err(Error::SingularSystem {
            components: fit.components,
            params: Box::new(fit.params),
        });
    }
    Ok(fit.params)
}

pub fn linear_fit_detailed(dataset: &Dataset, config: &LinearFitConfig) -> Result<LinearFit> {
    if dataset.comparisons().is_empty() {
        return Err(Error::InvalidConfig("linear model needs at least one comparison".into()));
    }
    let penalty = match config.l1_penalty {
        Some(p) if p >= 0.0 => p,
        Some(p) => return Err(Error::InvalidConfig(format!("l1_penalty {p} is negative"))),
        None => select_penalty(dataset, config)?,
    };
    Ok(coordinate_descent(dataset, penalty, config.max_passes, config.tol))
}

fn objective(residual: &[f64], gamma: &[f64], penalty: f64) -> f64 {
    residual.iter().map(|e| e * e).sum::<f64>() + penalty * gamma.iter().map(|g| g.abs()).sum::<f64>()
}

fn coordinate_descent(dataset: &Dataset, penalty: f64, max_passes: usize, tol: f64) -> LinearFit {
    let n = dataset.n_items();
    let k = dataset.n_workers();
    let comps = dataset.comparisons();
    let components = Components::of(dataset);

    // Per item: (comparison, +1 if shown left / −1 if right).
    let mut by_item: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut by_worker: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, c) in comps.iter().enumerate() {
        by_item[c.left()].push((idx, 1.0));
        by_item[c.right()].push((idx, -1.0));
        by_worker[c.worker].push(idx);
    }

    let mut scores = vec![0.0; n];
    let mut gamma = vec![0.0; k];
    let mut residual: Vec<f64> = comps.iter().map(|c| outcome(c.winner_side)).collect();
    let mut trace = Vec::new();
    let mut passes = 0;

    while passes < max_passes {
        let mut max_change = 0.0f64;
        for i in 0..n {
            if by_item[i].is_empty() {
                continue;
            }
            let old = scores[i];
            let target: f64 = by_item[i].iter().map(|&(c, a)| a * (residual[c] + a * old)).sum();
            let new = target / by_item[i].len() as f64;
            for &(c, a) in &by_item[i] {
                residual[c] -= a * (new - old);
            }
            scores[i] = new;
            max_change = max_change.max((new - old).abs());
        }
        for w in 0..k {
            let old = gamma[w];
            let sum: f64 = by_worker[w].iter().map(|&c| residual[c] + old).sum();
            let new = soft_threshold_update(sum, by_worker[w].len(), penalty);
            for &c in &by_worker[w] {
                residual[c] -= new - old;
            }
            gamma[w] = new;
            max_change = max_change.max((new - old).abs());
        }
        // Both items of a comparison share a component, so centring leaves
        // every residual unchanged.
        components.center(&mut scores);
        passes += 1;
        trace.push(objective(&residual, &gamma, penalty));
        if max_change < tol {
            break;
        }
    }

    let mut params = ModelParams::zeros(ModelKind::Linear, dataset);
    params.scores = scores;
    params.worker_gamma = Some(gamma);
    LinearFit {
        params,
        penalty,
        passes,
        objective_trace: trace,
        components: components.count(),
    }
}

/// Picks the grid penalty with the lowest held-out squared error.
fn select_penalty(dataset: &Dataset, config: &LinearFitConfig) -> Result<f64> {
    let rows = dataset.to_rows();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut fold_of = vec![0; rows.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % CV_FOLDS;
    }

    let mut best = (f64::INFINITY, PENALTY_GRID[0]);
    for &penalty in PENALTY_GRID.iter().rev() {
        let mut sq = 0.0;
        let mut count = 0usize;
        for fold in 0..CV_FOLDS {
            let train: Vec<_> = rows.iter().zip(&fold_of).filter(|(_, &f)| f != fold).map(|(r, _)| r.clone()).collect();
            if train.is_empty() {
                continue;
            }
            let train_ds = build_dataset_with_schema(&train, None, dataset.schema().clone())?;
            let fit = coordinate_descent(&train_ds, penalty, config.max_passes, config.tol);
            let gamma = fit.params.worker_gamma.as_ref().expect("linear");
            for (row, _) in rows.iter().zip(&fold_of).filter(|(_, &f)| f == fold) {
                let score = |id| train_ds.items().get(id).map_or(0.0, |i| fit.params.scores[i]);
                let g = train_ds.workers().get(&row.worker).map_or(0.0, |w| gamma[w]);
                let pred = score(&row.left) - score(&row.right) + g;
                sq += (outcome(row.winner) - pred).powi(2);
                count += 1;
            }
        }
        let err = sq / count.max(1) as f64;
        if err < best.0 {
            best = (err, penalty);
        }
    }
    Ok(best.1)
}
