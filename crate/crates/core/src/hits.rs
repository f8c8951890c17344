//! Pairwise HITS: alternate between scores implied by worker abilities and
//! abilities implied by scores.
//!
//! For every co-occurring pair `(j, j′)` the score difference should equal the
//! ability mass of workers preferring `j` minus that of workers preferring
//! `j′` (each comparison counted once, so repeats add up). The stacked system
//! is solved by least squares through its normal equations, whose matrix is
//! the graph Laplacian of the pair graph; the zero-mean gauge is imposed per
//! connected component. Each ability is then the fraction of that worker's
//! comparisons that agree strictly with the current scores.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ModelParams};
use crate::error::{Error, Result};
use crate::graph::Components;
use crate::models::ModelKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitsConfig {
    pub max_rounds: usize,
    pub tol: f64,
}

impl Default for HitsConfig {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            tol: 1e-6,
        }
    }
}

/// Outcome of a HITS run.
#[derive(Clone, Debug)]
pub struct HitsFit {
    pub params: ModelParams,
    pub rounds: usize,
    pub converged: bool,
    pub components: usize,
}

/// Fits pairwise HITS. A disconnected pair graph yields
/// [`Error::SingularSystem`] carrying the per-component solution.
pub fn hits_fit(dataset: &Dataset, max_rounds: usize, tol: f64) -> Result<ModelParams> {
    let fit = hits_fit_detailed(dataset, &HitsConfig { max_rounds, tol })?;
    if fit.components > 1 {
        return Err(Error::SingularSystem {
            components: fit.components,
            params: Box::new(fit.params),
        });
    }
    Ok(fit.params)
}

/// Runs the alternation regardless of connectivity, reporting the number of
/// components instead of failing.
pub fn hits_fit_detailed(dataset: &Dataset, config: &HitsConfig) -> Result<HitsFit> {
    let n = dataset.n_items();
    let k = dataset.n_workers();
    let per_worker = dataset.tasks_per_worker();
    if let Some(w) = per_worker.iter().position(|&c| c == 0) {
        return Err(Error::InvalidConfig(format!(
            "worker `{}` has no comparisons",
            dataset.workers().id(w)
        )));
    }

    let components = Components::of(dataset);
    // One equation per unordered co-occurring pair.
    let mut pairs: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for c in dataset.comparisons() {
        pairs.insert((c.winner.min(c.loser), c.winner.max(c.loser)), ());
    }
    let mut system = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in pairs.keys() {
        system[(a, a)] += 1.0;
        system[(b, b)] += 1.0;
        system[(a, b)] -= 1.0;
        system[(b, a)] -= 1.0;
    }
    for i in 0..n {
        for j in 0..n {
            if components.label[i] == components.label[j] {
                system[(i, j)] += 1.0 / components.sizes[components.label[i]] as f64;
            }
        }
    }
    let factor = system
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("pair-graph normal equations are not positive definite".into()))?;

    let mut ability = vec![1.0; k];
    let mut scores = vec![0.0; n];
    let mut rounds = 0;
    let mut converged = false;
    while rounds < config.max_rounds {
        // Right-hand side Aᵀy: each comparison pushes its worker's ability
        // toward the winner.
        let mut rhs = DVector::<f64>::zeros(n);
        for c in dataset.comparisons() {
            rhs[c.winner] += ability[c.worker];
            rhs[c.loser] -= ability[c.worker];
        }
        let solved = factor.solve(&rhs);
        let mut next: Vec<f64> = solved.iter().copied().collect();
        components.center(&mut next);
        let delta = next
            .iter()
            .zip(&scores)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        scores = next;
        rounds += 1;

        let mut agree = vec![0usize; k];
        for c in dataset.comparisons() {
            if scores[c.winner] > scores[c.loser] {
                agree[c.worker] += 1;
            }
        }
        for w in 0..k {
            ability[w] = agree[w] as f64 / per_worker[w] as f64;
        }
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let mut params = ModelParams::zeros(ModelKind::PairwiseHits, dataset);
    params.scores = scores;
    params.worker_ability = Some(ability);
    Ok(HitsFit {
        params,
        rounds,
        converged,
        components: components.count(),
    })
}
