//! Block Fisher preconditioner for the likelihood fits.
//!
//! The expected information `Σ ∇P ∇Pᵀ / (P(1−P))` is kept for the score block
//! (items plus the virtual item) and for each worker's own block; couplings
//! between the two groups are dropped. Blocks are factored by Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::{Comparison, Dataset, ModelParams};
use crate::models::{dot, logistic, ModelKind, PROB_FLOOR};
use crate::optimizer::Preconditioner;
use crate::packing::{unpack_into, Layout};

/// Added to the score block's diagonal so it stays positive definite.
const RIDGE: f64 = 1e-6;
/// Worker blocks get a stronger ridge: reactions of near-perfect workers are
/// barely identified and should not drift.
const WORKER_RIDGE: f64 = 1e-3;
/// Plain iterations before the preconditioner is switched on; starting from
/// all-zero scores, early Newton-like steps can land in poor local optima.
const WARMUP: usize = 100;
/// Iterations between refreshes; the curvature drifts as scores spread out.
const REFRESH_PERIOD: usize = 50;
/// Larger score blocks fall back to their diagonal.
const DENSE_LIMIT: usize = 3000;

enum ScoreBlock {
    Dense(Cholesky<f64, Dyn>),
    Diagonal(Vec<f64>),
}

pub(crate) struct FisherPreconditioner<'a> {
    dataset: &'a Dataset,
    layout: &'a Layout,
    frozen: &'a [bool],
    lambda: f64,
    params: ModelParams,
    scores: ScoreBlock,
    workers: Vec<Option<Cholesky<f64, Dyn>>>,
}

impl<'a> FisherPreconditioner<'a> {
    pub(crate) fn new(dataset: &'a Dataset, layout: &'a Layout, frozen: &'a [bool], lambda: f64, start: &ModelParams) -> Self {
        Self {
            dataset,
            layout,
            frozen,
            lambda,
            params: start.clone(),
            scores: ScoreBlock::Diagonal(vec![1.0; layout.workers_offset()]),
            workers: Vec::new(),
        }
    }
}

/// Derivatives of the win probability for one comparison: with respect to the
/// score difference and to the worker's packed parameters.
fn probability_derivatives(params: &ModelParams, c: &Comparison, worker: &mut [f64]) -> (f64, f64) {
    let diff = params.scores[c.winner] - params.scores[c.loser];
    let (f_pos, f_neg) = (logistic(diff), logistic(-diff));
    match params.kind {
        ModelKind::CrowdBt => {
            let eta = params.worker_eta.as_ref().expect("eta")[c.worker];
            worker[0] = (f_pos - f_neg) * eta * (1.0 - eta);
            (eta * f_pos + (1.0 - eta) * f_neg, (2.0 * eta - 1.0) * f_pos * f_neg)
        }
        ModelKind::FactorBt => {
            let w = logistic(params.worker_gamma.as_ref().expect("gamma")[c.worker]);
            let r = &params.worker_reaction.as_ref().expect("reaction")[c.worker];
            let bias = logistic(dot(&c.features, r));
            worker[0] = (f_pos - bias) * w * (1.0 - w);
            let scale = (1.0 - w) * bias * (1.0 - bias);
            for (d, x) in worker[1..].iter_mut().zip(&c.features) {
                *d = scale * x;
            }
            (w * f_pos + (1.0 - w) * bias, w * f_pos * f_neg)
        }
        _ => (f_pos, f_pos * f_neg),
    }
}

impl Preconditioner for FisherPreconditioner<'_> {
    fn refresh(&mut self, x: &[f64]) {
        let layout = self.layout;
        unpack_into(x, layout, &mut self.params);
        let n = layout.workers_offset();
        let block = layout.worker_block();
        let dense = n <= DENSE_LIMIT;
        let mut h = if dense { DMatrix::zeros(n, n) } else { DMatrix::zeros(0, 0) };
        let mut diag = vec![0.0; n];
        let mut blocks = vec![DMatrix::<f64>::zeros(block, block); layout.n_workers];
        let mut dw = vec![0.0; block];

        let mut couple = |i: usize, j: usize, v: f64, h: &mut DMatrix<f64>| {
            diag[i] += v;
            diag[j] += v;
            if dense {
                h[(i, i)] += v;
                h[(j, j)] += v;
                h[(i, j)] -= v;
                h[(j, i)] -= v;
            }
        };
        for c in self.dataset.comparisons() {
            let (p, dp_diff) = probability_derivatives(&self.params, c, &mut dw);
            let info = 1.0 / (p * (1.0 - p)).max(PROB_FLOOR);
            couple(c.winner, c.loser, dp_diff * dp_diff * info, &mut h);
            if block > 0 {
                let b = &mut blocks[c.worker];
                for a in 0..block {
                    for e in 0..block {
                        b[(a, e)] += dw[a] * dw[e] * info;
                    }
                }
            }
        }
        if let Some(v) = layout.virtual_index() {
            let s0 = self.params.virtual_score;
            for (i, &si) in self.params.scores.iter().enumerate() {
                couple(i, v, 2.0 * self.lambda * logistic(si - s0) * logistic(s0 - si), &mut h);
            }
        }

        self.scores = if dense {
            for i in 0..n {
                h[(i, i)] += RIDGE;
            }
            match h.cholesky() {
                Some(ch) => ScoreBlock::Dense(ch),
                None => ScoreBlock::Diagonal(diag.iter().map(|d| d + RIDGE).collect()),
            }
        } else {
            ScoreBlock::Diagonal(diag.iter().map(|d| d + RIDGE).collect())
        };

        let offset = layout.workers_offset();
        self.workers = blocks
            .into_iter()
            .enumerate()
            .map(|(k, mut b)| {
                for a in 0..block {
                    if self.frozen[offset + k * block + a] {
                        for e in 0..block {
                            b[(a, e)] = 0.0;
                            b[(e, a)] = 0.0;
                        }
                        b[(a, a)] = 1.0;
                    } else {
                        b[(a, a)] += WORKER_RIDGE;
                    }
                }
                b.cholesky()
            })
            .collect();
    }

    fn refresh_period(&self) -> Option<usize> {
        Some(REFRESH_PERIOD)
    }

    fn warmup(&self) -> usize {
        WARMUP
    }

    fn apply(&self, g: &[f64], z: &mut [f64]) {
        let n = self.layout.workers_offset();
        match &self.scores {
            ScoreBlock::Dense(ch) => {
                let sol = ch.solve(&DVector::from_column_slice(&g[..n]));
                z[..n].copy_from_slice(sol.as_slice());
            }
            ScoreBlock::Diagonal(d) => {
                for i in 0..n {
                    z[i] = g[i] / d[i];
                }
            }
        }
        let block = self.layout.worker_block();
        for (k, ch) in self.workers.iter().enumerate() {
            let range = n + k * block..n + (k + 1) * block;
            match ch {
                Some(ch) => {
                    let sol = ch.solve(&DVector::from_column_slice(&g[range.clone()]));
                    z[range].copy_from_slice(sol.as_slice());
                }
                None => z[range.clone()].copy_from_slice(&g[range]),
            }
        }
        for (zi, &f) in z.iter_mut().zip(self.frozen) {
            if f {
                *zi = 0.0;
            }
        }
    }
}
