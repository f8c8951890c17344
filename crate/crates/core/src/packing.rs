//! Flat-vector layout of model parameters for the optimizer.
//!
//! Layout: `[s_1 .. s_N, s_0?, worker blocks...]`. The virtual score `s_0` is
//! present only when the virtual-node term is active (`λ > 0`). Worker
//! blocks are `[u_k]` for CrowdBT with `η_k = f(u_k)`, `[γ_k, r_k1 .. r_kM]`
//! for factorBT, `[ability_k]` for HITS and `[γ_k]` for the linear model.

use crate::data::{Dataset, ModelParams};
use crate::models::{logistic, ModelKind, ParamGradient};

/// Bound on the unconstrained CrowdBT coordinate. `f(40)` is exactly 1.0 in
/// f64, so `η ∈ {0, 1}` packs to the boundary instead of to infinity.
pub const ETA_LOGIT_BOUND: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub kind: ModelKind,
    pub n_items: usize,
    pub n_workers: usize,
    pub feature_dim: usize,
    pub with_virtual: bool,
}

impl Layout {
    pub fn new(kind: ModelKind, n_items: usize, n_workers: usize, feature_dim: usize, with_virtual: bool) -> Self {
        Self {
            kind,
            n_items,
            n_workers,
            feature_dim,
            with_virtual,
        }
    }

    pub fn for_dataset(dataset: &Dataset, kind: ModelKind, lambda: f64) -> Self {
        Self::new(kind, dataset.n_items(), dataset.n_workers(), dataset.feature_dim(), lambda > 0.0)
    }

    pub fn worker_block(&self) -> usize {
        match self.kind {
            ModelKind::Bt => 0,
            ModelKind::FactorBt => 1 + self.feature_dim,
            ModelKind::CrowdBt | ModelKind::PairwiseHits | ModelKind::Linear => 1,
        }
    }

    /// Offset of the first worker block.
    pub fn workers_offset(&self) -> usize {
        self.n_items + usize::from(self.with_virtual)
    }

    pub fn virtual_index(&self) -> Option<usize> {
        self.with_virtual.then_some(self.n_items)
    }

    pub fn len(&self) -> usize {
        self.workers_offset() + self.n_workers * self.worker_block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn logit(p: f64) -> f64 {
    (p.ln() - (-p).ln_1p()).clamp(-ETA_LOGIT_BOUND, ETA_LOGIT_BOUND)
}

pub fn pack(params: &ModelParams, layout: &Layout) -> Vec<f64> {
    let mut out = Vec::with_capacity(layout.len());
    out.extend_from_slice(&params.scores);
    if layout.with_virtual {
        out.push(params.virtual_score);
    }
    for k in 0..layout.n_workers {
        match layout.kind {
            ModelKind::Bt => {}
            ModelKind::CrowdBt => out.push(logit(params.worker_eta.as_ref().expect("eta")[k])),
            ModelKind::FactorBt => {
                out.push(params.worker_gamma.as_ref().expect("gamma")[k]);
                out.extend_from_slice(&params.worker_reaction.as_ref().expect("reaction")[k]);
            }
            ModelKind::PairwiseHits => out.push(params.worker_ability.as_ref().expect("ability")[k]),
            ModelKind::Linear => out.push(params.worker_gamma.as_ref().expect("gamma")[k]),
        }
    }
    debug_assert_eq!(out.len(), layout.len());
    out
}

/// Writes `flat` into `params`, which must already have the layout's shape.
pub fn unpack_into(flat: &[f64], layout: &Layout, params: &mut ModelParams) {
    assert_eq!(flat.len(), layout.len(), "flat vector does not match layout");
    let n = layout.n_items;
    params.scores.copy_from_slice(&flat[..n]);
    params.virtual_score = layout.virtual_index().map_or(0.0, |i| flat[i]);
    let block = layout.worker_block();
    for k in 0..layout.n_workers {
        let b = &flat[layout.workers_offset() + k * block..][..block];
        match layout.kind {
            ModelKind::Bt => {}
            ModelKind::CrowdBt => params.worker_eta.as_mut().expect("eta")[k] = logistic(b[0]),
            ModelKind::FactorBt => {
                params.worker_gamma.as_mut().expect("gamma")[k] = b[0];
                params.worker_reaction.as_mut().expect("reaction")[k].copy_from_slice(&b[1..]);
            }
            ModelKind::PairwiseHits => params.worker_ability.as_mut().expect("ability")[k] = b[0],
            ModelKind::Linear => params.worker_gamma.as_mut().expect("gamma")[k] = b[0],
        }
    }
}

/// Unpacks into fresh parameters keyed by the dataset's identifiers.
pub fn unpack(flat: &[f64], layout: &Layout, dataset: &Dataset) -> ModelParams {
    let mut params = ModelParams::zeros(layout.kind, dataset);
    unpack_into(flat, layout, &mut params);
    params
}

/// Gradient with respect to the packed coordinates; applies the chain rule
/// `dη/du = η(1 − η)` for CrowdBT.
pub(crate) fn pack_gradient(grad: &ParamGradient, params: &ModelParams, layout: &Layout, out: &mut [f64]) {
    let n = layout.n_items;
    out[..n].copy_from_slice(&grad.scores);
    if let Some(i) = layout.virtual_index() {
        out[i] = grad.virtual_score;
    }
    let block = layout.worker_block();
    for k in 0..layout.n_workers {
        let b = &mut out[layout.workers_offset() + k * block..][..block];
        match layout.kind {
            ModelKind::Bt => {}
            ModelKind::CrowdBt => {
                let eta = params.worker_eta.as_ref().expect("eta")[k];
                b[0] = grad.eta.as_ref().expect("eta")[k] * eta * (1.0 - eta);
            }
            ModelKind::FactorBt => {
                b[0] = grad.gamma.as_ref().expect("gamma")[k];
                b[1..].copy_from_slice(&grad.reaction.as_ref().expect("reaction")[k]);
            }
            ModelKind::PairwiseHits | ModelKind::Linear => b[0] = 0.0,
        }
    }
}
