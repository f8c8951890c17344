//! One entry point for fitting any of the five models.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FitConfig, ModelParams};
use crate::error::{Error, Result};
use crate::hits::{hits_fit, HitsConfig};
use crate::init::{init_crowdbt, init_default, DEFAULT_CROWDBT_ETA};
use crate::linear::{linear_fit, LinearFitConfig};
use crate::models::{evaluate, ModelKind, ParamGradient};
use crate::optimizer::{maximize_preconditioned, OptimizerReport};
use crate::packing::{pack, pack_gradient, unpack, unpack_into, Layout};
use crate::precond::FisherPreconditioner;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub config: FitConfig,
    pub crowdbt_eta_init: f64,
    /// Holds every CrowdBT reliability at this value during the fit.
    pub fixed_eta: Option<f64>,
    /// Holds every factorBT `γ_k` at this value during the fit.
    pub fixed_gamma: Option<f64>,
    pub hits: HitsConfig,
    pub linear: LinearFitConfig,
}

impl FitOptions {
    pub fn for_model(kind: ModelKind) -> Self {
        Self {
            config: FitConfig::for_model(kind),
            crowdbt_eta_init: DEFAULT_CROWDBT_ETA,
            fixed_eta: None,
            fixed_gamma: None,
            hits: HitsConfig::default(),
            linear: LinearFitConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self.linear.seed = seed;
        self
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub params: ModelParams,
    /// Present for the likelihood models.
    pub report: Option<OptimizerReport>,
}

pub fn fit(dataset: &Dataset, kind: ModelKind, options: &FitOptions) -> Result<FitOutcome> {
    match kind {
        ModelKind::Bt | ModelKind::CrowdBt | ModelKind::FactorBt => fit_likelihood(dataset, kind, options),
        ModelKind::PairwiseHits => Ok(FitOutcome {
            params: hits_fit(dataset, options.hits.max_rounds, options.hits.tol)?,
            report: None,
        }),
        ModelKind::Linear => Ok(FitOutcome {
            params: linear_fit(dataset, &options.linear)?,
            report: None,
        }),
    }
}

/// Like [`fit`], but a disconnected comparison graph is not an error: the
/// per-component solution carried by [`Error::SingularSystem`] is returned.
pub fn fit_allow_disconnected(dataset: &Dataset, kind: ModelKind, options: &FitOptions) -> Result<FitOutcome> {
    match fit(dataset, kind, options) {
        Err(Error::SingularSystem { params, .. }) => Ok(FitOutcome {
            params: *params,
            report: None,
        }),
        other => other,
    }
}

fn fit_likelihood(dataset: &Dataset, kind: ModelKind, options: &FitOptions) -> Result<FitOutcome> {
    let config = &options.config;
    config.validate()?;
    let mut start = match kind {
        ModelKind::CrowdBt => init_crowdbt(dataset, options.fixed_eta.unwrap_or(options.crowdbt_eta_init)),
        _ => init_default(kind, dataset),
    };
    if let (ModelKind::FactorBt, Some(g)) = (kind, options.fixed_gamma) {
        start.worker_gamma = Some(vec![g; dataset.n_workers()]);
    }
    start.validate()?;

    let lambda = config.regularization_lambda;
    let layout = Layout::for_dataset(dataset, kind, lambda);
    let frozen = frozen_mask(&layout, options);

    let mut scratch = start.clone();
    let mut grad = ParamGradient {
        scores: vec![0.0; dataset.n_items()],
        virtual_score: 0.0,
        eta: start.worker_eta.clone(),
        gamma: start.worker_gamma.clone(),
        reaction: start.worker_reaction.clone(),
    };
    let objective = |x: &[f64], g: &mut [f64]| -> f64 {
        unpack_into(x, &layout, &mut scratch);
        match evaluate(dataset, &scratch, lambda, Some(&mut grad)) {
            Ok(value) => {
                pack_gradient(&grad, &scratch, &layout, g);
                for (gi, &f) in g.iter_mut().zip(&frozen) {
                    if f {
                        *gi = 0.0;
                    }
                }
                value
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut precond = FisherPreconditioner::new(dataset, &layout, &frozen, lambda, &start);
    let (x, report) = maximize_preconditioned(objective, &mut precond, pack(&start, &layout), config, |_, _| {})?;
    Ok(FitOutcome {
        params: unpack(&x, &layout, dataset),
        report: Some(report),
    })
}

fn frozen_mask(layout: &Layout, options: &FitOptions) -> Vec<bool> {
    let mut mask = vec![false; layout.len()];
    let block = layout.worker_block();
    let freeze_first = match layout.kind {
        ModelKind::CrowdBt => options.fixed_eta.is_some(),
        ModelKind::FactorBt => options.fixed_gamma.is_some(),
        _ => false,
    };
    if freeze_first {
        for k in 0..layout.n_workers {
            mask[layout.workers_offset() + k * block] = true;
        }
    }
    mask
}
