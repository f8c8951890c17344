//! Win probabilities, log-likelihood objectives and their analytic gradients
//! for the score-based models (BT, CrowdBT, factorBT).
//!
//! Every comparison stores its features winner-first, so the probability of
//! the observed outcome is always `P(winner ≻ loser)` evaluated on the stored
//! vector. The virtual-node term
//! `λ Σ_i [log f(s_0 − s_i) + log f(s_i − s_0)]` is added whenever `λ > 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FitConfig, ModelParams};
use crate::error::{Error, Result};

/// Probabilities below this are floored inside the logarithm. The floor is
/// applied identically by every model; a floored term contributes no
/// gradient.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "bt")]
    Bt,
    #[serde(rename = "crowdbt")]
    CrowdBt,
    #[serde(rename = "factorbt")]
    FactorBt,
    #[serde(rename = "hits")]
    PairwiseHits,
    #[serde(rename = "linear")]
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Bt,
        ModelKind::CrowdBt,
        ModelKind::FactorBt,
        ModelKind::PairwiseHits,
        ModelKind::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bt => "bt",
            ModelKind::CrowdBt => "crowdbt",
            ModelKind::FactorBt => "factorbt",
            ModelKind::PairwiseHits => "hits",
            ModelKind::Linear => "linear",
        }
    }

    /// Whether the model is fitted by maximizing a likelihood.
    pub fn is_likelihood(self) -> bool {
        matches!(self, ModelKind::Bt | ModelKind::CrowdBt | ModelKind::FactorBt)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown model `{s}`")))
    }
}

/// `1 / (1 + e^{-x})`, evaluated without overflow for any finite `x`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn bt_win_prob(s_i: f64, s_j: f64) -> f64 {
    logistic(s_i - s_j)
}

pub fn crowdbt_win_prob(s_i: f64, s_j: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::DomainError(format!("eta {eta} outside [0, 1]")));
    }
    Ok(eta * logistic(s_i - s_j) + (1.0 - eta) * logistic(s_j - s_i))
}

pub fn factorbt_win_prob(s_i: f64, s_j: f64, gamma: f64, reaction: &[f64], features: &[f64]) -> Result<f64> {
    if reaction.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: reaction.len(),
            found: features.len(),
        });
    }
    let g = logistic(gamma);
    Ok(g * logistic(s_i - s_j) + (1.0 - g) * logistic(dot(features, reaction)))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Partial derivatives of an objective, shaped like [`ModelParams`].
/// CrowdBT entries are with respect to `η` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub scores: Vec<f64>,
    pub virtual_score: f64,
    pub eta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub reaction: Option<Vec<Vec<f64>>>,
}

impl ParamGradient {
    fn zeros_like(params: &ModelParams) -> Self {
        Self {
            scores: vec![0.0; params.scores.len()],
            virtual_score: 0.0,
            eta: params.worker_eta.as_ref().map(|v| vec![0.0; v.len()]),
            gamma: params.worker_gamma.as_ref().map(|v| vec![0.0; v.len()]),
            reaction: params
                .worker_reaction
                .as_ref()
                .map(|v| v.iter().map(|r| vec![0.0; r.len()]).collect()),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m = self.virtual_score.abs();
        let flat = self
            .scores
            .iter()
            .chain(self.eta.iter().flatten())
            .chain(self.gamma.iter().flatten())
            .chain(self.reaction.iter().flatten().flatten());
        for v in flat {
            m = m.max(v.abs());
        }
        m
    }
}

fn check_params(dataset: &Dataset, params: &ModelParams, kind: ModelKind) -> Result<()> {
    if !kind.is_likelihood() {
        return Err(Error::Unsupported(kind.name().into()));
    }
    if params.kind != kind {
        return Err(Error::DomainError(format!(
            "parameters are for {}, not {}",
            params.kind, kind
        )));
    }
    if params.scores.len() != dataset.n_items() {
        return Err(Error::LengthMismatch(params.scores.len(), dataset.n_items()));
    }
    if params.worker_ids.len() != dataset.n_workers() {
        return Err(Error::LengthMismatch(params.worker_ids.len(), dataset.n_workers()));
    }
    params.validate()?;
    if let Some(reaction) = &params.worker_reaction {
        for r in reaction {
            if r.len() != dataset.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: dataset.feature_dim(),
                    found: r.len(),
                });
            }
        }
    }
    Ok(())
}

/// Log-likelihood of the observed comparisons under `kind`, plus the
/// virtual-node term when `config.regularization_lambda > 0`.
pub fn log_likelihood(dataset: &Dataset, params: &ModelParams, kind: ModelKind, config: &FitConfig) -> Result<f64> {
    check_params(dataset, params, kind)?;
    evaluate(dataset, params, config.regularization_lambda, None)
}

/// Analytic gradient of [`log_likelihood`] with respect to every free parameter.
pub fn gradient(dataset: &Dataset, params: &ModelParams, kind: ModelKind, config: &FitConfig) -> Result<ParamGradient> {
    check_params(dataset, params, kind)?;
    let mut grad = ParamGradient::zeros_like(params);
    evaluate(dataset, params, config.regularization_lambda, Some(&mut grad))?;
    Ok(grad)
}

/// Objective and (optionally) gradient in one pass. Assumes `params` has
/// already been checked against `dataset`. The gradient buffer is
/// overwritten.
pub(crate) fn evaluate(
    dataset: &Dataset,
    params: &ModelParams,
    lambda: f64,
    mut grad: Option<&mut ParamGradient>,
) -> Result<f64> {
    if let Some(g) = grad.as_deref_mut() {
        g.scores.iter_mut().for_each(|v| *v = 0.0);
        g.virtual_score = 0.0;
        g.eta.iter_mut().flatten().for_each(|v| *v = 0.0);
        g.gamma.iter_mut().flatten().for_each(|v| *v = 0.0);
        g.reaction.iter_mut().flatten().flatten().for_each(|v| *v = 0.0);
    }
    let s = &params.scores;
    let mut total = 0.0;
    for (index, c) in dataset.comparisons().iter().enumerate() {
        let diff = s[c.winner] - s[c.loser];
        let f_pos = logistic(diff);
        let f_neg = logistic(-diff);
        match params.kind {
            ModelKind::Bt => {
                let p = f_pos;
                total += log_prob(p, index)?;
                if let Some(g) = grad.as_deref_mut() {
                    if p >= PROB_FLOOR {
                        // d/dΔ log f(Δ) = f(−Δ)
                        g.scores[c.winner] += f_neg;
                        g.scores[c.loser] -= f_neg;
                    }
                }
            }
            ModelKind::CrowdBt => {
                let eta = params.worker_eta.as_ref().expect("checked")[c.worker];
                let p = eta * f_pos + (1.0 - eta) * f_neg;
                total += log_prob(p, index)?;
                if let Some(g) = grad.as_deref_mut() {
                    if p >= PROB_FLOOR {
                        let d_diff = (2.0 * eta - 1.0) * f_pos * f_neg / p;
                        g.scores[c.winner] += d_diff;
                        g.scores[c.loser] -= d_diff;
                        g.eta.as_mut().expect("shaped")[c.worker] += (f_pos - f_neg) / p;
                    }
                }
            }
            ModelKind::FactorBt => {
                let gamma = params.worker_gamma.as_ref().expect("checked")[c.worker];
                let r = &params.worker_reaction.as_ref().expect("checked")[c.worker];
                let w = logistic(gamma);
                let bias = logistic(dot(&c.features, r));
                let p = w * f_pos + (1.0 - w) * bias;
                total += log_prob(p, index)?;
                if let Some(g) = grad.as_deref_mut() {
                    if p >= PROB_FLOOR {
                        let d_diff = w * f_pos * f_neg / p;
                        g.scores[c.winner] += d_diff;
                        g.scores[c.loser] -= d_diff;
                        g.gamma.as_mut().expect("shaped")[c.worker] += (f_pos - bias) * w * (1.0 - w) / p;
                        let scale = (1.0 - w) * bias * (1.0 - bias) / p;
                        let gr = &mut g.reaction.as_mut().expect("shaped")[c.worker];
                        for (gl, xl) in gr.iter_mut().zip(&c.features) {
                            *gl += scale * xl;
                        }
                    }
                }
            }
            ModelKind::PairwiseHits | ModelKind::Linear => {
                return Err(Error::Unsupported(params.kind.name().into()));
            }
        }
    }
    if lambda > 0.0 {
        let s0 = params.virtual_score;
        for (i, &si) in s.iter().enumerate() {
            let up = logistic(si - s0);
            let down = logistic(s0 - si);
            total += lambda * (log_prob(down, usize::MAX)? + log_prob(up, usize::MAX)?);
            if let Some(g) = grad.as_deref_mut() {
                // Both terms are ≥ PROB_FLOOR unless |s_i − s_0| > ~27.6.
                let d_i = lambda * (if up >= PROB_FLOOR { down } else { 0.0 } - if down >= PROB_FLOOR { up } else { 0.0 });
                g.scores[i] += d_i;
                g.virtual_score -= d_i;
            }
        }
    }
    Ok(total)
}

fn log_prob(p: f64, index: usize) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::NonFiniteLikelihood { index });
    }
    Ok(p.max(PROB_FLOOR).ln())
}
