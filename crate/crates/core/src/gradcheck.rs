//! Finite-difference audit of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FitConfig, ModelParams};
use crate::error::{Error, Result};
use crate::models::{gradient, log_likelihood, ModelKind};

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub model: ModelKind,
    pub n_parameters: usize,
    /// `|analytic − numeric| / max(1, |analytic|, |numeric|)`, maximized.
    pub max_relative_error: f64,
    pub worst_parameter: String,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

enum Slot {
    Score(usize),
    Virtual,
    Eta(usize),
    Gamma(usize),
    Reaction(usize, usize),
}

fn slot_mut<'a>(p: &'a mut ModelParams, slot: &Slot) -> &'a mut f64 {
    match *slot {
        Slot::Score(i) => &mut p.scores[i],
        Slot::Virtual => &mut p.virtual_score,
        Slot::Eta(k) => &mut p.worker_eta.as_mut().expect("eta")[k],
        Slot::Gamma(k) => &mut p.worker_gamma.as_mut().expect("gamma")[k],
        Slot::Reaction(k, l) => &mut p.worker_reaction.as_mut().expect("reaction")[k][l],
    }
}

/// Compares every analytic partial derivative with a central difference of
/// step `step`.
pub fn gradcheck(dataset: &Dataset, params: &ModelParams, kind: ModelKind, config: &FitConfig, step: f64) -> Result<GradcheckReport> {
    let grad = gradient(dataset, params, kind, config)?;
    let mut slots: Vec<(Slot, f64, String)> = Vec::new();
    for (i, id) in params.item_ids.iter().enumerate() {
        slots.push((Slot::Score(i), grad.scores[i], format!("score[{id}]")));
    }
    if config.regularization_lambda > 0.0 {
        slots.push((Slot::Virtual, grad.virtual_score, "virtual_score".into()));
    }
    for (k, id) in params.worker_ids.iter().enumerate() {
        if let Some(eta) = &grad.eta {
            slots.push((Slot::Eta(k), eta[k], format!("eta[{id}]")));
        }
        if let Some(gamma) = &grad.gamma {
            slots.push((Slot::Gamma(k), gamma[k], format!("gamma[{id}]")));
        }
        if let Some(reaction) = &grad.reaction {
            for (l, &v) in reaction[k].iter().enumerate() {
                slots.push((Slot::Reaction(k, l), v, format!("reaction[{id}][{l}]")));
            }
        }
    }

    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (slot, analytic, name) in &slots {
        let original = *slot_mut(&mut probe, slot);
        *slot_mut(&mut probe, slot) = original + step;
        let up = log_likelihood(dataset, &probe, kind, config)?;
        *slot_mut(&mut probe, slot) = original - step;
        let down = log_likelihood(dataset, &probe, kind, config)?;
        *slot_mut(&mut probe, slot) = original;
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(*analytic, numeric);
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, name.clone());
        }
    }
    Ok(GradcheckReport {
        model: kind,
        n_parameters: slots.len(),
        max_relative_error: worst.0,
        worst_parameter: worst.1,
    })
}

/// Random parameters for auditing: scores, `s_0`, `γ` and reactions standard
/// normal, `η` uniform on [0.1, 0.9] so central differences stay in range.
pub fn random_params(dataset: &Dataset, kind: ModelKind, seed: u64) -> Result<ModelParams> {
    if !kind.is_likelihood() {
        return Err(Error::Unsupported(kind.name().into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(kind, dataset);
    for s in &mut p.scores {
        *s = StandardNormal.sample(&mut rng);
    }
    p.virtual_score = StandardNormal.sample(&mut rng);
    if let Some(eta) = &mut p.worker_eta {
        for e in eta {
            *e = rng.random_range(0.1..0.9);
        }
    }
    if let Some(gamma) = &mut p.worker_gamma {
        for g in gamma {
            *g = StandardNormal.sample(&mut rng);
        }
    }
    if let Some(reaction) = &mut p.worker_reaction {
        for r in reaction.iter_mut().flatten() {
            *r = StandardNormal.sample(&mut rng);
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, RawComparison};

    #[test]
    fn relative_error_is_absolute_near_zero() {
        assert_eq!(relative_error(1e-9, 0.0), 1e-9);
        assert!((relative_error(200.0, 202.0) - 2.0 / 202.0).abs() < 1e-15);
    }

    #[test]
    fn small_instances_pass() {
        let rows = [
            RawComparison::winner_first("w1", "a", "b", vec![1.0, -1.0]),
            RawComparison::winner_first("w2", "b", "c", vec![0.0, 1.0]),
            RawComparison::winner_first("w1", "c", "a", vec![-1.0, 0.0]),
        ];
        let ds = build_dataset(&rows, None).unwrap();
        for kind in [ModelKind::Bt, ModelKind::CrowdBt, ModelKind::FactorBt] {
            let p = random_params(&ds, kind, 1).unwrap();
            let r = gradcheck(&ds, &p, kind, &FitConfig::default(), DEFAULT_STEP).unwrap();
            assert!(r.max_relative_error < 1e-6, "{r:?}");
        }
        assert!(random_params(&ds, ModelKind::Linear, 0).is_err());
    }
}
