mod common;

use factorbt::gradcheck::random_params;
use factorbt::{
    bt_win_prob, crowdbt_win_prob, factorbt_win_prob, gradient, log_likelihood, Dataset, FitConfig, ModelKind,
    ModelParams,
};
use proptest::prelude::*;

const STEP: f64 = 1e-5;

fn config(lambda: f64) -> FitConfig {
    FitConfig {
        regularization_lambda: lambda,
        ..FitConfig::default()
    }
}

fn central_difference(ds: &Dataset, p: &ModelParams, kind: ModelKind, cfg: &FitConfig, nudge: impl Fn(&mut ModelParams, f64)) -> f64 {
    let mut up = p.clone();
    nudge(&mut up, STEP);
    let mut down = p.clone();
    nudge(&mut down, -STEP);
    (log_likelihood(ds, &up, kind, cfg).unwrap() - log_likelihood(ds, &down, kind, cfg).unwrap()) / (2.0 * STEP)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn check_all_partials(ds: &Dataset, kind: ModelKind, seed: u64, lambda: f64) -> f64 {
    let p = random_params(ds, kind, seed).unwrap();
    let cfg = config(lambda);
    let g = gradient(ds, &p, kind, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..p.scores.len() {
        let n = central_difference(ds, &p, kind, &cfg, |q, h| q.scores[i] += h);
        worst = worst.max(rel(g.scores[i], n));
    }
    if lambda > 0.0 {
        let n = central_difference(ds, &p, kind, &cfg, |q, h| q.virtual_score += h);
        worst = worst.max(rel(g.virtual_score, n));
    }
    for k in 0..p.worker_ids.len() {
        if let Some(eta) = &g.eta {
            let n = central_difference(ds, &p, kind, &cfg, |q, h| q.worker_eta.as_mut().unwrap()[k] += h);
            worst = worst.max(rel(eta[k], n));
        }
        if let Some(gamma) = &g.gamma {
            let n = central_difference(ds, &p, kind, &cfg, |q, h| q.worker_gamma.as_mut().unwrap()[k] += h);
            worst = worst.max(rel(gamma[k], n));
        }
        if let Some(reaction) = &g.reaction {
            for (l, &a) in reaction[k].iter().enumerate() {
                let n = central_difference(ds, &p, kind, &cfg, |q, h| q.worker_reaction.as_mut().unwrap()[k][l] += h);
                worst = worst.max(rel(a, n));
            }
        }
    }
    worst
}

proptest! {
    #[test]
    fn analytic_gradients_match_finite_differences(
        ds in common::small_dataset(),
        seed in any::<u64>(),
        lambda in prop_oneof![Just(0.0), 0.1f64..3.0],
    ) {
        for kind in [ModelKind::Bt, ModelKind::CrowdBt, ModelKind::FactorBt] {
            let err = check_all_partials(&ds, kind, seed, lambda);
            prop_assert!(err < 1e-6, "{kind}: {err}");
        }
    }

    #[test]
    fn probabilities_are_complementary(
        si in -20.0f64..20.0,
        sj in -20.0f64..20.0,
        eta in 0.0f64..=1.0,
        gamma in -10.0f64..10.0,
        reaction in prop::collection::vec(-3.0f64..3.0, 3),
        features in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        prop_assert!((bt_win_prob(si, sj) + bt_win_prob(sj, si) - 1.0).abs() <= 1e-12);
        let c = crowdbt_win_prob(si, sj, eta).unwrap() + crowdbt_win_prob(sj, si, eta).unwrap();
        prop_assert!((c - 1.0).abs() <= 1e-12);
        let flipped: Vec<f64> = features.iter().map(|x| -x).collect();
        let f = factorbt_win_prob(si, sj, gamma, &reaction, &features).unwrap()
            + factorbt_win_prob(sj, si, gamma, &reaction, &flipped).unwrap();
        prop_assert!((f - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bt_probability_increases_with_the_difference(a in -30.0f64..30.0, gap in 1e-3f64..5.0) {
        prop_assert!(bt_win_prob(a + gap, 0.0) > bt_win_prob(a, 0.0));
    }

    #[test]
    fn likelihood_is_translation_invariant(
        ds in common::small_dataset(),
        seed in any::<u64>(),
        shift in -5.0f64..5.0,
    ) {
        for (kind, lambda) in [(ModelKind::Bt, 0.0), (ModelKind::Bt, 1.0), (ModelKind::CrowdBt, 1.0), (ModelKind::FactorBt, 0.5)] {
            let p = random_params(&ds, kind, seed).unwrap();
            let mut q = p.clone();
            q.scores.iter_mut().for_each(|s| *s += shift);
            if lambda > 0.0 {
                q.virtual_score += shift;
            }
            let a = log_likelihood(&ds, &p, kind, &config(lambda)).unwrap();
            let b = log_likelihood(&ds, &q, kind, &config(lambda)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{kind}: {a} vs {b}");
        }
    }

    #[test]
    fn saturated_reliability_is_plain_bt(
        si in -20.0f64..20.0,
        sj in -20.0f64..20.0,
        reaction in prop::collection::vec(-3.0f64..3.0, 2),
        features in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        // f(40) == 1 in double precision.
        let p = factorbt_win_prob(si, sj, 40.0, &reaction, &features).unwrap();
        prop_assert_eq!(p, bt_win_prob(si, sj));
    }
}
