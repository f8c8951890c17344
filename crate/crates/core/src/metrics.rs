//! Evaluation metrics: ranking accuracy against gold, Pearson correlation for
//! parameter recovery, and the two-system win probability.

use serde::{Deserialize, Serialize};

use crate::data::{Gold, ItemId, ModelParams};
use crate::error::{Error, Result};
use crate::models::logistic;

/// How a tied pair of estimated scores is credited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieRule {
    /// Ties earn nothing (strict inequality).
    #[default]
    Strict,
    HalfCredit,
}

/// Fraction of gold-ordered pairs `g_i > g_j` whose scores agree, `s_i > s_j`.
pub fn accuracy(params: &ModelParams, gold: &Gold) -> Result<f64> {
    accuracy_with(params, gold, TieRule::Strict)
}

pub fn accuracy_with(params: &ModelParams, gold: &Gold, ties: TieRule) -> Result<f64> {
    let lookup = params.score_map();
    let entries: Vec<(f64, f64)> = gold
        .iter()
        .map(|(id, &g)| {
            lookup
                .get(id)
                .map(|&s| (g, s))
                .ok_or_else(|| Error::UnknownItem(id.0.clone()))
        })
        .collect::<Result<_>>()?;
    let mut hits = 0.0;
    let mut ordered = 0usize;
    for &(gi, si) in &entries {
        for &(gj, sj) in &entries {
            if gi > gj {
                ordered += 1;
                if si > sj {
                    hits += 1.0;
                } else if si == sj && ties == TieRule::HalfCredit {
                    hits += 0.5;
                }
            }
        }
    }
    if ordered == 0 {
        return Err(Error::NoOrderedPairs);
    }
    Ok(hits / ordered as f64)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig("pearson needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean over queries of `f(s_A − s_B)`: the estimated chance that system A's
/// page beats system B's page.
pub fn system_win_prob(params: &ModelParams, pairs: &[(ItemId, ItemId)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("no system pairs given".into()));
    }
    let lookup = params.score_map();
    let score = |id: &ItemId| lookup.get(id).copied().ok_or_else(|| Error::UnknownItem(id.0.clone()));
    let mut total = 0.0;
    for (a, b) in pairs {
        total += logistic(score(a)? - score(b)?);
    }
    Ok(total / pairs.len() as f64)
}

/// One emitted metric value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub model: String,
    pub trial: Option<usize>,
    pub spam_fraction: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use proptest::prelude::*;

    fn params(scores: &[(&str, f64)]) -> ModelParams {
        ModelParams {
            kind: ModelKind::Bt,
            item_ids: scores.iter().map(|(i, _)| ItemId::from(*i)).collect(),
            worker_ids: vec![],
            scores: scores.iter().map(|(_, s)| *s).collect(),
            virtual_score: 0.0,
            worker_eta: None,
            worker_gamma: None,
            worker_reaction: None,
            worker_ability: None,
        }
    }

    fn gold(values: &[(&str, f64)]) -> Gold {
        values.iter().map(|(i, g)| (ItemId::from(*i), *g)).collect()
    }

    /// Brute-force count over ordered gold pairs.
    fn accuracy_oracle(scores: &[f64], gold: &[f64]) -> f64 {
        let mut num = 0;
        let mut den = 0;
        for i in 0..gold.len() {
            for j in 0..gold.len() {
                if gold[i] > gold[j] {
                    den += 1;
                    if scores[i] > scores[j] {
                        num += 1;
                    }
                }
            }
        }
        num as f64 / den as f64
    }

    #[test]
    fn accuracy_examples() {
        let g = gold(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        assert_eq!(accuracy(&params(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]), &g).unwrap(), 1.0);
        assert_eq!(accuracy(&params(&[("a", -3.0), ("b", -2.0), ("c", -1.0)]), &g).unwrap(), 0.0);
        let p = params(&[("a", 10.0), ("b", 0.0), ("c", 5.0)]);
        assert_eq!(accuracy(&p, &g).unwrap(), accuracy_oracle(&[10.0, 0.0, 5.0], &[3.0, 2.0, 1.0]));
        assert!((accuracy(&p, &g).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_ties_and_errors() {
        let g = gold(&[("a", 2.0), ("b", 1.0)]);
        let tied = params(&[("a", 1.0), ("b", 1.0)]);
        assert_eq!(accuracy(&tied, &g).unwrap(), 0.0);
        assert_eq!(accuracy_with(&tied, &g, TieRule::HalfCredit).unwrap(), 0.5);
        let flat = gold(&[("a", 1.0), ("b", 1.0)]);
        assert!(matches!(accuracy(&tied, &flat), Err(Error::NoOrderedPairs)));
        let missing = gold(&[("a", 1.0), ("z", 0.0)]);
        assert!(matches!(accuracy(&tied, &missing), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn system_win_prob_examples() {
        let p = params(&[("a1", 1.0), ("b1", 0.0), ("a2", 0.0), ("b2", 1.0), ("c", 0.3), ("d", 0.3)]);
        let eq = [("c".into(), "d".into())];
        assert_eq!(system_win_prob(&p, &eq).unwrap(), 0.5);
        let two = [("a1".into(), "b1".into()), ("a2".into(), "b2".into())];
        assert!((system_win_prob(&p, &two).unwrap() - (0.7310585786 + 0.2689414214) / 2.0).abs() < 1e-10);
        assert!(matches!(
            system_win_prob(&p, &[("a1".into(), "zz".into())]),
            Err(Error::UnknownItem(_))
        ));
        assert!(system_win_prob(&p, &[]).is_err());
    }

    proptest! {
        #[test]
        fn accuracy_invariant_under_monotone_transforms(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..12),
        ) {
            let ids: Vec<String> = (0..raw.len()).map(|i| format!("i{i}")).collect();
            let g: Gold = ids.iter().zip(&raw).map(|(i, (g, _))| (ItemId::from(i.as_str()), *g)).collect();
            prop_assume!(raw.iter().any(|(a, _)| raw.iter().any(|(b, _)| a > b)));
            let p = params(&ids.iter().zip(&raw).map(|(i, (_, s))| (i.as_str(), *s)).collect::<Vec<_>>());
            let base = accuracy(&p, &g).unwrap();
            let scores: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let golds: Vec<f64> = raw.iter().map(|r| r.0).collect();
            prop_assert_eq!(base, accuracy_oracle(&scores, &golds));
            let p2 = params(&ids.iter().zip(&raw).map(|(i, (_, s))| (i.as_str(), s.exp() * 3.0 + 1.0)).collect::<Vec<_>>());
            let g2: Gold = g.iter().map(|(k, v)| (k.clone(), v.powi(3) - 7.0)).collect();
            prop_assert_eq!(base, accuracy(&p2, &g2).unwrap());
        }

        #[test]
        fn pearson_affine_invariance(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20),
            a in 0.1f64..10.0, b in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson(&x, &y2).unwrap() - r).abs() < 1e-9);
                let yn: Vec<f64> = y.iter().map(|v| -v).collect();
                prop_assert!((pearson(&x, &yn).unwrap() + r).abs() < 1e-12);
            }
        }

        #[test]
        fn system_win_prob_complementary(scores in prop::collection::vec(-20.0f64..20.0, 2..20)) {
            let ids: Vec<String> = (0..scores.len()).map(|i| format!("i{i}")).collect();
            let p = params(&ids.iter().zip(&scores).map(|(i, s)| (i.as_str(), *s)).collect::<Vec<_>>());
            let pairs: Vec<(ItemId, ItemId)> = (0..scores.len() / 2).map(|q| (ids[2 * q].as_str().into(), ids[2 * q + 1].as_str().into())).collect();
            let swapped: Vec<(ItemId, ItemId)> = pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
            let ab = system_win_prob(&p, &pairs).unwrap();
            let ba = system_win_prob(&p, &swapped).unwrap();
            prop_assert!((ab + ba - 1.0).abs() < 1e-12);
        }
    }
}
