use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spammers::{inject_spammers, SpammerSpec};
use crate::data::{Dataset, ItemId, ModelParams};
use crate::error::{Error, Result};
use crate::fit::{fit_allow_disconnected, FitOptions};
use crate::metrics::{accuracy, system_win_prob};
use crate::models::ModelKind;

#[derive(Clone, Debug, PartialEq)]
pub enum SweepMetric {
    /// Ranking accuracy against the dataset's gold map.
    Accuracy,
    /// Win probability of the first system over the second.
    SystemWinProb(Vec<(ItemId, ItemId)>),
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::Accuracy => "accuracy",
            SweepMetric::SystemWinProb(_) => "system_win_prob",
        }
    }

    fn evaluate(&self, params: &ModelParams, dataset: &Dataset) -> Result<f64> {
        match self {
            SweepMetric::Accuracy => accuracy(params, dataset.gold().ok_or(Error::NoOrderedPairs)?),
            SweepMetric::SystemWinProb(pairs) => system_win_prob(params, pairs),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOptions {
    pub seed: u64,
    /// Overrides the virtual-node weight of every likelihood model.
    pub lambda: Option<f64>,
}

impl SweepOptions {
    pub fn fit_options(&self, kind: ModelKind, seed: u64) -> FitOptions {
        let mut options = FitOptions::for_model(kind).with_seed(seed);
        if let Some(lambda) = self.lambda {
            options.config.regularization_lambda = lambda;
        }
        options
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub model: ModelKind,
    pub metric: String,
    pub fraction: f64,
    pub trial: usize,
    /// NaN when the fit or the metric failed.
    pub value: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub model: ModelKind,
    pub metric: String,
    pub fraction: f64,
    /// Mean over successful trials.
    pub mean: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Ordered by fraction, then trial, then model.
    pub cells: Vec<SweepCell>,
    /// Ordered by fraction, then model.
    pub summary: Vec<SweepSummary>,
}

impl SweepResult {
    pub fn mean(&self, model: ModelKind, fraction: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.model == model && s.fraction == fraction)
            .map(|s| s.mean)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed owned by one sweep cell.
pub fn cell_seed(seed: u64, fraction: f64, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ fraction.to_bits()) ^ trial as u64)
}

/// For every fraction and trial, injects spammers with the cell's own seed,
/// fits each model on the same injected dataset and records the metric.
/// Failures are recorded per cell. Cells run in parallel on the current
/// rayon pool; results do not depend on scheduling.
pub fn robustness_sweep(
    dataset: &Dataset,
    spec: &SpammerSpec,
    models: &[ModelKind],
    metric: &SweepMetric,
    options: &SweepOptions,
) -> Result<SweepResult> {
    spec.validate()?;
    if *metric == SweepMetric::Accuracy && dataset.gold().is_none() {
        return Err(Error::InvalidConfig("accuracy sweep needs gold scores".into()));
    }
    let grid: Vec<(f64, usize)> = spec
        .fractions
        .iter()
        .flat_map(|&f| (0..spec.trials).map(move |t| (f, t)))
        .collect();

    let cells: Vec<Vec<SweepCell>> = grid
        .par_iter()
        .map(|&(fraction, trial)| {
            let seed = cell_seed(options.seed, fraction, trial);
            let injected = inject_spammers(dataset, spec, fraction, seed);
            models
                .iter()
                .map(|&model| {
                    let value = injected.as_ref().map_err(|e| e.to_string()).and_then(|data| {
                        fit_allow_disconnected(data, model, &options.fit_options(model, seed))
                            .and_then(|out| metric.evaluate(&out.params, data))
                            .map_err(|e| e.to_string())
                    });
                    SweepCell {
                        model,
                        metric: metric.name().to_owned(),
                        fraction,
                        trial,
                        value: *value.as_ref().unwrap_or(&f64::NAN),
                        error: value.err(),
                    }
                })
                .collect()
        })
        .collect();
    let cells: Vec<SweepCell> = cells.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &fraction in &spec.fractions {
        for &model in models {
            let values: Vec<f64> = cells
                .iter()
                .filter(|c| c.model == model && c.fraction == fraction && c.error.is_none())
                .map(|c| c.value)
                .collect();
            let mean = if values.is_empty() {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            summary.push(SweepSummary {
                model,
                metric: metric.name().to_owned(),
                fraction,
                mean,
                trials: values.len(),
            });
        }
    }
    Ok(SweepResult { cells, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Side;
    use crate::fit::fit;
    use crate::simulation::generate::{generate, SimConfig};
    use crate::simulation::spammers::SpammerKind;

    fn small_sim() -> Dataset {
        generate(&SimConfig {
            n_items: 20,
            n_pairs: 60,
            n_workers: 15,
            votes_per_pair: 5,
            side_feature: true,
            seed: 4,
            ..SimConfig::default()
        })
        .unwrap()
        .dataset
    }

    #[test]
    fn degenerate_sweep_equals_plain_fit() {
        let ds = small_sim();
        let mut spec = SpammerSpec::single(SpammerKind::Side { side: Side::Left });
        spec.fractions = vec![0.0];
        spec.trials = 1;
        let options = SweepOptions::default();
        let result = robustness_sweep(&ds, &spec, &[ModelKind::Bt, ModelKind::FactorBt], &SweepMetric::Accuracy, &options).unwrap();
        assert_eq!(result.cells.len(), 2);
        for cell in &result.cells {
            let seed = cell_seed(0, 0.0, 0);
            let out = fit(&ds, cell.model, &options.fit_options(cell.model, seed)).unwrap();
            let direct = accuracy(&out.params, ds.gold().unwrap()).unwrap();
            assert_eq!(cell.value, direct);
        }
    }

    #[test]
    fn grid_shape_and_determinism() {
        let ds = small_sim();
        let mut spec = SpammerSpec::single(SpammerKind::Side { side: Side::Left });
        spec.trials = 2;
        let models = [ModelKind::Bt, ModelKind::PairwiseHits];
        let options = SweepOptions { seed: 3, lambda: None };
        let a = robustness_sweep(&ds, &spec, &models, &SweepMetric::Accuracy, &options).unwrap();
        assert_eq!(a.cells.len(), 6 * 2 * 2);
        assert_eq!(a.summary.len(), 6 * 2);
        let b = robustness_sweep(&ds, &spec, &models, &SweepMetric::Accuracy, &options).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn accuracy_sweep_requires_gold() {
        let ds = crate::data::build_dataset(&small_sim().to_rows(), None).unwrap();
        let spec = SpammerSpec::single(SpammerKind::Side { side: Side::Left });
        assert!(robustness_sweep(&ds, &spec, &[ModelKind::Bt], &SweepMetric::Accuracy, &SweepOptions::default()).is_err());
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let ds = small_sim();
        let mut spec = SpammerSpec::single(SpammerKind::Side { side: Side::Left });
        spec.fractions = vec![0.0];
        spec.trials = 1;
        let metric = SweepMetric::SystemWinProb(vec![("nope".into(), "d1".into())]);
        let r = robustness_sweep(&ds, &spec, &[ModelKind::Bt], &metric, &SweepOptions::default()).unwrap();
        assert!(r.cells[0].value.is_nan());
        assert!(r.cells[0].error.is_some());
        assert_eq!(r.summary[0].trials, 0);
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(1, 0.2, 0), cell_seed(1, 0.2, 1));
        assert_ne!(cell_seed(1, 0.2, 0), cell_seed(1, 0.4, 0));
        assert_eq!(cell_seed(1, 0.2, 0), cell_seed(1, 0.2, 0));
    }
}
