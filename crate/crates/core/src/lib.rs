//! Rank aggregation from crowdsourced pairwise comparisons whose answers may
//! be biased by task features (presentation side, page design, ...).
//!
//! Five aggregators are provided: Bradley–Terry, CrowdBT, factorBT (per-worker
//! reliability plus a reaction vector over task features), pairwise HITS and
//! a LASSO-style linear position-bias model. The [`simulation`] module
//! generates synthetic data, injects uniform spammers and runs robustness
//! sweeps; [`metrics`] scores the resulting rankings.
//!
//! ```no_run
//! use factorbt::{fit, generate, accuracy, FitOptions, ModelKind, SimConfig};
//!
//! let sim = generate(&SimConfig::default())?;
//! let out = fit(&sim.dataset, ModelKind::FactorBt, &FitOptions::for_model(ModelKind::FactorBt))?;
//! let acc = accuracy(&out.params, sim.dataset.gold().unwrap())?;
//! # Ok::<(), factorbt::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod fit;
pub mod gradcheck;
pub mod graph;
pub mod hits;
pub mod init;
pub mod io;
pub mod linear;
pub mod metrics;
pub mod models;
pub mod optimizer;
pub mod packing;
mod precond;
pub mod simulation;

pub use data::{
    build_dataset, build_dataset_with_schema, ranking_from_scores, Comparison, Dataset, FeatureSchema, FitConfig,
    Gold, ItemId, ModelParams, Ranking, RawComparison, Side, WorkerId,
};
pub use error::{Error, Result};
pub use fit::{fit, fit_allow_disconnected, FitOptions, FitOutcome};
pub use hits::{hits_fit, HitsConfig};
pub use init::{init_default, init_factorbt};
pub use linear::{linear_fit, LinearFitConfig};
pub use metrics::{accuracy, pearson, system_win_prob};
pub use models::{bt_win_prob, crowdbt_win_prob, factorbt_win_prob, gradient, log_likelihood, logistic, ModelKind};
pub use optimizer::{maximize, OptimizerReport};
pub use simulation::{generate, generate_serp, inject_spammers, robustness_sweep, SimConfig, SpammerSpec};
