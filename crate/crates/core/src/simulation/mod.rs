//! Synthetic data, spammer injection and robustness sweeps.

mod generate;
mod spammers;
mod sweep;

pub use generate::{generate, generate_serp, SerpConfig, SerpSimulated, SimConfig, Simulated};
pub use spammers::{inject_spammers, spammer_count, SpammerKind, SpammerSpec, WeightedSpammer};
pub use sweep::{cell_seed, robustness_sweep, SweepCell, SweepMetric, SweepOptions, SweepResult, SweepSummary};
