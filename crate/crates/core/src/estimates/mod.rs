//! Reports comparing computed norms, capacities and value distributions
//! with the density sums of the ladder, and checkers for the combinatorial
//! lemmas used along the way.

mod capacity;
mod cubes;
mod distribution;
mod gauge;
mod lemmas;
mod norm;
mod report;

pub use capacity::{
    capacity_band, capacity_proxy, capacity_report, last_rule_block, operator_eps_grid, tail_bound,
    CapacityOptions,
};
pub use cubes::{
    calibrate_threshold, threshold_cube_sets, threshold_report, threshold_unit, ThresholdCubeSets,
};
pub use distribution::{distribution_report, survival_curve, DistributionOptions, PORTION_B};
pub use gauge::{divergence_sweep, gauge_experiment, log_slope, mass_rhs, GaugeOptions};
pub use lemmas::{
    anticoncentration_check, flip_injection_check, flip_subfamilies_check, max_matching, selection_check,
    subsequence_check, wilson_interval, Anticoncentration, FlipVerdict, SelectionVerdict,
    SubsequenceVerdict, WilsonInterval, BETA_STEP, EXHAUSTIVE_CANDIDATES, MAX_FLIP_K, MIN_TRIALS,
    RANDOM_SUBSETS,
};
pub use norm::{
    norm_ratio_report, operator_ratio_report, transform_norm_sq, xi_shell_report, NormOptions,
};
pub use report::{band_width, sweep_summary, Context, EstimateReport, Ratio, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

/// Stopping rule for the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 2000,
        }
    }
}
