//! Shared fixtures for the benches in `benches/`.

use qvdp_core::{ModelParams, ScaledParams};

/// Limit-cycle point used by most benches.
pub fn limit_cycle(n_ex: f64) -> ModelParams {
    ModelParams::from_ratios(1.0, n_ex, 0.1, 0.4).expect("valid fixture")
}

/// Bistable point with two locked phases.
pub fn bistable(n_ex: f64) -> ModelParams {
    ModelParams::from_ratios(1.0, n_ex, 0.1, 2.0).expect("valid fixture")
}

pub fn scaled(eta_ratio: f64, n_ex: f64) -> ScaledParams {
    ScaledParams::from_ratios(0.1, eta_ratio, n_ex).expect("valid fixture")
}
