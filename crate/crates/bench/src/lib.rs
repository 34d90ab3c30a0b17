//! Shared fixtures for the criterion benchmarks.

use dynamo_core::ModelParams;

/// Parameter points used across benchmarks: the reference point from the
/// equilibria example plus a low-noise and a high-noise variant.
pub fn reference_points() -> Vec<(&'static str, ModelParams)> {
    vec![
        ("reference", ModelParams::linear(0.99, 0.01, 0.1, 0.05).unwrap()),
        ("low_noise", ModelParams::linear(1.5, 0.1, 0.2, 0.001).unwrap()),
        ("high_noise", ModelParams::linear(0.5, 0.001, 0.1, 1.0).unwrap()),
    ]
}
