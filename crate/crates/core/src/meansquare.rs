//! Exponential mean-square stability of the linearized system.
//!
//! The second moment `E[x xᵀ]`, flattened, evolves under the 4×4 matrix
//! `S = I⊗Λ + Λ⊗I + Σ⊗Σ`. Its spectrum splits into `-2 eps` on the
//! antisymmetric vector `(0, 1, -1, 0)` and `-2 eps + t` on the symmetric
//! subspace, where `t³ - 4 g delta t - 4 g² sigma1 = 0`.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linearize, ModelParams};
use crate::roots::largest_depressed_root;

/// Relative band on `eps² - g delta` inside which a point is called critical.
pub const CRITICALITY_BAND: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMatrix {
    pub s: Matrix4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

impl Criticality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Criticality::Subcritical => "subcritical",
            Criticality::Critical => "critical",
            Criticality::Supercritical => "supercritical",
        }
    }
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsReport {
    pub abscissa: f64,
    pub ms_stable: bool,
    pub criticality: Criticality,
    /// `2 eps (eps² - g delta) / g²`, present only when subcritical.
    pub threshold_sigma: Option<f64>,
    /// Stationary `E[B_phi²]` under additive noise; `None` outside the
    /// subcritical region where no stationary covariance exists.
    pub ryashko_trace: Option<f64>,
}

/// The explicit layout of `S`.
pub fn explicit_stability_matrix(params: &ModelParams) -> Matrix4<f64> {
    let (g, d, e2, s) = (params.g(), params.delta(), 2.0 * params.eps(), params.sigma1());
    Matrix4::new(
        -e2, -d, -d, 2.0 * s, //
        -g, -e2, 0.0, -d, //
        -g, 0.0, -e2, -d, //
        0.0, -g, -g, -e2,
    )
}

/// Builds `S` from Kronecker products of the linearization.
///
/// # Panics
///
/// Panics if the Kronecker form and [`explicit_stability_matrix`] disagree.
pub fn build_stability_matrix(params: &ModelParams) -> StabilityMatrix {
    let lin = linearize(params);
    let id = Matrix2::<f64>::identity();
    let s: Matrix4<f64> =
        id.kronecker(&lin.drift) + lin.drift.kronecker(&id) + lin.diffusion.kronecker(&lin.diffusion);
    let explicit = explicit_stability_matrix(params);
    assert!(
        (s - explicit).amax() <= 4.0 * f64::EPSILON * explicit.amax(),
        "Kronecker stability matrix does not match its explicit layout"
    );
    StabilityMatrix { s }
}

/// Largest root `t*` of `t³ - 4 g delta t - 4 g² sigma1`.
fn symmetric_shift(params: &ModelParams) -> f64 {
    let g = params.g();
    largest_depressed_root(-4.0 * g * params.delta(), -4.0 * g * g * params.sigma1())
}

/// Spectral abscissa from the cubic reduction.
pub fn spectral_abscissa(params: &ModelParams) -> f64 {
    -2.0 * params.eps() + symmetric_shift(params).max(0.0)
}

/// Spectral abscissa from a general eigensolver (real Schur form).
pub fn spectral_abscissa_numeric(m: &StabilityMatrix) -> f64 {
    m.s.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn criticality(params: &ModelParams) -> Criticality {
    let e2 = params.eps() * params.eps();
    let gd = params.g() * params.delta();
    let diff = e2 - gd;
    if diff.abs() <= CRITICALITY_BAND * e2.max(gd) {
        Criticality::Critical
    } else if diff > 0.0 {
        Criticality::Subcritical
    } else {
        Criticality::Supercritical
    }
}

/// `sigma1* = 2 eps (eps² - g delta) / g²`, or `None` unless subcritical.
pub fn threshold_sigma(params: &ModelParams) -> Option<f64> {
    (criticality(params) == Criticality::Subcritical).then(|| {
        let (g, e) = (params.g(), params.eps());
        2.0 * e * (e * e - g * params.delta()) / (g * g)
    })
}

/// Stationary covariance `M` of `dx = Λ x dt + Q dW`, `Q = (sqrt(2 sigma1), 0)ᵀ`,
/// from `Λ M + M Λᵀ + Q Qᵀ = 0`.
pub fn stationary_covariance(params: &ModelParams) -> Result<Matrix2<f64>> {
    if criticality(params) != Criticality::Subcritical {
        return Err(Error::OutOfDomain(format!(
            "stationary covariance needs a stable drift (eps > sqrt(g delta) = {})",
            params.critical_eps()
        )));
    }
    let (e, d, g) = (params.eps(), params.delta(), params.g());
    // Unknowns (m11, m12, m22) of the symmetric M.
    let a = Matrix3::new(
        -2.0 * e, -2.0 * d, 0.0, //
        -g, -2.0 * e, -d, //
        0.0, -2.0 * g, -2.0 * e,
    );
    let rhs = Vector3::new(-2.0 * params.sigma1(), 0.0, 0.0);
    let m = a.lu().solve(&rhs).ok_or(Error::OutOfDomain(
        "singular stationary covariance equation".into(),
    ))?;
    Ok(Matrix2::new(m[0], m[1], m[1], m[2]))
}

/// Mean-square criterion `tr(M SᵀS) < 1` with `S = [[0, 1], [0, 0]]`, i.e. the
/// stationary variance of `B_phi`. Stability holds iff the value is below 1.
pub fn ryashko_trace(params: &ModelParams) -> Result<f64> {
    let m = stationary_covariance(params)?;
    let s = Matrix2::new(0.0, 1.0, 0.0, 0.0);
    Ok((m * s.transpose() * s).trace())
}

pub fn ms_report(params: &ModelParams) -> MsReport {
    let abscissa = spectral_abscissa(params);
    MsReport {
        abscissa,
        ms_stable: abscissa < 0.0,
        criticality: criticality(params),
        threshold_sigma: threshold_sigma(params),
        ryashko_trace: ryashko_trace(params).ok(),
    }
}
