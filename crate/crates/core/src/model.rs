//! The reduced alpha-Omega dynamo SDE.
//!
//! State is the field `(B_r, B_phi)`. The nonlinear system is
//!
//! ```text
//! dB = f1(B) dt + f2(B) dW
//! f1 = ( -(delta*phi_a(B_phi)*B_phi + eps*phi_b(B_phi)*B_r),
//!        -(g*B_r + eps*phi_b(B_phi)*B_phi) )
//! f2 = ( -sqrt(2*sigma1)*phi_a(B_phi)*B_phi, 0 )
//! ```
//!
//! with quenching functions `phi_a(x) = 1/(1 + k_alpha x²)` and
//! `phi_b(x) = (1 + x²)/(1 + (k_beta + 1) x²)`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::cubic_real_roots;

/// Absolute max-norm tolerance on `f1` for a reported equilibrium.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-12;

/// Dimensionless parameters of the dynamo model.
///
/// `g`, `k_alpha`, `k_beta` must be strictly positive; `delta`, `eps` and
/// `sigma1` must be non-negative. The zero values of `delta` and `eps` are
/// admitted because they are the natural limits used by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    g: f64,
    delta: f64,
    eps: f64,
    sigma1: f64,
    k_alpha: f64,
    k_beta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            g: 0.99,
            delta: 0.01,
            eps: 0.1,
            sigma1: 0.0,
            k_alpha: 1.0,
            k_beta: 1.0,
        }
    }
}

fn check(name: &'static str, value: f64, strictly_positive: bool) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        });
    }
    if strictly_positive && value <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be > 0",
        });
    }
    if value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be >= 0",
        });
    }
    Ok(())
}

impl ModelParams {
    pub fn new(g: f64, delta: f64, eps: f64, sigma1: f64, k_alpha: f64, k_beta: f64) -> Result<Self> {
        check("g", g, true)?;
        check("delta", delta, false)?;
        check("eps", eps, false)?;
        check("sigma1", sigma1, false)?;
        check("k_alpha", k_alpha, true)?;
        check("k_beta", k_beta, true)?;
        Ok(Self {
            g,
            delta,
            eps,
            sigma1,
            k_alpha,
            k_beta,
        })
    }

    /// Linear-analysis parameters with unit quenching constants.
    pub fn linear(g: f64, delta: f64, eps: f64, sigma1: f64) -> Result<Self> {
        Self::new(g, delta, eps, sigma1, 1.0, 1.0)
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn k_alpha(&self) -> f64 {
        self.k_alpha
    }
    pub fn k_beta(&self) -> f64 {
        self.k_beta
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        Self::new(g, self.delta, self.eps, self.sigma1, self.k_alpha, self.k_beta)
    }
    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.g, delta, self.eps, self.sigma1, self.k_alpha, self.k_beta)
    }
    pub fn with_eps(self, eps: f64) -> Result<Self> {
        Self::new(self.g, self.delta, eps, self.sigma1, self.k_alpha, self.k_beta)
    }
    pub fn with_sigma1(self, sigma1: f64) -> Result<Self> {
        Self::new(self.g, self.delta, self.eps, sigma1, self.k_alpha, self.k_beta)
    }

    /// `sqrt(g * delta)`: the value of `eps` at which the unperturbed drift is critical.
    pub fn critical_eps(&self) -> f64 {
        (self.g * self.delta).sqrt()
    }

    /// Spectral abscissa of the linear drift, `-eps + sqrt(g delta)`.
    pub fn deterministic_abscissa(&self) -> f64 {
        -self.eps + self.critical_eps()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldState {
    pub b_r: f64,
    pub b_phi: f64,
}

impl FieldState {
    pub const ZERO: FieldState = FieldState { b_r: 0.0, b_phi: 0.0 };

    pub fn new(b_r: f64, b_phi: f64) -> Self {
        Self { b_r, b_phi }
    }

    pub fn is_finite(&self) -> bool {
        self.b_r.is_finite() && self.b_phi.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.b_r.abs().max(self.b_phi.abs())
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.b_r, self.b_phi)
    }
}

impl From<Vector2<f64>> for FieldState {
    fn from(v: Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }
}

/// Linearized drift and diffusion matrices about the zero field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystem {
    pub drift: Matrix2<f64>,
    pub diffusion: Matrix2<f64>,
}

impl LinearSystem {
    pub fn new(drift: Matrix2<f64>, diffusion: Matrix2<f64>) -> Self {
        Self { drift, diffusion }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub state: FieldState,
    /// Max-norm of the drift at `state`.
    pub residual: f64,
}

/// Returns `(phi_alpha, phi_beta)` at the azimuthal field `b_phi`.
pub fn quenching(b_phi: f64, params: &ModelParams) -> (f64, f64) {
    let x2 = b_phi * b_phi;
    let phi_alpha = 1.0 / (1.0 + params.k_alpha * x2);
    let phi_beta = (1.0 + x2) / (1.0 + (params.k_beta + 1.0) * x2);
    (phi_alpha, phi_beta)
}

pub fn drift_nonlinear(state: FieldState, params: &ModelParams) -> Vector2<f64> {
    let (pa, pb) = quenching(state.b_phi, params);
    Vector2::new(
        -(params.delta * pa * state.b_phi + params.eps * pb * state.b_r),
        -(params.g * state.b_r + params.eps * pb * state.b_phi),
    )
}

pub fn diffusion_nonlinear(state: FieldState, params: &ModelParams) -> Vector2<f64> {
    let (pa, _) = quenching(state.b_phi, params);
    Vector2::new(-(2.0 * params.sigma1).sqrt() * pa * state.b_phi, 0.0)
}

/// Steady states of the noise-free system (`sigma1` is ignored).
///
/// For `sigma1 > 0` only the zero field remains an equilibrium of the full
/// SDE, since the noise coefficient vanishes only at `B_phi = 0`.
///
/// Eliminating `B_r = -(eps/g) phi_b(B_phi) B_phi` leaves, for `B_phi != 0`,
/// `delta g (1 + (k_beta+1) u)² = eps² (1 + k_alpha u)(1 + u)²` with
/// `u = B_phi²`. Each positive root gives the pair `B_phi = ±sqrt(u)`.
/// Results are sorted by `b_phi` ascending.
pub fn find_equilibria(params: &ModelParams) -> Vec<Equilibrium> {
    let origin = Equilibrium {
        state: FieldState::ZERO,
        residual: 0.0,
    };
    if params.eps == 0.0 {
        // Second drift component forces B_r = 0, then the first forces B_phi = 0.
        return vec![origin];
    }

    let e2 = params.eps * params.eps;
    let dg = params.delta * params.g;
    let c = params.k_beta + 1.0;
    let ka = params.k_alpha;
    let c3 = e2 * ka;
    let c2 = e2 * (1.0 + 2.0 * ka) - dg * c * c;
    let c1 = e2 * (2.0 + ka) - 2.0 * dg * c;
    let c0 = e2 - dg;

    let mut us: Vec<f64> = cubic_real_roots(c3, c2, c1, c0)
        .into_iter()
        .filter(|u| u.is_finite() && *u > 0.0)
        .collect();
    us.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(b.abs()));

    let mut out = vec![origin];
    for u in us {
        let root = u.sqrt();
        for b_phi in [root, -root] {
            let (_, pb) = quenching(b_phi, params);
            let state = FieldState::new(-(params.eps / params.g) * b_phi * pb, b_phi);
            let residual = drift_nonlinear(state, params).amax();
            out.push(Equilibrium { state, residual });
        }
    }
    out.sort_by(|a, b| a.state.b_phi.total_cmp(&b.state.b_phi));
    out
}

/// Linearization about the zero field:
/// `drift = [[-eps, -delta], [-g, -eps]]`, `diffusion = [[0, -sqrt(2 sigma1)], [0, 0]]`.
pub fn linearize(params: &ModelParams) -> LinearSystem {
    let drift = Matrix2::new(-params.eps, -params.delta, -params.g, -params.eps);
    let diffusion = Matrix2::new(0.0, -(2.0 * params.sigma1).sqrt(), 0.0, 0.0);
    LinearSystem { drift, diffusion }
}

/// Henrici departure from normality in the Frobenius norm,
/// `sqrt(sum s_j² - sum |mu_j|²)`.
///
/// `sum s_j²` is the trace of `MᵀM` (the sum of its eigenvalues). Subtracting
/// the eigenvalue moduli is done in a cancellation-free form: with real
/// eigenvalues `sum mu_j² = tr(M²)`, so the difference is `(m12 - m21)²`;
/// with a complex pair `sum |mu_j|² = 2 det M`, so the difference is
/// `(m11 - m22)² + (m12 + m21)²`.
pub fn departure_from_normality(m: &Matrix2<f64>) -> f64 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    // Eigenvalue discriminant tr²/4 - det, written without cancellation.
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    let dep2 = if disc >= 0.0 {
        (b - c) * (b - c)
    } else {
        (a - d) * (a - d) + (b + c) * (b + c)
    };
    dep2.sqrt()
}
