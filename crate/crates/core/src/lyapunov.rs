//! Top Lyapunov exponent of the linearized dynamo.
//!
//! With `a = g/(12 sigma1)` and `b = delta/sigma1` the exponent is
//!
//! ```text
//! lambda = -eps + (g/2) * N / D,
//! N = ∫_0^∞ sqrt(v) exp(-a v³ + b v) dv,   D = ∫_0^∞ v^{-1/2} exp(-a v³ + b v) dv.
//! ```
//!
//! Three evaluators are provided:
//!
//! * [`lyapunov_quadrature`]: the integrals directly, after `v = w²`;
//! * [`lyapunov_series`]: the gamma series obtained from `u = a v³`,
//!   `lambda + eps = (3 sigma1 g²/2)^{1/3} S(1/2) / S(1/6)` with
//!   `S(c) = Σ A^n Γ(n/3 + c) / n!` and `A = b / a^{1/3}`;
//! * [`lyapunov_hypergeometric`]: the same series regrouped by `n mod 3`
//!   into 1F2 functions of `x = A³/27`.
//!
//! All three compute the noise term `lambda + eps` first and subtract `eps`
//! last.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quadrature;
use crate::specfun::{gamma_fn, hyp1f2_scaled, Scaled, SeriesControl};

/// Time-changed Stratonovich form of the linearization, with the state
/// components reversed to `(B_phi, B_r)` and the diffusion normalized to
/// `[[0, 0], [1, 0]]`. Exponents relate by `lambda = time_scale * lambda_tilde`.
///
/// Because the original diffusion matrix squares to zero, the Itô and
/// Stratonovich forms of the linear system have the same drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedSystem {
    pub a0: Matrix2<f64>,
    pub a1: Matrix2<f64>,
    pub time_scale: f64,
}

pub fn normalize_stratonovich(params: &ModelParams) -> Result<NormalizedSystem> {
    let s = 2.0 * params.sigma1();
    if s == 0.0 {
        return Err(Error::ZeroNoise("Stratonovich normalization"));
    }
    let a0 = Matrix2::new(
        -params.eps() / s,
        -params.g() / s,
        -params.delta() / s,
        -params.eps() / s,
    );
    let a1 = Matrix2::new(0.0, 0.0, 1.0, 0.0);
    Ok(NormalizedSystem {
        a0,
        a1,
        time_scale: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Series,
    Hypergeometric,
    MonteCarlo,
}

impl Method {
    pub const ANALYTIC: [Method; 3] = [Method::Quadrature, Method::Series, Method::Hypergeometric];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Series => "series",
            Method::Hypergeometric => "hypergeometric",
            Method::MonteCarlo => "montecarlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Method::Quadrature),
            "series" => Ok(Method::Series),
            "hypergeometric" => Ok(Method::Hypergeometric),
            "montecarlo" => Ok(Method::MonteCarlo),
            other => Err(Error::OutOfDomain(format!("unknown Lyapunov method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LyapunovMeta {
    /// Series terms summed (series and hypergeometric routes).
    pub terms: usize,
    /// Integrand evaluations (quadrature route).
    pub evaluations: usize,
    /// Path count (Monte Carlo).
    pub samples: usize,
    /// Set when `sigma1 = 0` and the deterministic abscissa was returned.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// The exponent `lambda`.
    pub value: f64,
    /// `lambda + eps`, independent of `eps` bit for bit.
    pub noise_term: f64,
    pub method: Method,
    pub error_estimate: f64,
    pub meta: LyapunovMeta,
}

fn coefficients(params: &ModelParams) -> Result<(f64, f64)> {
    let s = params.sigma1();
    if s == 0.0 {
        return Err(Error::ZeroNoise("Lyapunov exponent evaluator"));
    }
    Ok((params.g() / (12.0 * s), params.delta() / s))
}

/// `(3 sigma1 g² / 2)^{1/3}`
fn prefactor(params: &ModelParams) -> f64 {
    (1.5 * params.sigma1() * params.g() * params.g()).cbrt()
}

/// `A = b / a^{1/3} = delta (12 / (g sigma1²))^{1/3}`
fn series_ratio(params: &ModelParams) -> Result<f64> {
    let (a, b) = coefficients(params)?;
    Ok(b / a.cbrt())
}

/// Log-integrand after the `v = w²` substitution, relative to its maximum.
///
/// With the peak `w_p` defined by `b = 3 a w_p⁴`,
/// `(-a w⁶ + b w²) - (-a w_p⁶ + b w_p²) = -a (w² - w_p²)² (2 w_p² + w²)`,
/// which avoids subtracting two large numbers when the noise is small.
fn log_weight(a: f64, peak: f64, w: f64) -> f64 {
    let d = (w - peak) * (w + peak);
    -a * d * d * (2.0 * peak * peak + w * w)
}

/// Drop below the peak at which the integrands are truncated; e^-50 ≈ 2e-22.
const TAIL_LOG_DROP: f64 = 50.0;

pub fn lyapunov_quadrature(params: &ModelParams) -> Result<LyapunovResult> {
    let (a, b) = coefficients(params)?;
    let g = params.g();

    let peak = if b > 0.0 { (b / (3.0 * a)).powf(0.25) } else { 0.0 };
    let log_f = |w: f64| log_weight(a, peak, w);

    // Right cut: grow until the integrand has dropped by TAIL_LOG_DROP, then bisect.
    let mut scale = if b > 0.0 {
        (1.0 / (8.0 * b)).sqrt().max(a.powf(-1.0 / 6.0) * 1e-3)
    } else {
        a.powf(-1.0 / 6.0)
    };
    let mut hi = peak + scale;
    let mut grow = 0;
    while log_f(hi) > -TAIL_LOG_DROP {
        hi = peak + (hi - peak) * 2.0;
        grow += 1;
        if grow > 200 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "quadrature tail bound",
                iterations: grow,
            });
        }
    }
    let mut lo_r = peak;
    for _ in 0..100 {
        let mid = 0.5 * (lo_r + hi);
        if log_f(mid) > -TAIL_LOG_DROP {
            lo_r = mid;
        } else {
            hi = mid;
        }
    }
    let right = hi;

    // Left cut: the integrand at w = 0 is exp(-top), often negligible for small noise.
    let left = if log_f(0.0) > -TAIL_LOG_DROP {
        0.0
    } else {
        let (mut lo, mut up) = (0.0, peak);
        for _ in 0..100 {
            let mid = 0.5 * (lo + up);
            if log_f(mid) > -TAIL_LOG_DROP {
                up = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };

    scale = scale.min(right - left);
    let breaks: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0]
        .iter()
        .map(|k| peak + k * scale)
        .collect();

    const REL_TOL: f64 = 1e-13;
    const MAX_SEGMENTS: usize = 4000;
    let num = quadrature::integrate(
        |w| w * w * log_f(w).exp(),
        left,
        right,
        &breaks,
        REL_TOL,
        0.0,
        MAX_SEGMENTS,
    )?;
    let den = quadrature::integrate(|w| log_f(w).exp(), left, right, &breaks, REL_TOL, 0.0, MAX_SEGMENTS)?;

    let noise_term = 0.5 * g * num.value / den.value;
    let rel_err = num.error / num.value.abs() + den.error / den.value.abs();
    Ok(LyapunovResult {
        value: noise_term - params.eps(),
        noise_term,
        method: Method::Quadrature,
        error_estimate: rel_err * noise_term.abs(),
        meta: LyapunovMeta {
            evaluations: num.evaluations + den.evaluations,
            ..Default::default()
        },
    })
}

pub fn lyapunov_series(params: &ModelParams, ctl: &SeriesControl) -> Result<LyapunovResult> {
    let big_a = series_ratio(params)?;
    let a3 = big_a * big_a * big_a;

    const SHIFTS: [f64; 2] = [0.5, 1.0 / 6.0];
    // chains[s][r] holds A^n Γ(n/3 + c_s) / n! for the current n ≡ r (mod 3).
    let mut chains = [[0.0f64; 3]; 2];
    for (s, c) in SHIFTS.iter().enumerate() {
        chains[s] = [
            gamma_fn(*c)?,
            big_a * gamma_fn(c + 1.0 / 3.0)?,
            0.5 * big_a * big_a * gamma_fn(c + 2.0 / 3.0)?,
        ];
    }
    let mut sums = [chains[0].iter().sum::<f64>(), chains[1].iter().sum::<f64>()];

    let converged = |chains: &[[f64; 3]; 2], sums: &[f64; 2]| {
        (0..2).all(|s| chains[s].iter().all(|t| t.abs() < ctl.rel_tol() * sums[s].abs()))
    };

    let mut n = 0usize; // index of chains[.][0]
    let mut terms = 3;
    while !converged(&chains, &sums) {
        if terms >= ctl.max_terms() {
            return Err(Error::NonConvergence {
                what: "Lyapunov gamma series",
                iterations: terms,
            });
        }
        for (s, c) in SHIFTS.iter().enumerate() {
            for r in 0..3 {
                let m = (n + r) as f64;
                chains[s][r] *= a3 * (m / 3.0 + c) / ((m + 1.0) * (m + 2.0) * (m + 3.0));
                sums[s] += chains[s][r];
            }
        }
        n += 3;
        terms += 3;
        // Common rescale of both sums; only their ratio is used.
        if sums[0].abs().max(sums[1].abs()) > 1e150 {
            let k = 2f64.powi(-600);
            for s in 0..2 {
                sums[s] *= k;
                for t in chains[s].iter_mut() {
                    *t *= k;
                }
            }
        }
    }

    let ratio = sums[0] / sums[1];
    let noise_term = prefactor(params) * ratio;
    let tail = (0..2)
        .map(|s| chains[s].iter().map(|t| t.abs()).sum::<f64>() / sums[s].abs())
        .sum::<f64>();
    Ok(LyapunovResult {
        value: noise_term - params.eps(),
        noise_term,
        method: Method::Series,
        error_estimate: tail * noise_term.abs(),
        meta: LyapunovMeta {
            terms,
            ..Default::default()
        },
    })
}

/// 1F2 argument of the regrouped series, `x = A³/27 = 4 delta³ / (9 g sigma1²)`.
pub fn hypergeometric_argument(params: &ModelParams) -> Result<f64> {
    let big_a = series_ratio(params)?;
    Ok(big_a * big_a * big_a / 27.0)
}

/// The pair `(G1, G2)` with `lambda + eps = (3 sigma1 g²/2)^{1/3} G1/G2`:
///
/// ```text
/// G1 = Γ(1/2) 1F2(1/2; 1/3, 2/3; x) + A Γ(5/6) 1F2(5/6; 2/3, 4/3; x)
///      + (A²/12) Γ(1/6) 1F2(7/6; 4/3, 5/3; x)
/// G2 = Γ(1/6) 1F2(1/6; 1/3, 2/3; x) + A Γ(1/2) 1F2(1/2; 2/3, 4/3; x)
///      + (A²/2) Γ(5/6) 1F2(5/6; 4/3, 5/3; x)
/// ```
///
/// with `A = delta (12/(g sigma1²))^{1/3}` and `x = A³/27`.
pub fn hypergeometric_terms(params: &ModelParams) -> Result<(Scaled, Scaled, usize, f64)> {
    let big_a = series_ratio(params)?;
    let x = big_a * big_a * big_a / 27.0;
    // 1F2 terms behave like x^n/(n!)², peaking near n ~ sqrt(x).
    let max_terms = 500usize.max((3.0 * x.sqrt()) as usize + 200);
    let ctl = SeriesControl::new(1e-16, max_terms)?;

    let third = 1.0 / 3.0;
    let sixth = 1.0 / 6.0;
    let (g_half, g_sixth, g_five_sixths) = (gamma_fn(0.5)?, gamma_fn(sixth)?, gamma_fn(5.0 * sixth)?);

    let mut terms = 0;
    let mut tail = 0.0f64;
    let mut f = |a: f64, b1: f64, b2: f64| -> Result<Scaled> {
        let s = hyp1f2_scaled(a, b1, b2, x, &ctl)?;
        terms += s.terms;
        tail = tail.max(s.tail);
        Ok(s.value)
    };

    let g1 = f(0.5, third, 2.0 * third)?
        .scale(g_half)
        .add(f(5.0 * sixth, 2.0 * third, 4.0 * third)?.scale(big_a * g_five_sixths))
        .add(f(7.0 * sixth, 4.0 * third, 5.0 * third)?.scale(big_a * big_a / 12.0 * g_sixth));
    let g2 = f(sixth, third, 2.0 * third)?
        .scale(g_sixth)
        .add(f(0.5, 2.0 * third, 4.0 * third)?.scale(big_a * g_half))
        .add(f(5.0 * sixth, 4.0 * third, 5.0 * third)?.scale(big_a * big_a / 2.0 * g_five_sixths));
    Ok((g1, g2, terms, tail))
}

pub fn lyapunov_hypergeometric(params: &ModelParams) -> Result<LyapunovResult> {
    let (g1, g2, terms, tail) = hypergeometric_terms(params)?;
    let noise_term = prefactor(params) * g1.ratio(g2);
    if !noise_term.is_finite() {
        return Err(Error::Overflow("hypergeometric Lyapunov ratio"));
    }
    Ok(LyapunovResult {
        value: noise_term - params.eps(),
        noise_term,
        method: Method::Hypergeometric,
        // Each of the six sums is truncated at relative size `tail`; the
        // neglected remainder of a positive series with geometrically
        // shrinking terms is at most a few times that.
        error_estimate: 4.0 * tail * noise_term.abs() + 8.0 * f64::EPSILON * noise_term.abs(),
        meta: LyapunovMeta {
            terms,
            ..Default::default()
        },
    })
}

/// Term budget for [`lyapunov_series`]: the gamma series runs three times as
/// many terms as each 1F2, which peak near `sqrt(x)`.
pub fn series_control_for(params: &ModelParams) -> Result<SeriesControl> {
    let x = hypergeometric_argument(params)?;
    SeriesControl::new(1e-16, 500usize.max((9.0 * x.sqrt()) as usize + 600))
}

/// Dispatches to an analytic evaluator. For `sigma1 = 0` returns the
/// deterministic spectral abscissa `-eps + sqrt(g delta)` with
/// `meta.deterministic` set.
pub fn lyapunov(params: &ModelParams, method: Method) -> Result<LyapunovResult> {
    if params.sigma1() == 0.0 {
        let noise_term = params.critical_eps();
        return Ok(LyapunovResult {
            value: noise_term - params.eps(),
            noise_term,
            method,
            error_estimate: 0.0,
            meta: LyapunovMeta {
                deterministic: true,
                ..Default::default()
            },
        });
    }
    match method {
        Method::Quadrature => lyapunov_quadrature(params),
        Method::Series => lyapunov_series(params, &series_control_for(params)?),
        Method::Hypergeometric => lyapunov_hypergeometric(params),
        Method::MonteCarlo => Err(Error::OutOfDomain(
            "the Monte Carlo estimate needs a simulation config; use sde::mc_lyapunov".into(),
        )),
    }
}

/// `-eps + (3 sigma1 g²/2)^{1/3} Γ(1/2)/Γ(1/6)`: the exponent at `delta = 0`,
/// and the leading behaviour for large noise.
pub fn zero_delta_limit(params: &ModelParams) -> Result<f64> {
    Ok(prefactor(params) * gamma_fn(0.5)? / gamma_fn(1.0 / 6.0)? - params.eps())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(g: f64, delta: f64, eps: f64, sigma1: f64) -> ModelParams {
        ModelParams::linear(g, delta, eps, sigma1).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // lambda from 30-digit numerical integration of the defining integrals.
    const REFERENCE: [((f64, f64, f64, f64), f64); 3] = [
        ((0.99, 0.01, 0.1, 0.05), 0.040_805_076_599_930_644_837_825_147_544_7),
        ((0.99, 0.04, 0.1, 0.02), 0.046_899_649_666_447_175_796_024_776_282_1),
        ((1.5, 0.1, 0.2, 0.001), 0.183_451_751_979_323_432_963_445_805_051),
    ];

    #[test]
    fn normalized_system_entries() {
        let n = normalize_stratonovich(&p(0.99, 0.01, 0.1, 0.05)).unwrap();
        let want = Matrix2::new(-1.0, -9.9, -0.1, -1.0);
        assert!((n.a0 - want).amax() < 1e-14);
        assert_eq!(n.a1, Matrix2::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(n.a1 * n.a1, Matrix2::zeros());
        assert!((n.time_scale - 0.1).abs() < 1e-17);
    }

    #[test]
    fn normalized_eigenvalues() {
        let params = p(0.99, 0.01, 0.1, 0.05);
        let n = normalize_stratonovich(&params).unwrap();
        let mut ev: Vec<f64> = n.a0.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let s = 0.1;
        let r = (0.01f64 * 0.99).sqrt();
        assert!((ev[1] - (-0.1 + r) / s).abs() < 1e-13);
        assert!((ev[0] - (-0.1 - r) / s).abs() < 1e-13);
    }

    #[test]
    fn normalization_requires_noise() {
        assert!(matches!(
            normalize_stratonovich(&p(0.99, 0.01, 0.1, 0.0)),
            Err(Error::ZeroNoise(_))
        ));
        assert!(lyapunov_quadrature(&p(0.99, 0.01, 0.1, 0.0)).is_err());
    }

    #[test]
    fn all_routes_match_reference_integrals() {
        for ((g, d, e, s), want) in REFERENCE {
            let params = p(g, d, e, s);
            let q = lyapunov_quadrature(&params).unwrap().value;
            let ser = lyapunov_series(&params, &SeriesControl::default()).unwrap().value;
            let h = lyapunov_hypergeometric(&params).unwrap().value;
            for v in [q, ser, h] {
                assert!(rel(v, want) < 1e-10, "{params:?}: {q} {ser} {h} vs {want}");
            }
        }
    }

    #[test]
    fn zero_delta_closed_form() {
        for s in [0.01, 0.1, 1.0] {
            let params = p(0.99, 0.0, 0.1, s);
            let want = zero_delta_limit(&params).unwrap();
            let h = lyapunov_hypergeometric(&params).unwrap();
            let ser = lyapunov_series(&params, &SeriesControl::default()).unwrap();
            let q = lyapunov_quadrature(&params).unwrap();
            assert!((h.value - want).abs() < 1e-12);
            assert!((ser.value - want).abs() < 1e-12);
            assert!((q.value - want).abs() < 1e-10, "{} vs {want}", q.value);
        }
        let (g1, g2, _, _) = hypergeometric_terms(&p(0.99, 0.0, 0.1, 0.05)).unwrap();
        assert!(rel(g1.to_f64(), gamma_fn(0.5).unwrap()) < 1e-15);
        assert!(rel(g2.to_f64(), gamma_fn(1.0 / 6.0).unwrap()) < 1e-15);
    }

    #[test]
    fn small_noise_limit() {
        let params = p(0.99, 0.01, 0.05, 1e-8);
        let q = lyapunov_quadrature(&params).unwrap().value;
        assert!((q - params.deterministic_abscissa()).abs() < 1e-3, "{q}");
        let h = lyapunov_hypergeometric(&params).unwrap().value;
        assert!(rel(h, q) < 1e-8, "{h} vs {q}");
        let params = p(0.99, 0.01, 0.05, 1e-6);
        let q = lyapunov_quadrature(&params).unwrap().value;
        assert!((q - params.deterministic_abscissa()).abs() < 1e-2);
    }

    #[test]
    fn eps_enters_additively() {
        for m in Method::ANALYTIC {
            let a = lyapunov(&p(0.99, 0.04, 0.1, 0.02), m).unwrap();
            let b = lyapunov(&p(0.99, 0.04, 0.2, 0.02), m).unwrap();
            assert_eq!(a.noise_term, b.noise_term);
            assert!((a.value - b.value - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_fallback() {
        let r = lyapunov(&p(0.99, 0.01, 0.05, 0.0), Method::Hypergeometric).unwrap();
        assert!(r.meta.deterministic);
        assert!((r.value - 0.049_498_743_710_662).abs() < 1e-12);
        let crit = (0.99f64 * 0.01).sqrt();
        let r = lyapunov(&p(0.99, 0.01, crit, 0.0), Method::Quadrature).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn series_cap_is_reported() {
        let ctl = SeriesControl::new(1e-15, 50).unwrap();
        let err = lyapunov_series(&p(0.5, 0.1, 0.1, 1e-4), &ctl).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn monte_carlo_not_dispatched() {
        assert!(lyapunov(&p(0.99, 0.01, 0.1, 0.05), Method::MonteCarlo).is_err());
    }
}
