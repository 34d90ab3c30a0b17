//! Monte Carlo engine: Euler-Maruyama paths, pathwise and mean-square growth
//! rates, and the stationary density of the projective angle.
//!
//! For the linear system the diffusion matrix squares to zero, so the
//! Milstein correction `½ Σ(Σx)(dW² - dt)` vanishes and Euler-Maruyama is
//! already the Milstein scheme.
//!
//! Paths run in parallel with one random stream each and are reduced in path
//! order, so results do not depend on the number of worker threads.

mod rng;

pub use rng::{mix, NormalStream, RngAlgorithm, RngSpec};

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{diffusion_nonlinear, drift_nonlinear, FieldState, LinearSystem, ModelParams};

/// Magnitude beyond which a nonlinear path is flagged as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;

/// Fraction of steps discarded before the angular histogram is filled.
pub const ANGULAR_BURN_IN: f64 = 0.1;

/// Upper bound on stored time points per path for the second-moment fit.
const MOMENT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_paths: usize,
    pub renorm_every: usize,
    pub x0: FieldState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 2000.0,
            n_paths: 32,
            renorm_every: 10,
            x0: FieldState::new(1.0, 1.0),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, reason: &'static str| {
            Err(Error::InvalidParameter { name, value, reason })
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", self.dt, "must be positive and finite");
        }
        if !(self.t_final.is_finite() && self.t_final >= 100.0 * self.dt) {
            return bad("t_final", self.t_final, "must be at least 100 dt");
        }
        if self.n_paths == 0 {
            return bad("n_paths", 0.0, "must be at least 1");
        }
        if self.renorm_every == 0 {
            return bad("renorm_every", 0.0, "must be at least 1");
        }
        if !self.x0.is_finite() {
            return bad("x0", f64::NAN, "must be finite");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn require_nonzero_start(&self) -> Result<()> {
        if self.x0 == FieldState::ZERO {
            return Err(Error::InvalidParameter {
                name: "x0",
                value: 0.0,
                reason: "must be nonzero for growth-rate estimation",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// `x + Λ x dt + Σ x dW`.
pub fn em_step_linear(x: Vector2<f64>, sys: &LinearSystem, dt: f64, dw: f64) -> Vector2<f64> {
    x + sys.drift * x * dt + sys.diffusion * x * dw
}

/// The Milstein term `½ Σ(Σ x)(dW² - dt)` that Euler-Maruyama omits.
pub fn milstein_correction(x: Vector2<f64>, sys: &LinearSystem, dt: f64, dw: f64) -> Vector2<f64> {
    0.5 * sys.diffusion * (sys.diffusion * x) * (dw * dw - dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearStep {
    pub state: FieldState,
    /// Set once a component exceeds [`DIVERGENCE_THRESHOLD`] or is not finite.
    pub diverged: bool,
}

/// `x + f1(x) dt + f2(x) dW`.
pub fn em_step_nonlinear(state: FieldState, params: &ModelParams, dt: f64, dw: f64) -> NonlinearStep {
    let next = state.as_vector() + drift_nonlinear(state, params) * dt + diffusion_nonlinear(state, params) * dw;
    let state = FieldState::from(next);
    let diverged = !state.is_finite() || state.max_abs() > DIVERGENCE_THRESHOLD;
    NonlinearStep { state, diverged }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearPath {
    pub final_state: FieldState,
    /// Step index at which the path diverged, if it did.
    pub diverged_at: Option<usize>,
}

/// One path of the nonlinear SDE, stopping early on divergence.
pub fn simulate_nonlinear_path(params: &ModelParams, cfg: &SimConfig, rng: &RngSpec, path_index: u64) -> Result<NonlinearPath> {
    cfg.validate()?;
    let mut normals = rng.normals(path_index);
    let sqrt_dt = cfg.dt.sqrt();
    let mut state = cfg.x0;
    for step in 0..cfg.n_steps() {
        let out = em_step_nonlinear(state, params, cfg.dt, sqrt_dt * normals.next_normal());
        state = out.state;
        if out.diverged {
            return Ok(NonlinearPath {
                final_state: state,
                diverged_at: Some(step),
            });
        }
    }
    Ok(NonlinearPath {
        final_state: state,
        diverged_at: None,
    })
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Number of time blocks used for the standard error of a single path.
const SINGLE_PATH_BLOCKS: usize = 10;

/// Log-norm increments of one renormalized path, summed per block.
fn lyapunov_path(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec, path_index: u64, blocks: usize) -> Vec<f64> {
    let mut normals = rng.normals(path_index);
    let sqrt_dt = cfg.dt.sqrt();
    let n_steps = cfg.n_steps();
    let x0 = cfg.x0.as_vector();
    let mut x = x0 / x0.norm();
    let mut sums = vec![0.0; blocks];
    for step in 0..n_steps {
        x = em_step_linear(x, sys, cfg.dt, sqrt_dt * normals.next_normal());
        let last = step + 1 == n_steps;
        if (step + 1) % cfg.renorm_every == 0 || last {
            let n = x.norm();
            sums[step * blocks / n_steps] += libm::log(n);
            x /= n;
        }
    }
    sums
}

/// Pathwise exponent `lim (1/t) log|x(t)|` of the linear system, averaged
/// over paths. The state is rescaled to unit norm every `renorm_every` steps.
///
/// With one path the standard error comes from ten consecutive time blocks.
pub fn mc_lyapunov(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec) -> Result<McEstimate> {
    cfg.validate()?;
    cfg.require_nonzero_start()?;
    let t = cfg.n_steps() as f64 * cfg.dt;
    if cfg.n_paths == 1 {
        let blocks = lyapunov_path(sys, cfg, rng, 0, SINGLE_PATH_BLOCKS);
        let rates: Vec<f64> = blocks.iter().map(|b| b * SINGLE_PATH_BLOCKS as f64 / t).collect();
        let (value, std_error) = mean_and_se(&rates);
        return finite_estimate(value, std_error, 1);
    }
    let rates: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| lyapunov_path(sys, cfg, rng, i, 1)[0] / t)
        .collect();
    let (value, std_error) = mean_and_se(&rates);
    finite_estimate(value, std_error, cfg.n_paths)
}

fn finite_estimate(value: f64, std_error: f64, n_samples: usize) -> Result<McEstimate> {
    if !value.is_finite() || !std_error.is_finite() {
        return Err(Error::Overflow("Monte Carlo estimate"));
    }
    Ok(McEstimate {
        value,
        std_error,
        n_samples,
    })
}

/// `log|x|²` of one path at `samples` equally spaced checkpoints.
fn log_norm2_path(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec, path_index: u64, stride: usize, samples: usize) -> Vec<f64> {
    let mut normals = rng.normals(path_index);
    let sqrt_dt = cfg.dt.sqrt();
    let mut x = cfg.x0.as_vector();
    let mut offset = 0.0;
    let mut out = Vec::with_capacity(samples);
    for step in 0..stride * samples {
        x = em_step_linear(x, sys, cfg.dt, sqrt_dt * normals.next_normal());
        if (step + 1) % cfg.renorm_every == 0 || (step + 1) % stride == 0 {
            let n = x.norm();
            if n > 0.0 {
                offset += libm::log(n);
                x /= n;
            }
        }
        if (step + 1) % stride == 0 {
            let n = x.norm();
            out.push(2.0 * (offset + if n > 0.0 { libm::log(n) } else { f64::NEG_INFINITY }));
        }
    }
    out
}

fn log_mean_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + libm::exp(v - m), n + 1));
    m + libm::log(sum / n as f64)
}

/// Least-squares slope of `y` against `t`, with its residual standard error.
fn slope(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - tm) * (ti - tm)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(ti, yi)| (ti - tm) * (yi - ym)).sum();
    let b = sxy / sxx;
    let rss: f64 = t.iter().zip(y).map(|(ti, yi)| (yi - ym - b * (ti - tm)).powi(2)).sum();
    (b, (rss / (n - 2.0) / sxx).sqrt())
}

/// Growth rate of `E|x|²`: slope of `log mean |x|²` over the second half of
/// the horizon. Path norms are carried as log offsets and averaged by
/// log-sum-exp. The standard error is a delete-one jackknife over paths, or
/// the regression error for a single path.
///
/// `|x|²` is heavy-tailed, and with too few paths the sample mean follows
/// the typical path (rate `2 lambda`) rather than the mean. The path count
/// needs to grow roughly like `exp(t_final (abscissa - 2 lambda))`.
pub fn mc_second_moment(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec) -> Result<McEstimate> {
    cfg.validate()?;
    cfg.require_nonzero_start()?;
    let n_steps = cfg.n_steps();
    let samples = MOMENT_SAMPLES.min(n_steps);
    let stride = n_steps / samples;
    let paths: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| log_norm2_path(sys, cfg, rng, i, stride, samples))
        .collect();

    let first = samples / 2;
    let times: Vec<f64> = (first..samples).map(|k| ((k + 1) * stride) as f64 * cfg.dt).collect();
    let column = |k: usize| paths.iter().map(move |p| p[k]);
    let y: Vec<f64> = (first..samples).map(|k| log_mean_exp(column(k))).collect();
    let (value, reg_se) = slope(&times, &y);

    let std_error = if cfg.n_paths == 1 {
        reg_se
    } else {
        let n = cfg.n_paths as f64;
        // Per time point: max and scaled sum, so each leave-one-out mean is O(1).
        let stats: Vec<(f64, f64)> = (first..samples)
            .map(|k| {
                let m = column(k).fold(f64::NEG_INFINITY, f64::max);
                (m, column(k).map(|v| libm::exp(v - m)).sum::<f64>())
            })
            .collect();
        let loo: Vec<f64> = (0..cfg.n_paths)
            .map(|i| {
                let y_i: Vec<f64> = (first..samples)
                    .zip(&stats)
                    .map(|(k, &(m, sum))| {
                        let rest = sum - libm::exp(paths[i][k] - m);
                        if rest > 1e-12 * sum {
                            m + libm::log(rest / (n - 1.0))
                        } else {
                            // Path i dominates; recompute without cancellation.
                            let others = paths.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p[k]);
                            log_mean_exp(others)
                        }
                    })
                    .collect();
                slope(&times, &y_i).0
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / n;
        ((n - 1.0) / n * loo.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()).sqrt()
    };
    finite_estimate(value, std_error, cfg.n_paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularHistogram {
    /// Left edge of the first bin (`-pi/2`).
    pub lower: f64,
    pub bin_width: f64,
    /// Probability density per bin; `sum(density) * bin_width = 1`.
    pub density: Vec<f64>,
    /// Standard error per bin, from the spread of per-path densities.
    pub std_error: Vec<f64>,
    pub samples: usize,
}

impl AngularHistogram {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.density.len())
            .map(|k| self.lower + (k as f64 + 0.5) * self.bin_width)
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }
}

/// Projective angle `atan2(x2, x1)` reduced into `[-pi/2, pi/2)`.
pub fn projective_angle(x: Vector2<f64>) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut phi = libm::atan2(x[1], x[0]);
    if phi >= FRAC_PI_2 {
        phi -= PI;
    } else if phi < -FRAC_PI_2 {
        phi += PI;
    }
    phi
}

fn angular_counts(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec, path_index: u64, bins: usize, burn_in: usize) -> (Vec<u64>, u64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut normals = rng.normals(path_index);
    let sqrt_dt = cfg.dt.sqrt();
    let x0 = cfg.x0.as_vector();
    let mut x = x0 / x0.norm();
    let mut counts = vec![0u64; bins];
    let mut total = 0;
    for step in 0..cfg.n_steps() {
        x = em_step_linear(x, sys, cfg.dt, sqrt_dt * normals.next_normal());
        if (step + 1) % cfg.renorm_every == 0 {
            x /= x.norm();
        }
        if step >= burn_in {
            let k = (((projective_angle(x) + FRAC_PI_2) / PI) * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
            total += 1;
        }
    }
    (counts, total)
}

/// Occupation histogram of the projective angle over `bins` equal cells on
/// `[-pi/2, pi/2)`, after discarding the first 10% of steps of every path.
pub fn angular_density(sys: &LinearSystem, cfg: &SimConfig, rng: &RngSpec, bins: usize) -> Result<AngularHistogram> {
    angular_density_with_burn_in(sys, cfg, rng, bins, ANGULAR_BURN_IN)
}

pub fn angular_density_with_burn_in(
    sys: &LinearSystem,
    cfg: &SimConfig,
    rng: &RngSpec,
    bins: usize,
    burn_in_fraction: f64,
) -> Result<AngularHistogram> {
    cfg.validate()?;
    cfg.require_nonzero_start()?;
    if bins < 16 {
        return Err(Error::InvalidParameter {
            name: "bins",
            value: bins as f64,
            reason: "must be at least 16",
        });
    }
    if sys.diffusion == nalgebra::Matrix2::zeros() {
        return Err(Error::ZeroNoise("angular density"));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidParameter {
            name: "burn_in_fraction",
            value: burn_in_fraction,
            reason: "must lie in [0, 1)",
        });
    }
    let burn_in = (cfg.n_steps() as f64 * burn_in_fraction) as usize;
    let per_path: Vec<(Vec<u64>, u64)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| angular_counts(sys, cfg, rng, i, bins, burn_in))
        .collect();

    let width = std::f64::consts::PI / bins as f64;
    let total: u64 = per_path.iter().map(|(_, t)| t).sum();
    let mut density = vec![0.0; bins];
    for (counts, _) in &per_path {
        for (d, c) in density.iter_mut().zip(counts) {
            *d += *c as f64;
        }
    }
    for d in density.iter_mut() {
        *d /= total as f64 * width;
    }
    let std_error = (0..bins)
        .map(|k| {
            if per_path.len() < 2 {
                // Binomial error; ignores autocorrelation along the path.
                let p = density[k] * width;
                (p * (1.0 - p) / total as f64).sqrt() / width
            } else {
                let d: Vec<f64> = per_path
                    .iter()
                    .map(|(c, t)| c[k] as f64 / (*t as f64 * width))
                    .collect();
                mean_and_se(&d).1
            }
        })
        .collect();
    Ok(AngularHistogram {
        lower: -std::f64::consts::FRAC_PI_2,
        bin_width: width,
        density,
        std_error,
        samples: total as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{lyapunov, Method};
    use crate::meansquare::{spectral_abscissa, threshold_sigma};
    use crate::model::linearize;

    fn p(g: f64, delta: f64, eps: f64, sigma1: f64) -> ModelParams {
        ModelParams::linear(g, delta, eps, sigma1).unwrap()
    }

    fn cfg(dt: f64, t_final: f64, n_paths: usize) -> SimConfig {
        SimConfig {
            dt,
            t_final,
            n_paths,
            ..SimConfig::default()
        }
    }

    #[test]
    fn origin_is_fixed_by_both_steppers() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        let params = ModelParams::new(0.99, 0.01, 0.1, 0.05, 1.0, 1.0).unwrap();
        for (dt, dw) in [(1e-3, 0.3), (0.5, -7.0), (1.0, 1e10)] {
            assert_eq!(em_step_linear(Vector2::zeros(), &sys, dt, dw), Vector2::zeros());
            let s = em_step_nonlinear(FieldState::ZERO, &params, dt, dw);
            assert_eq!(s.state, FieldState::ZERO);
            assert!(!s.diverged);
        }
    }

    #[test]
    fn deterministic_linear_step() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        let x = Vector2::new(0.3, -0.2);
        assert_eq!(em_step_linear(x, &sys, 1e-3, 0.0), x + sys.drift * x * 1e-3);
    }

    #[test]
    fn milstein_correction_vanishes() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        for x in [Vector2::new(1.0, 2.0), Vector2::new(-3.0, 0.5), Vector2::new(1e8, -1e8)] {
            for dw in [0.0, 0.1, -2.0] {
                assert_eq!(milstein_correction(x, &sys, 1e-3, dw), Vector2::zeros());
            }
        }
    }

    #[test]
    fn nonlinear_step_by_hand() {
        let params = ModelParams::new(0.99, 0.01, 0.1, 0.05, 1.0, 1.0).unwrap();
        let (br, bp, dt, dw) = (0.1, 0.1, 1e-3, 0.02);
        let pa = 1.0 / (1.0 + bp * bp);
        let pb = (1.0 + bp * bp) / (1.0 + 2.0 * bp * bp);
        let f1 = [-(0.01 * pa * bp + 0.1 * pb * br), -(0.99 * br + 0.1 * pb * bp)];
        let f2 = [-(2.0f64 * 0.05).sqrt() * pa * bp, 0.0];
        let s = em_step_nonlinear(FieldState::new(br, bp), &params, dt, dw);
        assert!((s.state.b_r - (br + f1[0] * dt + f2[0] * dw)).abs() < 1e-17);
        assert!((s.state.b_phi - (bp + f1[1] * dt + f2[1] * dw)).abs() < 1e-17);
    }

    #[test]
    fn nonlinear_step_at_equilibrium_is_tiny() {
        let params = ModelParams::new(0.99, 0.01, 0.1, 0.0, 1.0, 1.0).unwrap();
        for e in crate::model::find_equilibria(&params) {
            let s = em_step_nonlinear(e.state, &params, 1e-3, 0.7);
            let moved = (s.state.as_vector() - e.state.as_vector()).amax();
            assert!(moved < 1e-15 * 1e-3, "{moved}");
        }
    }

    #[test]
    fn divergence_is_flagged() {
        let params = ModelParams::new(0.99, 0.01, 0.1, 0.0, 1.0, 1.0).unwrap();
        let s = em_step_nonlinear(FieldState::new(1e200, 1e200), &params, 1e-3, 0.0);
        assert!(s.diverged);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 10.0, 1).validate().is_err());
        assert!(cfg(1e-3, 0.05, 1).validate().is_err());
        assert!(cfg(1e-3, 0.1, 0).validate().is_err());
        let zero = SimConfig {
            x0: FieldState::ZERO,
            ..cfg(1e-3, 1.0, 1)
        };
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        assert!(mc_lyapunov(&sys, &zero, &RngSpec::default()).is_err());
    }

    #[test]
    fn deterministic_rates() {
        let params = p(0.99, 0.01, 0.05, 0.0);
        let sys = linearize(&params);
        let c = cfg(1e-3, 200.0, 2);
        let lam = mc_lyapunov(&sys, &c, &RngSpec::default()).unwrap();
        assert!((lam.value - params.deterministic_abscissa()).abs() < 10.0 * c.dt, "{lam:?}");
        let ms = mc_second_moment(&sys, &c, &RngSpec::default()).unwrap();
        assert!((ms.value - 2.0 * params.deterministic_abscissa()).abs() < 10.0 * c.dt, "{ms:?}");
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        let c = cfg(1e-2, 50.0, 12);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        mc_lyapunov(&sys, &c, &RngSpec::new(5, 1)).unwrap(),
                        mc_second_moment(&sys, &c, &RngSpec::new(5, 1)).unwrap(),
                        angular_density(&sys, &c, &RngSpec::new(5, 1), 32).unwrap(),
                    )
                })
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.0.value.to_bits(), b.0.value.to_bits());
        assert_eq!(a.0.std_error.to_bits(), b.0.std_error.to_bits());
        assert_eq!(a.1.value.to_bits(), b.1.value.to_bits());
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn renormalized_norm_stays_bounded() {
        // Between renormalizations |x| grows by at most exp(K),
        // K = renorm_every (dt ‖Λ‖ + ‖Σ‖ max|dW|).
        let params = p(0.99, 0.01, 0.1, 0.05);
        let sys = linearize(&params);
        let c = cfg(1e-3, 20.0, 1);
        let mut normals = RngSpec::default().normals(0);
        let mut x = Vector2::new(1.0, 0.0);
        let mut max_dw: f64 = 0.0;
        let mut extreme: f64 = 0.0;
        for step in 0..c.n_steps() {
            let dw = c.dt.sqrt() * normals.next_normal();
            max_dw = max_dw.max(dw.abs());
            x = em_step_linear(x, &sys, c.dt, dw);
            extreme = extreme.max(x.norm().ln().abs());
            if (step + 1) % c.renorm_every == 0 {
                x /= x.norm();
            }
        }
        let k = c.renorm_every as f64 * (c.dt * sys.drift.norm() + sys.diffusion.norm() * max_dw);
        assert!(extreme <= k, "{extreme} > {k}");
    }

    #[test]
    fn single_path_gives_finite_error() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        let c = cfg(1e-3, 10.0, 1);
        let e = mc_lyapunov(&sys, &c, &RngSpec::default()).unwrap();
        assert!(e.std_error.is_finite() && e.std_error > 0.0);
        let m = mc_second_moment(&sys, &c, &RngSpec::default()).unwrap();
        assert!(m.std_error.is_finite());
    }

    #[test]
    fn start_direction_does_not_matter() {
        let params = p(0.99, 0.01, 0.1, 0.05);
        let sys = linearize(&params);
        let c = cfg(1e-2, 400.0, 16);
        let a = mc_lyapunov(&sys, &c, &RngSpec::new(3, 0)).unwrap();
        let other = SimConfig {
            x0: FieldState::new(-0.2, 5.0),
            ..c
        };
        let b = mc_lyapunov(&sys, &other, &RngSpec::new(3, 0)).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn short_run_agrees_with_analytic_exponent() {
        let params = p(0.99, 0.01, 0.1, 0.05);
        let exact = lyapunov(&params, Method::Hypergeometric).unwrap().value;
        let e = mc_lyapunov(&linearize(&params), &cfg(2e-3, 400.0, 16), &RngSpec::default()).unwrap();
        assert!((e.value - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
    }

    #[test]
    fn second_moment_sign_follows_abscissa() {
        let base = p(0.99, 0.01, 0.15, 0.0);
        let s_star = threshold_sigma(&base).unwrap();
        for factor in [0.5, 2.0] {
            let params = base.with_sigma1(factor * s_star).unwrap();
            let abscissa = spectral_abscissa(&params);
            // Short horizon, many paths: see the heavy-tail note on mc_second_moment.
            let e = mc_second_moment(&linearize(&params), &cfg(1e-2, 40.0, 4096), &RngSpec::default()).unwrap();
            assert_eq!(e.value < 0.0, abscissa < 0.0, "{e:?} vs {abscissa}");
        }
    }

    #[test]
    fn angular_histogram_is_normalized() {
        let sys = linearize(&p(0.99, 0.01, 0.1, 0.05));
        let h = angular_density(&sys, &cfg(1e-2, 100.0, 4), &RngSpec::default(), 64).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-12);
        assert_eq!(h.centers().len(), 64);
        assert!(h.std_error.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn angular_density_needs_noise_and_bins() {
        let c = cfg(1e-2, 10.0, 1);
        assert!(angular_density(&linearize(&p(0.99, 0.01, 0.1, 0.0)), &c, &RngSpec::default(), 32).is_err());
        assert!(angular_density(&linearize(&p(0.99, 0.01, 0.1, 0.05)), &c, &RngSpec::default(), 8).is_err());
    }

    #[test]
    fn projective_angle_range() {
        use std::f64::consts::FRAC_PI_2;
        for (x, y) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)] {
            let a = projective_angle(Vector2::new(x, y));
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&a), "{x} {y} -> {a}");
            // x and -x share an angle.
            assert!((a - projective_angle(Vector2::new(-x, -y))).abs() < 1e-15);
        }
        assert_eq!(projective_angle(Vector2::new(0.0, 1.0)), -FRAC_PI_2);
    }
}
