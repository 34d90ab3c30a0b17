//! Scans of the `(eps, sigma1)` plane and extraction of the three stability
//! boundaries: `lambda = 0`, mean-square abscissa `= 0`, and drift
//! criticality `eps² = g delta`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov, Method};
use crate::meansquare::{criticality, spectral_abscissa, Criticality};
use crate::model::{departure_from_normality, linearize, ModelParams};

/// Values of `|lambda|` at or below this are reported as on the boundary.
pub const SIGN_BAND: f64 = 1e-12;

/// Bracket width at which boundary bisection stops.
pub const BISECTION_TOL: f64 = 1e-10;

/// Residual required of an emitted boundary point.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        Self { min, max, n }
    }

    /// `n` equally spaced points including both ends.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.max } else { self.min + i as f64 * step })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub eps: GridAxis,
    pub sigma1: GridAxis,
    pub g: f64,
    pub delta: f64,
    pub k_alpha: f64,
    pub k_beta: f64,
    pub method: Method,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            eps: GridAxis::new(0.005, 0.25, 256),
            sigma1: GridAxis::new(0.0, 0.05, 256),
            g: 0.99,
            delta: 0.01,
            k_alpha: 1.0,
            k_beta: 1.0,
            method: Method::Hypergeometric,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, reason: &'static str| {
            Err(Error::InvalidParameter { name, value, reason })
        };
        for (name, axis) in [("eps", &self.eps), ("sigma1", &self.sigma1)] {
            if axis.n < 2 {
                return bad(name, axis.n as f64, "grid needs at least 2 points");
            }
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.max > axis.min) {
                return bad(name, axis.max, "grid max must exceed min");
            }
        }
        if self.eps.min <= 0.0 {
            return bad("eps", self.eps.min, "grid min must be positive");
        }
        if self.sigma1.min < 0.0 {
            return bad("sigma1", self.sigma1.min, "grid min must be non-negative");
        }
        if self.method == Method::MonteCarlo {
            return Err(Error::OutOfDomain("scans use an analytic Lyapunov method".into()));
        }
        self.params(self.eps.min, self.sigma1.min).map(|_| ())
    }

    pub fn params(&self, eps: f64, sigma1: f64) -> Result<ModelParams> {
        ModelParams::new(self.g, self.delta, eps, sigma1, self.k_alpha, self.k_beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSign {
    Positive,
    Negative,
    Boundary,
    Error,
}

impl LambdaSign {
    pub fn classify(lambda: f64) -> Self {
        if !lambda.is_finite() {
            LambdaSign::Error
        } else if lambda.abs() <= SIGN_BAND {
            LambdaSign::Boundary
        } else if lambda > 0.0 {
            LambdaSign::Positive
        } else {
            LambdaSign::Negative
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaSign::Positive => "positive",
            LambdaSign::Negative => "negative",
            LambdaSign::Boundary => "boundary",
            LambdaSign::Error => "error",
        }
    }

    /// Stability of the zero field of the nonlinear SDE implied by the sign.
    pub fn in_probability(&self) -> Option<&'static str> {
        match self {
            LambdaSign::Negative => Some("asymptotically stable in probability"),
            LambdaSign::Positive => Some("unstable in probability"),
            _ => None,
        }
    }
}

impl std::fmt::Display for LambdaSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub eps: f64,
    pub sigma1: f64,
    /// NaN when the evaluator failed; see `error`.
    pub lambda: f64,
    pub lambda_sign: LambdaSign,
    pub ms_abscissa: f64,
    pub ms_stable: bool,
    pub criticality: Criticality,
    pub dep_f: f64,
    pub error: Option<String>,
}

fn evaluate_point(spec: &ScanSpec, eps: f64, sigma1: f64) -> RegionRecord {
    let params = match spec.params(eps, sigma1) {
        Ok(p) => p,
        Err(e) => {
            return RegionRecord {
                eps,
                sigma1,
                lambda: f64::NAN,
                lambda_sign: LambdaSign::Error,
                ms_abscissa: f64::NAN,
                ms_stable: false,
                criticality: Criticality::Critical,
                dep_f: f64::NAN,
                error: Some(e.to_string()),
            }
        }
    };
    let (lambda, error) = match lyapunov(&params, spec.method) {
        Ok(r) => (r.value, None),
        Err(e) => (f64::NAN, Some(e.to_string())),
    };
    let ms_abscissa = spectral_abscissa(&params);
    RegionRecord {
        eps,
        sigma1,
        lambda,
        lambda_sign: LambdaSign::classify(lambda),
        ms_abscissa,
        ms_stable: ms_abscissa < 0.0,
        criticality: criticality(&params),
        dep_f: departure_from_normality(&linearize(&params).drift),
        error,
    }
}

/// Evaluates every grid point, `eps` outer and `sigma1` inner. Evaluator
/// failures are recorded per point.
pub fn scan(spec: &ScanSpec) -> Result<Vec<RegionRecord>> {
    spec.validate()?;
    let eps = spec.eps.values();
    let sig = spec.sigma1.values();
    let ns = sig.len();
    Ok((0..eps.len() * ns)
        .into_par_iter()
        .map(|k| evaluate_point(spec, eps[k / ns], sig[k % ns]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Lyapunov,
    Meansquare,
    Criticality,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 3] = [BoundaryKind::Lyapunov, BoundaryKind::Meansquare, BoundaryKind::Criticality];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Lyapunov => "lyapunov",
            BoundaryKind::Meansquare => "meansquare",
            BoundaryKind::Criticality => "criticality",
        }
    }
}

impl std::fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lyapunov" => Ok(BoundaryKind::Lyapunov),
            "meansquare" => Ok(BoundaryKind::Meansquare),
            "criticality" => Ok(BoundaryKind::Criticality),
            other => Err(Error::OutOfDomain(format!("unknown boundary kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub eps: f64,
    pub sigma1: f64,
    pub kind: BoundaryKind,
    /// `|target|` at the emitted point.
    pub residual: f64,
}

fn target(spec: &ScanSpec, kind: BoundaryKind, eps: f64, sigma1: f64) -> Result<f64> {
    let params = spec.params(eps, sigma1)?;
    match kind {
        BoundaryKind::Lyapunov => Ok(lyapunov(&params, spec.method)?.value),
        BoundaryKind::Meansquare => Ok(spectral_abscissa(&params)),
        BoundaryKind::Criticality => Ok(eps * eps - spec.g * spec.delta),
    }
}

/// Root of `f` in `[lo, hi]` given `f(lo)` and `f(hi)` of opposite sign.
fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> Result<(f64, f64)> {
    let mut best = (lo, f_lo.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid.abs() < best.1 {
            best = (mid, f_mid.abs());
        }
        if f_mid == 0.0 {
            return Ok((mid, 0.0));
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol && best.1 < BOUNDARY_RESIDUAL_TOL {
            break;
        }
    }
    Ok(best)
}

/// Every sign change of `values` along `axis`, each refined by bisection.
fn crossings<F: Fn(f64) -> Result<f64>>(f: &F, axis: &[f64], values: &[f64], tol: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for i in 0..axis.len() {
        if values[i] == 0.0 {
            out.push((axis[i], 0.0));
            continue;
        }
        if i + 1 < axis.len() && values[i + 1] != 0.0 && (values[i] > 0.0) != (values[i + 1] > 0.0) {
            out.push(bisect(f, axis[i], axis[i + 1], values[i], tol)?);
        }
    }
    Ok(out)
}

/// Boundary points of one kind. The Lyapunov and mean-square boundaries are
/// traced along `sigma1` in every `eps` column; the criticality boundary does
/// not involve `sigma1` and is traced along `eps` in every `sigma1` row.
pub fn trace_boundary(spec: &ScanSpec, kind: BoundaryKind) -> Result<Vec<BoundaryPoint>> {
    spec.validate()?;
    let eps = spec.eps.values();
    let sig = spec.sigma1.values();
    let lines: Vec<Vec<BoundaryPoint>> = match kind {
        BoundaryKind::Criticality => sig
            .par_iter()
            .map(|&s| {
                let f = |e: f64| target(spec, kind, e, s);
                let values = eps.iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;
                let found = crossings(&f, &eps, &values, 1e-3 * BISECTION_TOL)?;
                Ok(found
                    .into_iter()
                    .map(|(e, residual)| BoundaryPoint { eps: e, sigma1: s, kind, residual })
                    .collect())
            })
            .collect::<Result<_>>()?,
        _ => eps
            .par_iter()
            .map(|&e| {
                let f = |s: f64| target(spec, kind, e, s);
                let values = sig.iter().map(|&s| f(s)).collect::<Result<Vec<_>>>()?;
                let found = crossings(&f, &sig, &values, BISECTION_TOL)?;
                Ok(found
                    .into_iter()
                    .map(|(s, residual)| BoundaryPoint { eps: e, sigma1: s, kind, residual })
                    .collect())
            })
            .collect::<Result<_>>()?,
    };
    Ok(lines.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meansquare::threshold_sigma;

    fn small_spec() -> ScanSpec {
        ScanSpec {
            eps: GridAxis::new(0.01, 0.2, 20),
            sigma1: GridAxis::new(0.0, 0.02, 11),
            ..ScanSpec::default()
        }
    }

    #[test]
    fn axis_values_hit_both_ends() {
        let v = GridAxis::new(0.005, 0.25, 256).values();
        assert_eq!(v.len(), 256);
        assert_eq!(v[0], 0.005);
        assert_eq!(v[255], 0.25);
    }

    #[test]
    fn spec_validation() {
        let mut s = small_spec();
        s.eps.min = 0.0;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.sigma1.n = 1;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.sigma1.min = -1.0;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.method = Method::MonteCarlo;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scan_is_row_major_and_consistent() {
        let spec = small_spec();
        let recs = scan(&spec).unwrap();
        assert_eq!(recs.len(), 220);
        assert_eq!(recs[1].eps, recs[0].eps);
        assert!(recs[11].eps > recs[0].eps);
        let crit = 0.0099f64.sqrt();
        for r in &recs {
            assert!(r.error.is_none());
            assert_eq!(r.lambda_sign, LambdaSign::classify(r.lambda));
            assert!((r.dep_f - 0.98).abs() < 1e-12);
            if r.ms_stable {
                assert_eq!(r.lambda_sign, LambdaSign::Negative, "{r:?}");
            }
            if r.sigma1 == 0.0 {
                assert_eq!(r.lambda_sign == LambdaSign::Positive, r.eps < crit, "{r:?}");
            }
            let expected = if r.eps > crit { Criticality::Subcritical } else { Criticality::Supercritical };
            assert_eq!(r.criticality, expected);
        }
    }

    #[test]
    fn sign_classes() {
        assert_eq!(LambdaSign::classify(1e-13), LambdaSign::Boundary);
        assert_eq!(LambdaSign::classify(-1e-11), LambdaSign::Negative);
        assert_eq!(LambdaSign::classify(f64::NAN), LambdaSign::Error);
        assert_eq!(LambdaSign::Negative.in_probability(), Some("asymptotically stable in probability"));
        assert_eq!(LambdaSign::Boundary.in_probability(), None);
    }

    #[test]
    fn criticality_boundary_is_vertical() {
        let pts = trace_boundary(&small_spec(), BoundaryKind::Criticality).unwrap();
        assert_eq!(pts.len(), 11);
        for p in pts {
            assert!((p.eps - 0.0099f64.sqrt()).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn meansquare_boundary_matches_threshold() {
        let pts = trace_boundary(&small_spec(), BoundaryKind::Meansquare).unwrap();
        assert!(!pts.is_empty());
        for p in pts {
            let params = small_spec().params(p.eps, 0.0).unwrap();
            let s_star = threshold_sigma(&params).unwrap();
            assert!((p.sigma1 - s_star).abs() < 1e-8, "{p:?} vs {s_star}");
            assert!(p.residual < BOUNDARY_RESIDUAL_TOL);
        }
    }

    #[test]
    fn lyapunov_boundary_residuals() {
        let pts = trace_boundary(&small_spec(), BoundaryKind::Lyapunov).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!(p.residual < BOUNDARY_RESIDUAL_TOL, "{p:?}");
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = small_spec();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| (scan(&spec).unwrap(), trace_boundary(&spec, BoundaryKind::Lyapunov).unwrap()))
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
