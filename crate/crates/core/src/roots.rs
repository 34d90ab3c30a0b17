//! Real roots of cubic polynomials.
//!
//! Closed form (trigonometric when three real roots exist, Cardano otherwise)
//! followed by a Newton polish on the original coefficients.

use std::f64::consts::PI;

/// Real roots of `c3 t³ + c2 t² + c1 t + c0`, ascending. Repeated roots are
/// reported once per multiplicity the closed form produces (a double root may
/// appear twice). Requires `c3 != 0`.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    debug_assert!(c3 != 0.0);
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;

    // t = y - b/3  =>  y³ + p y + q = 0
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

    let mut roots: Vec<f64> = depressed_cubic_roots(p, q)
        .into_iter()
        .map(|y| y - shift)
        .map(|t| polish(t, c3, c2, c1, c0))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Real roots of `y³ + p y + q`.
pub fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    if p == 0.0 && q == 0.0 {
        return vec![0.0; 3];
    }
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    if disc > 0.0 {
        // One real root. Pick the cube-root branch without cancellation.
        let s = disc.sqrt();
        let w = if half_q >= 0.0 { -half_q - s } else { -half_q + s };
        let u = w.cbrt();
        let y = if u == 0.0 { 0.0 } else { u - third_p / u };
        vec![y]
    } else {
        // Three real roots (p < 0 here unless p == q == 0, handled above).
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    }
}

/// Largest real root of `y³ + p y + q`.
pub fn largest_depressed_root(p: f64, q: f64) -> f64 {
    let mut best = depressed_cubic_roots(p, q)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    best = polish(best, 1.0, 0.0, p, q);
    best
}

fn eval(t: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> (f64, f64) {
    let f = ((c3 * t + c2) * t + c1) * t + c0;
    let df = (3.0 * c3 * t + 2.0 * c2) * t + c1;
    (f, df)
}

/// Newton steps that are kept only while they reduce the residual.
fn polish(mut t: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> f64 {
    let (mut f, mut df) = eval(t, c3, c2, c1, c0);
    for _ in 0..3 {
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = t - f / df;
        let (fn_, dfn) = eval(next, c3, c2, c1, c0);
        if fn_.abs() >= f.abs() {
            break;
        }
        t = next;
        f = fn_;
        df = dfn;
    }
    t
}
