//! Gamma function, Pochhammer symbols and the generalized hypergeometric
//! function 1F2, real arguments only.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Termination control for power-series summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    rel_tol: f64,
    max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-15,
            max_terms: 500,
        }
    }
}

impl SeriesControl {
    /// `rel_tol` must lie in `(0, 1e-6]` and `max_terms` must be at least 50.
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: rel_tol,
                reason: "must lie in (0, 1e-6]",
            });
        }
        if max_terms < 50 {
            return Err(Error::InvalidParameter {
                name: "max_terms",
                value: max_terms as f64,
                reason: "must be >= 50",
            });
        }
        Ok(Self { rel_tol, max_terms })
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos evaluation for `x >= 1`.
fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // Split the power so t^(z+0.5) cannot overflow before exp(-t) is applied.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * sum
}

/// Gamma function for real `x`. Non-positive integers are poles.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::OutOfDomain("gamma of NaN".into()));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole(x));
    }
    if x < 0.5 {
        // Reflection
        return Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    if x > 171.7 {
        return Err(Error::Overflow("gamma_fn"));
    }
    if x <= 30.0 {
        // Shift into [1, 2) and evaluate the Lanczos sum there; the
        // recurrence factors are exact up to one rounding each.
        let mut y = x;
        let mut scale = 1.0;
        while y >= 2.0 {
            y -= 1.0;
            scale *= y;
        }
        while y < 1.0 {
            scale /= y;
            y += 1.0;
        }
        return Ok(scale * lanczos(y));
    }
    Ok(lanczos(x))
}

/// Rising factorial `a (a+1) ... (a+n-1)`; `(a)_0 = 1`.
pub fn pochhammer(a: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

fn non_positive_integer(b: f64) -> bool {
    b <= 0.0 && b == b.floor()
}

/// A float with a separate binary exponent, `mantissa * 2^exp2`, used to sum
/// series whose partial sums exceed the f64 range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub exp2: i32,
}

const RESCALE_EXP: i32 = 600;
const RESCALE_AT: f64 = 1e150;

impl Scaled {
    pub fn new(v: f64) -> Self {
        Self { mantissa: v, exp2: 0 }
    }

    /// Value as an `f64`; may be infinite or zero if out of range.
    pub fn to_f64(self) -> f64 {
        scale_pow2(self.mantissa, self.exp2)
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            mantissa: self.mantissa * k,
            exp2: self.exp2,
        }
        .normalized()
    }

    pub fn add(self, other: Self) -> Self {
        let e = self.exp2.max(other.exp2);
        Self {
            mantissa: scale_pow2(self.mantissa, self.exp2 - e)
                + scale_pow2(other.mantissa, other.exp2 - e),
            exp2: e,
        }
        .normalized()
    }

    /// `self / other` as an ordinary float.
    pub fn ratio(self, other: Self) -> f64 {
        scale_pow2(self.mantissa / other.mantissa, self.exp2 - other.exp2)
    }

    fn normalized(mut self) -> Self {
        while self.mantissa.abs() > RESCALE_AT {
            self.mantissa = scale_pow2(self.mantissa, -RESCALE_EXP);
            self.exp2 += RESCALE_EXP;
        }
        self
    }
}

/// `v * 2^e` by repeated exact power-of-two scaling.
fn scale_pow2(mut v: f64, mut e: i32) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e)
}

/// Result of a series summation with its truncation metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: Scaled,
    /// Number of terms summed.
    pub terms: usize,
    /// Magnitude of the last term, relative to the sum.
    pub tail: f64,
}

/// `1F2(a; b1, b2; x)` with the partial sum kept in scaled form.
pub fn hyp1f2_scaled(a: f64, b1: f64, b2: f64, x: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    if non_positive_integer(b1) || non_positive_integer(b2) {
        return Err(Error::OutOfDomain(format!(
            "1F2 lower parameters must not be non-positive integers (b1 = {b1}, b2 = {b2})"
        )));
    }
    if !x.is_finite() {
        return Err(Error::OutOfDomain(format!("1F2 argument {x} is not finite")));
    }

    // sum and term share the exponent `exp2`.
    let mut exp2 = 0i32;
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut small_run = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        term *= (a + nf) * x / ((b1 + nf) * (b2 + nf) * (nf + 1.0));
        sum += term;
        if sum.abs() > RESCALE_AT {
            sum = scale_pow2(sum, -RESCALE_EXP);
            term = scale_pow2(term, -RESCALE_EXP);
            exp2 += RESCALE_EXP;
        }
        if term.abs() < ctl.rel_tol * sum.abs() {
            small_run += 1;
            if small_run == 3 {
                return Ok(SeriesSum {
                    value: Scaled { mantissa: sum, exp2 },
                    terms: n + 2,
                    tail: (term / sum).abs(),
                });
            }
        } else {
            small_run = 0;
        }
        if term == 0.0 {
            // Terminating series (a is a non-positive integer) or x == 0.
            return Ok(SeriesSum {
                value: Scaled { mantissa: sum, exp2 },
                terms: n + 2,
                tail: 0.0,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "1F2 series",
        iterations: ctl.max_terms,
    })
}

/// Generalized hypergeometric function `1F2(a; b1, b2; x)`, entire in `x`.
pub fn hyp1f2(a: f64, b1: f64, b2: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    let v = hyp1f2_scaled(a, b1, b2, x, ctl)?.value.to_f64();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow("1F2 series"))
    }
}

/// Checks the factorial identities behind the mod-3 splitting of the
/// gamma series:
///
/// ```text
/// n!/(3n)!   = 1 / (27^n (1/3)_n (2/3)_n)
/// n!/(3n+1)! = 1 / (27^n (2/3)_n (4/3)_n)
/// n!/(3n+2)! = 1 / (2 * 27^n (4/3)_n (5/3)_n)
/// ```
///
/// to 1e-12 relative. Returns `false` for `n > 20`, beyond which the
/// floating-point factorials are no longer trustworthy.
pub fn factored_identities_check(n: u32) -> bool {
    if n > 20 {
        return false;
    }
    let fact = |k: u32| (1..=k).fold(1.0f64, |acc, i| acc * i as f64);
    let p27 = 27f64.powi(n as i32);
    let third = 1.0 / 3.0;
    let lhs = [
        fact(n) / fact(3 * n),
        fact(n) / fact(3 * n + 1),
        fact(n) / fact(3 * n + 2),
    ];
    let rhs = [
        1.0 / (p27 * pochhammer(third, n) * pochhammer(2.0 * third, n)),
        1.0 / (p27 * pochhammer(2.0 * third, n) * pochhammer(4.0 * third, n)),
        0.5 / (p27 * pochhammer(4.0 * third, n) * pochhammer(5.0 * third, n)),
    ];
    lhs.iter()
        .zip(rhs.iter())
        .all(|(l, r)| ((l - r) / r).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Independent route: Stirling series for ln Gamma at z >= 40, brought
    /// down with the recurrence. Accurate to a few ulps of ln Gamma.
    fn gamma_stirling(x: f64) -> f64 {
        let mut z = x;
        let mut log_shift = 0.0;
        while z < 40.0 {
            log_shift += z.ln();
            z += 1.0;
        }
        let z2 = z * z;
        let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
            - 1.0 / (1680.0 * z * z2 * z2 * z2);
        let lg = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series;
        (lg - log_shift).exp()
    }

    #[test]
    fn gamma_trivial_values() {
        assert!(rel(gamma_fn(1.0).unwrap(), 1.0) < 1e-15);
        assert!(rel(gamma_fn(2.0).unwrap(), 1.0) < 1e-15);
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-15);
        assert!(rel(gamma_fn(11.0).unwrap(), 3_628_800.0) < 1e-14);
    }

    #[test]
    fn gamma_poles() {
        assert_eq!(gamma_fn(0.0), Err(Error::Pole(0.0)));
        assert_eq!(gamma_fn(-3.0), Err(Error::Pole(-3.0)));
        assert!(gamma_fn(-2.5).is_ok());
    }

    #[test]
    fn gamma_against_high_precision_values() {
        // 25-digit reference values (arbitrary precision evaluation at the
        // f64 nearest the stated argument).
        let cases = [
            (1.0 / 6.0, 5.566_316_001_780_235_530_346_864),
            (5.0 / 6.0, 1.128_787_029_908_125_924_052_006),
            (7.0 / 6.0, 0.927_719_333_630_039_177_902_806_3),
            (1.0 / 3.0, 2.678_938_534_707_747_788_911_612),
            (2.0 / 3.0, 1.354_117_939_426_400_483_005_219),
            (0.1, 9.513_507_698_668_731_836_292_487),
            (2.5, 1.329_340_388_179_137_020_473_626),
            (7.3, 1_271.423_633_663_909_273_057_994),
            (19.9, 90_406_140_079_547_899.526_636_45),
            (0.001, 999.423_772_484_595_466_114_982_2),
        ];
        for (x, want) in cases {
            let got = gamma_fn(x).unwrap();
            assert!(rel(got, want) < 1e-13, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn gamma_against_stirling_oracle() {
        let mut x = 0.05;
        while x <= 20.0 {
            let got = gamma_fn(x).unwrap();
            let want = gamma_stirling(x);
            assert!(rel(got, want) < 1e-13, "x={x}: {got} vs {want}");
            x += 0.37;
        }
    }

    #[test]
    fn gamma_recurrence() {
        for i in 1..=50 {
            let x = i as f64 * 0.1;
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-13, "x={x}");
        }
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(0.37, 0), 1.0);
        assert_eq!(pochhammer(1.0, 5), 120.0);
        let p = pochhammer(1.0 / 3.0, 3);
        assert!(rel(p, 28.0 / 27.0) < 1e-15);
        let ratio = gamma_fn(1.0 / 3.0 + 3.0).unwrap() / gamma_fn(1.0 / 3.0).unwrap();
        assert!(rel(p, ratio) < 1e-13);
    }

    #[test]
    fn hyp1f2_at_zero_is_one() {
        let ctl = SeriesControl::default();
        assert_eq!(hyp1f2(0.5, 1.0 / 3.0, 2.0 / 3.0, 0.0, &ctl).unwrap(), 1.0);
        assert_eq!(hyp1f2(7.0 / 6.0, 4.0 / 3.0, 5.0 / 3.0, 0.0, &ctl).unwrap(), 1.0);
    }

    #[test]
    fn hyp1f2_matches_explicit_partial_sum() {
        let (a, b1, b2, x): (f64, f64, f64, f64) = (0.5, 1.0 / 3.0, 2.0 / 3.0, 0.01);
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for n in 0..10u32 {
            if n > 0 {
                fact *= n as f64;
            }
            oracle += pochhammer(a, n) / (pochhammer(b1, n) * pochhammer(b2, n)) * x.powi(n as i32)
                / fact;
        }
        let got = hyp1f2(a, b1, b2, x, &SeriesControl::default()).unwrap();
        assert!(rel(got, oracle) < 1e-13);
    }

    #[test]
    fn hyp1f2_leading_order() {
        let (a, b1, b2) = (5.0 / 6.0, 2.0 / 3.0, 4.0 / 3.0);
        let ctl = SeriesControl::default();
        let mut prev = f64::INFINITY;
        for k in 1..6 {
            let x = 10f64.powi(-k);
            let r = hyp1f2(a, b1, b2, x, &ctl).unwrap() - 1.0 - a / (b1 * b2) * x;
            let scaled = (r / (x * x)).abs();
            assert!(scaled < 1.0, "{scaled}");
            assert!(r.abs() < prev);
            prev = r.abs();
        }
    }

    #[test]
    fn hyp1f2_rejects_bad_lower_parameters() {
        let ctl = SeriesControl::default();
        assert!(hyp1f2(0.5, -2.0, 0.5, 1.0, &ctl).is_err());
        assert!(hyp1f2(0.5, 0.5, 0.0, 1.0, &ctl).is_err());
    }

    #[test]
    fn hyp1f2_reports_non_convergence() {
        let ctl = SeriesControl::new(1e-15, 50).unwrap();
        let err = hyp1f2(0.5, 1.0 / 3.0, 2.0 / 3.0, 1e7, &ctl).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    const LN_1F2_AT_1E7: f64 = 6324.006_005_406_930_7;

    #[test]
    fn hyp1f2_scaled_handles_huge_arguments() {
        // 1F2 grows like exp(2 sqrt(x)); ln 1F2(1/2; 1/3, 2/3; 1e7) = 6324.006...
        let ctl = SeriesControl::new(1e-15, 20_000).unwrap();
        let s = hyp1f2_scaled(0.5, 1.0 / 3.0, 2.0 / 3.0, 1e7, &ctl).unwrap();
        let log_value = s.value.mantissa.ln() + s.value.exp2 as f64 * std::f64::consts::LN_2;
        assert!((log_value - LN_1F2_AT_1E7).abs() < 1e-9, "{log_value}");
        assert!(matches!(
            hyp1f2(0.5, 1.0 / 3.0, 2.0 / 3.0, 1e7, &ctl),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn series_control_validation() {
        assert!(SeriesControl::new(0.0, 500).is_err());
        assert!(SeriesControl::new(1e-5, 500).is_err());
        assert!(SeriesControl::new(1e-12, 49).is_err());
        assert!(SeriesControl::new(1e-6, 50).is_ok());
    }

    /// Exact check in integer arithmetic: 27^n (1/3)_n (2/3)_n = 3^n Π(3i+1)(3i+2).
    fn exact_identities(n: u128) -> bool {
        let fact = |k: u128| (1..=k).product::<u128>().max(1);
        let prod = |f: &dyn Fn(u128) -> u128| (0..n).map(f).product::<u128>();
        let p3 = 3u128.pow(n as u32);
        // (3n)! = n! 3^n Π(3i+1)(3i+2)
        let a = fact(3 * n) == fact(n) * p3 * prod(&|i| (3 * i + 1) * (3 * i + 2));
        // (3n+1)! = n! 3^n Π(3i+2)(3i+4)
        let b = fact(3 * n + 1) == fact(n) * p3 * prod(&|i| (3 * i + 2) * (3 * i + 4));
        // (3n+2)! = 2 n! 3^n Π(3i+4)(3i+5)
        let c = fact(3 * n + 2) == 2 * fact(n) * p3 * prod(&|i| (3 * i + 4) * (3 * i + 5));
        a && b && c
    }

    #[test]
    fn factorial_identities() {
        assert!(factored_identities_check(0));
        assert!(factored_identities_check(1));
        assert!(factored_identities_check(10));
        for n in 0..=10 {
            assert!(exact_identities(n), "n={n}");
        }
        for n in 0..=20 {
            assert!(factored_identities_check(n), "n={n}");
        }
        assert!(!factored_identities_check(21));
    }

    proptest! {
        #[test]
        fn pochhammer_splits(a in 0.05f64..5.0, n in 0u32..15, m in 0u32..15) {
            let lhs = pochhammer(a, n) * pochhammer(a + n as f64, m);
            let rhs = pochhammer(a, n + m);
            prop_assert!(rel(lhs, rhs) < 1e-13);
        }

        #[test]
        fn hyp1f2_stable_under_tighter_tolerance(x in 0.0f64..500.0) {
            let loose = SeriesControl::new(1e-12, 500).unwrap();
            let tight = SeriesControl::new(5e-13, 500).unwrap();
            let a = hyp1f2(0.5, 2.0 / 3.0, 4.0 / 3.0, x, &loose).unwrap();
            let b = hyp1f2(0.5, 2.0 / 3.0, 4.0 / 3.0, x, &tight).unwrap();
            prop_assert!(rel(a, b) < 1e-12);
        }
    }
}
