//! Scalar constants, exponent algebra and the truncation operator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler Gamma function.
///
/// Lanczos approximation for `x >= 0.5`, reflection formula below. Poles at
/// the non-positive integers are reported as a domain error.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma: non-finite argument {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Domain(format!("gamma: pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

fn check_order(n: usize, s: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!("dimension n = {n} must be at least 3")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("fractional order s = {s} must lie in (0,1)")));
    }
    Ok(())
}

/// Normalization constant of the fractional Laplacian,
/// `C_{n,s} = 2^{2s} π^{-n/2} Γ((n+2s)/2) / |Γ(-s)|`.
pub fn normalization_constant(n: usize, s: f64) -> Result<f64> {
    check_order(n, s)?;
    let nf = n as f64;
    let num = 2f64.powf(2.0 * s) * PI.powf(-nf / 2.0) * gamma_fn((nf + 2.0 * s) / 2.0)?;
    Ok(num / gamma_fn(-s)?.abs())
}

/// Surface measure of the unit sphere in `R^n`, `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * PI.powf(nf / 2.0) / gamma_unchecked(nf / 2.0)
}

/// Optimal constant of the classical Hardy inequality, `(n-2)^2 / 4`.
pub fn hardy_constant(n: usize) -> f64 {
    let nf = n as f64;
    (nf - 2.0) * (nf - 2.0) / 4.0
}

/// Improved-integrability threshold `γ(m) = n(m-1)(n-2m)/m^2`.
///
/// Only meaningful for `1 < m < n/2`; `None` outside that range.
pub fn gamma_threshold(n: usize, m: f64) -> Option<f64> {
    let nf = n as f64;
    (m > 1.0 && m < nf / 2.0).then(|| nf * (m - 1.0) * (nf - 2.0 * m) / (m * m))
}

/// Every exponent and constant attached to a triple `(n, s, m)`.
///
/// Fields that are undefined for the given `m` are `None` (serialized as
/// `null`), never a sentinel number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub n: usize,
    pub s: f64,
    pub m: f64,
    pub lambda_n: f64,
    pub c_ns: f64,
    pub two_star: f64,
    pub two_star_conj: f64,
    pub m_conj: Option<f64>,
    pub m_star: Option<f64>,
    pub m_double_star: Option<f64>,
    pub m_star_s: Option<f64>,
    pub m_double_star_s: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma_m: Option<f64>,
}

impl ExponentTable {
    pub fn new(n: usize, s: f64, m: f64) -> Result<Self> {
        check_order(n, s)?;
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain(format!("integrability exponent m = {m} must be positive")));
        }
        let nf = n as f64;
        let below_half = m > 1.0 && m < nf / 2.0;
        Ok(Self {
            n,
            s,
            m,
            lambda_n: hardy_constant(n),
            c_ns: normalization_constant(n, s)?,
            two_star: 2.0 * nf / (nf - 2.0),
            two_star_conj: 2.0 * nf / (nf + 2.0),
            m_conj: (m > 1.0).then(|| m / (m - 1.0)),
            m_star: (m >= 1.0 && m < nf).then(|| nf * m / (nf - m)),
            m_double_star: below_half.then(|| nf * m / (nf - 2.0 * m)),
            m_star_s: (m >= 1.0 && m * s < nf).then(|| nf * m / (nf - m * s)),
            m_double_star_s: (m >= 1.0 && 2.0 * m * s < nf).then(|| nf * m / (nf - 2.0 * m * s)),
            alpha: below_half.then(|| m * (nf - 2.0) / (nf - 2.0 * m)),
            gamma_m: gamma_threshold(n, m),
        })
    }

    /// `m**` or an error naming the admissible range.
    pub fn require_m_double_star(&self) -> Result<f64> {
        self.m_double_star.ok_or_else(|| {
            Error::Domain(format!("m** undefined for m = {} (requires 1 < m < n/2 = {})", self.m, self.n as f64 / 2.0))
        })
    }

    pub fn require_gamma_m(&self) -> Result<f64> {
        self.gamma_m.ok_or_else(|| {
            Error::Domain(format!("γ(m) undefined for m = {} (requires 1 < m < n/2 = {})", self.m, self.n as f64 / 2.0))
        })
    }
}

/// Convenience wrapper around [`ExponentTable::new`].
pub fn exponent_table(n: usize, s: f64, m: f64) -> Result<ExponentTable> {
    ExponentTable::new(n, s, m)
}

/// Truncation at level `k`: clamp `t` to `[-k, k]`.
#[inline]
pub fn truncate(t: f64, k: f64) -> f64 {
    debug_assert!(k > 0.0);
    t.min(k).max(-k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Composite Simpson on [a, b].
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut acc = f(a) + f(b);
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn gamma_one_is_one() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_half_matches_quadrature() {
        // Γ(1/2) = ∫ t^{-1/2} e^{-t} dt = 2 ∫ e^{-u^2} du after t = u^2.
        let oracle = simpson(|u| 2.0 * (-u * u).exp(), 0.0, 12.0, 20_000);
        assert!(rel(oracle, 1.772_453_850_905_516) < 1e-12);
        assert!(rel(gamma_fn(0.5).unwrap(), oracle) < 1e-12);
    }

    #[test]
    fn gamma_minus_half_reflection() {
        let half = simpson(|u| 2.0 * (-u * u).exp(), 0.0, 12.0, 20_000);
        // Γ(-1/2) = Γ(1/2) / (-1/2)
        let oracle = half / -0.5;
        assert!(rel(gamma_fn(-0.5).unwrap(), oracle) < 1e-12);
        assert!(rel(gamma_fn(-0.5).unwrap(), -3.544_907_701_811_032) < 1e-12);
    }

    #[test]
    fn gamma_factorials_and_poles() {
        let mut fact = 1.0;
        for k in 1..20 {
            assert!(rel(gamma_fn(k as f64).unwrap(), fact) < 1e-13, "k = {k}");
            fact *= k as f64;
        }
        for pole in [0.0, -1.0, -2.0, -5.0] {
            assert!(matches!(gamma_fn(pole), Err(Error::Domain(_))));
        }
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_on_grid() {
        let mut x: f64 = -1.97;
        while x < 20.0 {
            if (x - x.round()).abs() > 1e-3 {
                let lhs = gamma_fn(x + 1.0).unwrap();
                let rhs = x * gamma_fn(x).unwrap();
                assert!(rel(lhs, rhs) < 1e-10, "x = {x}");
            }
            x += 0.0731;
        }
    }

    #[test]
    fn normalization_constant_values() {
        // Γ(2) = 1, |Γ(-1/2)| = 2√π: C = 2 π^{-3/2} / (2√π) = π^{-2}.
        let c = normalization_constant(3, 0.5).unwrap();
        assert!(rel(c, PI.powi(-2)) < 1e-10);
        let g25 = gamma_fn(2.5).unwrap();
        let g_half = gamma_fn(-0.5).unwrap().abs();
        let expected = 4f64.sqrt() * PI.powi(-2) * g25 / g_half;
        assert!(rel(normalization_constant(4, 0.5).unwrap(), expected) < 1e-12);
        // hand value: Γ(5/2) = 3√π/4 so C_{4,1/2} = 3/(4π^2)
        assert!(rel(expected, 3.0 / (4.0 * PI * PI)) < 1e-12);
        assert!(normalization_constant(3, 0.01).unwrap() < normalization_constant(3, 0.1).unwrap());
    }

    #[test]
    fn normalization_constant_domain_errors() {
        assert!(normalization_constant(2, 0.5).is_err());
        assert!(normalization_constant(3, 0.0).is_err());
        assert!(normalization_constant(3, 1.0).is_err());
    }

    #[test]
    fn sphere_area() {
        assert!(rel(unit_sphere_area(3), 4.0 * PI) < 1e-13);
        assert!(rel(unit_sphere_area(4), 2.0 * PI * PI) < 1e-13);
    }

    #[test]
    fn exponent_table_critical_case() {
        let t = exponent_table(3, 0.5, 6.0 / 5.0).unwrap();
        assert!((t.gamma_m.unwrap() - 0.25).abs() < 1e-12);
        assert!((t.m_double_star.unwrap() - 6.0).abs() < 1e-12);
        assert!((t.two_star - 6.0).abs() < 1e-12);
        assert!((t.alpha.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_table_rational_check() {
        // n=4, m=3/2: γ = 4·(1/2)·1/(9/4) = 8/9, m** = 6/1 = 6, m* = 6/(5/2) = 12/5
        let t = exponent_table(4, 0.5, 1.5).unwrap();
        assert!((t.gamma_m.unwrap() - 8.0 / 9.0).abs() < 1e-14);
        assert!((t.m_double_star.unwrap() - 6.0).abs() < 1e-14);
        assert!((t.m_star.unwrap() - 2.4).abs() < 1e-14);
        let t = exponent_table(3, 0.5, 1.1).unwrap();
        assert!((t.alpha.unwrap() - 1.375).abs() < 1e-14);
    }

    #[test]
    fn exponent_table_flags_undefined() {
        let t = exponent_table(3, 0.5, 2.0).unwrap();
        assert!(t.gamma_m.is_none() && t.m_double_star.is_none() && t.alpha.is_none());
        assert!(t.m_star.is_some());
        assert!(t.require_gamma_m().is_err());
        let t = exponent_table(3, 0.5, 4.0).unwrap();
        assert!(t.m_star.is_none());
        assert!(exponent_table(3, 0.5, -1.0).is_err());
        let json = serde_json::to_string(&exponent_table(3, 0.5, 2.0).unwrap()).unwrap();
        assert!(json.contains("\"gamma_m\":null"));
    }

    #[test]
    fn critical_gamma_equals_hardy_constant() {
        for n in 3..=6 {
            let nf = n as f64;
            let m = 2.0 * nf / (nf + 2.0);
            let g = gamma_threshold(n, m).unwrap();
            assert!((g - hardy_constant(n)).abs() < 1e-12, "n = {n}");
        }
        assert_eq!(hardy_constant(3), 0.25);
        assert_eq!(hardy_constant(4), 1.0);
    }

    #[test]
    fn truncation_cases() {
        assert_eq!(truncate(3.0, 2.0), 2.0);
        assert_eq!(truncate(-3.0, 2.0), -2.0);
        assert_eq!(truncate(1.0, 2.0), 1.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exponent_identities(n in 3usize..=6, frac in 0.001f64..0.999) {
                let nf = n as f64;
                let m = 1.0 + frac * (nf / 2.0 - 1.0);
                let t = exponent_table(n, 0.5, m).unwrap();
                let a = t.alpha.unwrap();
                let mss = t.m_double_star.unwrap();
                let scale = mss.max(1.0);
                prop_assert!(((a - 1.0) * t.m_conj.unwrap() - mss).abs() <= 1e-12 * scale);
                prop_assert!((t.two_star * a / 2.0 - mss).abs() <= 1e-12 * scale);
                prop_assert_eq!(m >= t.two_star_conj, a >= 2.0 - 1e-12);
            }

            #[test]
            fn truncation_lipschitz_monotone(a in -50f64..50.0, b in -50f64..50.0, k1 in 0.01f64..20.0, k2 in 0.01f64..20.0) {
                prop_assert!((truncate(a, k1) - truncate(b, k1)).abs() <= (a - b).abs());
                if a <= b { prop_assert!(truncate(a, k1) <= truncate(b, k1)); }
                let r = truncate(a, k1);
                prop_assert!(r.abs() <= k1);
                let kmin = k1.min(k2);
                if a.abs() <= kmin {
                    prop_assert_eq!(truncate(a, k1), truncate(a, k2));
                    prop_assert_eq!(truncate(a, k1), a);
                }
            }
        }
    }
}
