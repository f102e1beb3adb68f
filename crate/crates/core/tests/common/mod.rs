//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]` (Newton on the three-term recurrence).
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; count];
    let mut w = vec![0.0; count];
    for i in 0..count.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0f64, 0.0f64);
            for j in 0..count {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = count as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[count - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[count - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` with `panels` composite Gauss–Legendre panels.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            acc += w * f(lo + 0.5 * width * (x + 1.0));
        }
    }
    acc * 0.5 * width
}

/// Fractional Laplacian in 3D at `x` of `u = exp(-|y|^2/σ^2)` restricted to
/// the unit ball (zero outside), computed directly from the singular
/// integral in spherical coordinates around `x`.
///
/// The near field `|y - x| < δ` uses the second-order Taylor expansion with
/// the exact Laplacian; each ray is split where it leaves the unit ball so
/// the radial integrand is smooth on every piece.
pub fn fractional_gaussian_in_ball(x: [f64; 3], sigma: f64, s: f64, c_ns: f64) -> f64 {
    let u = |y: [f64; 3]| {
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        if r2 < 1.0 {
            (-r2 / (sigma * sigma)).exp()
        } else {
            0.0
        }
    };
    let ux = u(x);
    let r2x = x.iter().map(|a| a * a).sum::<f64>();
    // Δ of exp(-r^2/σ^2) in 3D
    let lap = ux * (4.0 * r2x / sigma.powi(4) - 6.0 / sigma.powi(2));
    let delta: f64 = 2e-3;
    let near = -(lap / 6.0) * 4.0 * PI * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);

    let polar = gauss_legendre(48);
    let radial = gauss_legendre(20);
    let n_phi = 96;
    let mut far = 0.0;
    for (ct, wt) in polar.0.iter().zip(&polar.1) {
        let st = (1.0 - ct * ct).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * (k as f64 + 0.5) / n_phi as f64;
            let dir = [st * phi.cos(), st * phi.sin(), *ct];
            // exit distance from the unit ball along dir
            let b = x.iter().zip(&dir).map(|(a, d)| a * d).sum::<f64>();
            let exit = -b + (b * b - (r2x - 1.0)).sqrt();
            let ray = |r: f64| {
                let y = [x[0] + r * dir[0], x[1] + r * dir[1], x[2] + r * dir[2]];
                (ux - u(y)) * r.powf(-1.0 - 2.0 * s)
            };
            // log-spaced panels resolve the r^{-1-2s} weight near δ
            let (la, lb) = (delta.ln(), exit.ln());
            let inner = integrate_1d(|t| ray(t.exp()) * t.exp(), la, lb, 24, &radial);
            let outer = ux * exit.powf(-2.0 * s) / (2.0 * s);
            far += wt * (2.0 * PI / n_phi as f64) * (inner + outer);
        }
    }
    c_ns * (near + far)
}

/// `(-Δ)^s` of the full-space Gaussian at its center, closed form
/// `C ω σ^{-2s} Γ(1-s) / (2s)` with `ω = 4π`.
pub fn fractional_gaussian_center_exact(sigma: f64, s: f64, c_ns: f64, gamma_one_minus_s: f64) -> f64 {
    c_ns * 4.0 * PI * sigma.powf(-2.0 * s) * gamma_one_minus_s / (2.0 * s)
}
