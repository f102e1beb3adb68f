//! Rayleigh quotients and the studies built on them: the concentration
//! family `u_λ(x) = λ^{(n-2)/2} u(λx)`, discrete Hardy constants across
//! domains, improved integrability sweeps, and the pointwise inequalities
//! used in the energy estimates.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_mesh, sample_field, Domain, FieldVector, Mesh};
use crate::operators::{self, OperatorSet};
use crate::solver::{self, EigenOptions, SolverOptions, Weight};
use crate::special;

/// `ρ(u)^2 / H(u)`.
pub fn rayleigh_quotient(ops: &OperatorSet, u: &FieldVector) -> Result<f64> {
    let h = operators::hardy_energy(ops.mesh(), u)?;
    if h == 0.0 {
        return Err(Error::Parameter("Rayleigh quotient of a field with zero Hardy energy".into()));
    }
    Ok(operators::rho_sq(ops, u)? / h)
}

/// Mesh used for a profile at `λ = 1`; the mesh for `u_λ` shrinks both the
/// domain and the box by `1/λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPolicy {
    pub domain: Domain,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    #[serde(rename = "L")]
    pub box_half_width: f64,
}

impl MeshPolicy {
    pub fn build(&self) -> Result<Arc<Mesh>> {
        build_mesh(self.domain.clone(), self.nodes_per_axis, self.box_half_width)
    }

    pub fn adapted(&self, lambda: f64) -> Result<Arc<Mesh>> {
        build_mesh(self.domain.scaled(1.0 / lambda), self.nodes_per_axis, self.box_half_width / lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lambda: f64,
    /// `Q_loc + λ^{2s-2} (C/2)[u]_s^2 / H(u)` from the `λ = 1` functionals.
    pub q_scaled: f64,
    /// Quotient of `u_λ` resampled on the adapted mesh.
    pub q_resampled: f64,
    pub gap: f64,
    pub identity_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub s: f64,
    pub gradient_sq: f64,
    pub fractional_sq: f64,
    pub hardy: f64,
    pub q_loc: f64,
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
    pub expected_slope: f64,
    pub max_identity_defect: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn scaling_study(
    profile: impl Fn(&[f64]) -> f64,
    s: f64,
    lambdas: &[f64],
    policy: &MeshPolicy,
) -> Result<ScalingStudy> {
    if lambdas.len() < 4 || lambdas.iter().any(|l| !(*l >= 1.0)) {
        return Err(Error::Parameter("scaling study needs at least 4 values λ ≥ 1".into()));
    }
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(0.0, f64::max);
    if hi < 8.0 * lo {
        return Err(Error::Parameter(format!("λ values must span a factor of at least 8, got {}", hi / lo)));
    }
    let mesh = policy.build()?;
    let n = mesh.dim() as f64;
    let ops = OperatorSet::assemble(&mesh, s)?;
    let u = sample_field(&profile, &mesh)?;
    let gradient_sq = operators::local_energy(&ops, &u)?;
    let fractional_sq = operators::fractional_energy(&ops, &u)?;
    let hardy = operators::hardy_energy(&mesh, &u)?;
    if hardy == 0.0 {
        return Err(Error::Parameter("profile vanishes on the mesh".into()));
    }
    let q_loc = gradient_sq / hardy;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let q_scaled = q_loc + lambda.powf(2.0 * s - 2.0) * fractional_sq / hardy;
        let adapted = policy.adapted(lambda)?;
        let ops_l = OperatorSet::assemble(&adapted, s)?;
        let amp = lambda.powf((n - 2.0) / 2.0);
        let u_l = sample_field(
            |x| {
                let y: Vec<f64> = x.iter().map(|a| a * lambda).collect();
                amp * profile(&y)
            },
            &adapted,
        )?;
        let q_resampled = rayleigh_quotient(&ops_l, &u_l)?;
        let gap = q_resampled - q_loc;
        if !(gap > 1e-13) {
            return Err(Error::Parameter(format!(
                "quotient gap {gap:e} at λ = {lambda} too small to fit; use a smaller λ range"
            )));
        }
        let identity_defect = (q_resampled - q_scaled).abs() / q_resampled;
        rows.push(ScalingRow { lambda, q_scaled, q_resampled, gap, identity_defect });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.lambda.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    let max_identity_defect = rows.iter().map(|r| r.identity_defect).fold(0.0, f64::max);
    Ok(ScalingStudy {
        s,
        gradient_sq,
        fractional_sq,
        hardy,
        q_loc,
        rows,
        slope,
        expected_slope: 2.0 * s - 2.0,
        max_identity_defect,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyRow {
    pub domain: Domain,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    pub interior_count: usize,
    pub lambda_min: f64,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyTable {
    pub s: f64,
    pub box_half_width: f64,
    pub rows: Vec<HardyRow>,
    /// `(max - min) / min` over domains.
    pub spread: f64,
}

/// Box half-width is `margin` times the largest domain reach, shared by all
/// domains so their meshes lie on one lattice.
pub fn hardy_inf_estimate(
    domains: &[Domain],
    s: f64,
    nodes_per_axis: usize,
    margin: f64,
    options: EigenOptions,
) -> Result<HardyTable> {
    if domains.is_empty() {
        return Err(Error::Parameter("no domains given".into()));
    }
    let reach = domains.iter().map(Domain::bounding_half_width).fold(0.0, f64::max);
    let box_half_width = margin * reach;
    let mut rows = Vec::with_capacity(domains.len());
    for d in domains {
        let mesh = build_mesh(d.clone(), nodes_per_axis, box_half_width)?;
        let ops = OperatorSet::assemble(&mesh, s)?;
        let eig = solver::min_generalized_eigen(&ops, Weight::HardyP { p: 2.0 }, options)?;
        rows.push(HardyRow {
            domain: d.clone(),
            nodes_per_axis,
            interior_count: mesh.interior_count(),
            lambda_min: eig.lambda,
            sweeps: eig.sweeps,
            converged: eig.converged,
        });
    }
    let lo = rows.iter().map(|r| r.lambda_min).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.lambda_min).fold(0.0, f64::max);
    Ok(HardyTable { s, box_half_width, rows, spread: (hi - lo) / lo })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyPProbe {
    pub p: f64,
    pub probe_min: f64,
    pub eigen_value: f64,
    pub min_quotient: f64,
}

/// Random Gaussian bump centred inside the domain.
fn random_bump(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> Result<FieldVector> {
    let reach = mesh.domain().bounding_half_width();
    let n = mesh.dim();
    let center = loop {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5) * reach).collect();
        if mesh.domain().contains(&c) {
            break c;
        }
    };
    let width = rng.gen_range(0.1..0.6) * reach;
    sample_field(
        |x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
            (-r2 / (width * width)).exp()
        },
        mesh,
    )
}

/// Smallest `ρ(u)^2 / H_p(u)` over seeded random bumps and the discrete
/// minimizer.
pub fn mixed_hardy_p_probe(
    ops: &OperatorSet,
    p: f64,
    num_probes: usize,
    seed: u64,
    options: EigenOptions,
) -> Result<HardyPProbe> {
    let mesh = ops.mesh();
    let s = ops.s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_min = f64::INFINITY;
    for _ in 0..num_probes {
        let u = random_bump(mesh, &mut rng)?;
        let q = operators::rho_sq(ops, &u)? / operators::hardy_functional(mesh, &u, p, s)?;
        probe_min = probe_min.min(q);
    }
    let eig = solver::min_generalized_eigen(ops, Weight::HardyP { p }, options)?;
    let eigen_value = operators::rho_sq(ops, &eig.vector)? / operators::hardy_functional(mesh, &eig.vector, p, s)?;
    let min_quotient = probe_min.min(eigen_value);
    if !(min_quotient > 0.0) {
        return Err(Error::Invariant(format!("Hardy-type quotient not positive: {min_quotient}")));
    }
    Ok(HardyPProbe { p, probe_min, eigen_value, min_quotient })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub norm: f64,
    pub bound_ratio: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilitySweep {
    pub m: f64,
    pub gamma_m: f64,
    pub m_double_star: f64,
    pub f_lm: f64,
    pub rows: Vec<SweepRow>,
    /// Max over min of the bound ratio.
    pub ratio_spread: f64,
}

/// Solves for each `γ` and records `‖u‖_{m**}` against the a priori bound
/// `(γ(m) - γ) ‖u‖_{m**} ≲ ‖f‖_{L^m}`.
pub fn integrability_sweep(
    ops: &OperatorSet,
    m: f64,
    f: &FieldVector,
    gammas: &[f64],
    options: SolverOptions,
) -> Result<IntegrabilitySweep> {
    let n = ops.mesh().dim();
    let table = special::exponent_table(n, ops.s(), m)?;
    if !(m > table.two_star_conj && m < n as f64 / 2.0) {
        return Err(Error::Parameter(format!(
            "m = {m} must lie in ((2*)', n/2) = ({}, {})",
            table.two_star_conj,
            n as f64 / 2.0
        )));
    }
    let gamma_m = table.require_gamma_m()?;
    let mss = table.require_m_double_star()?;
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && **g < gamma_m)) {
        return Err(Error::Parameter(format!("γ = {g} must lie in [0, γ(m)) with γ(m) = {gamma_m}")));
    }
    let f_lm = f.lp_norm(m);
    let mut rows = Vec::with_capacity(gammas.len());
    for (j, &gamma) in gammas.iter().enumerate() {
        let rep = solver::solve_linear(ops, gamma, f, options).map_err(|e| e.at_step(j))?;
        let norm = rep.solution.lp_norm(mss);
        rows.push(SweepRow { gamma, norm, bound_ratio: (gamma_m - gamma) * norm / f_lm, iterations: rep.iterations });
    }
    let lo = rows.iter().map(|r| r.bound_ratio).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max);
    Ok(IntegrabilitySweep { m, gamma_m, m_double_star: mss, f_lm, rows, ratio_spread: hi / lo })
}

/// Which node pairs the ground-state check visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairSampling {
    All,
    Random { count: usize, seed: u64 },
}

/// `max (u_x - u_y)(ψ_x - ψ_y) - (φ_x - φ_y)^2` with `ψ = φ^2/u`.
pub fn ground_state_inequality_check(u: &FieldVector, phi: &FieldVector, pairs: PairSampling) -> Result<f64> {
    u.check_same_mesh(phi)?;
    if let Some(i) = u.values().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Parameter(format!("u must be positive, u[{i}] = {}", u.values()[i])));
    }
    let uv = u.values();
    let pv = phi.values();
    let psi: Vec<f64> = pv.iter().zip(uv).map(|(p, u)| p * p / u).collect();
    let gap = |i: usize, j: usize| (uv[i] - uv[j]) * (psi[i] - psi[j]) - (pv[i] - pv[j]).powi(2);
    let mut worst = f64::NEG_INFINITY;
    match pairs {
        PairSampling::All => {
            for i in 0..uv.len() {
                for j in i + 1..uv.len() {
                    worst = worst.max(gap(i, j));
                }
            }
        }
        PairSampling::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let i = rng.gen_range(0..uv.len());
                let j = rng.gen_range(0..uv.len());
                worst = worst.max(gap(i, j));
            }
        }
    }
    Ok(worst)
}

/// `(4a/(a+1)^2)(s_1^{(a+1)/2} - s_2^{(a+1)/2})^2 - (s_1 - s_2)(s_1^a - s_2^a)`.
pub fn power_inequality_gap(a: f64, s1: f64, s2: f64) -> f64 {
    let b = (a + 1.0) / 2.0;
    4.0 * a / ((a + 1.0) * (a + 1.0)) * (s1.powf(b) - s2.powf(b)).powi(2) - (s1 - s2) * (s1.powf(a) - s2.powf(a))
}

/// Largest violation over seeded samples in `[0, upper]^2`, each scaled by
/// `max(s_1, s_2)^{a+1}`.
pub fn power_inequality_check(a: f64, num_samples: usize, upper: f64, seed: u64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("exponent a = {a} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..num_samples {
        let s1 = rng.gen_range(0.0..=upper);
        let s2 = rng.gen_range(0.0..=upper);
        let scale = s1.max(s2).powf(a + 1.0);
        if scale > 0.0 {
            worst = worst.max(power_inequality_gap(a, s1, s2) / scale);
        }
    }
    Ok(worst)
}
