//! Constructive procedures on top of the solver: the monotone truncation
//! iteration, duality-solution checks, the torsion-type weight `Φ_Ω` and the
//! solvability probe built on it, two-schedule uniqueness of limits, and
//! bounds for `L^1`-type data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_mesh, dot, sample_field, Domain, FieldVector, Mesh};
use crate::operators::{self, OperatorSet};
use crate::solver::{self, SolveReport, SolverOptions};
use crate::special::{self, truncate};

/// How the right-hand side `f_k` approaches `f` along the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `f_k = T_{scale·k}(f)`.
    Truncation { scale: f64 },
    /// `f_k = (1 - k^{-power}) f`.
    Damped { power: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Truncation { scale: 1.0 }
    }
}

impl Schedule {
    pub fn apply(&self, f: &FieldVector, k: usize) -> FieldVector {
        let kf = k as f64;
        match *self {
            Schedule::Truncation { scale } => f.map(|v| truncate(v, scale * kf)),
            Schedule::Damped { power } => f.scaled(1.0 - kf.powf(-power)),
        }
    }
}

/// Per-step record of the monotone iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub l1: f64,
    pub l2: f64,
    pub rho_sq: f64,
    pub hardy: f64,
    pub min_value: f64,
    /// `max_i (φ_{k-1} - φ_k)_+`
    pub monotonicity_defect: f64,
    pub solver_iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// `φ_0 = 0, φ_1, …, φ_K`.
    pub iterates: Vec<FieldVector>,
    pub steps: Vec<StepRecord>,
    pub gamma: f64,
    /// Direct solution of `A(γ) u = f`, when requested.
    pub direct: Option<FieldVector>,
    /// `‖φ_K - u_direct‖_{L^2} / ‖u_direct‖_{L^2}`.
    pub distance_to_direct: Option<f64>,
}

impl IterationTrace {
    pub fn last(&self) -> &FieldVector {
        self.iterates.last().expect("trace always holds φ_0")
    }

    pub fn max_monotonicity_defect(&self) -> f64 {
        self.steps.iter().map(|s| s.monotonicity_defect).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub steps: usize,
    pub schedule: Schedule,
    pub solver: SolverOptions,
    pub compare_direct: bool,
}

impl IterationOptions {
    pub fn new(steps: usize) -> Self {
        Self { steps, schedule: Schedule::default(), solver: SolverOptions::default(), compare_direct: true }
    }
}

fn check_gamma_below_hardy(ops: &OperatorSet, gamma: f64) -> Result<()> {
    let lambda_n = special::hardy_constant(ops.mesh().dim());
    if !(0.0..lambda_n).contains(&gamma) {
        return Err(Error::Parameter(format!("γ = {gamma} must lie in [0, Λ_n) = [0, {lambda_n})")));
    }
    Ok(())
}

/// `φ_k` solves `(L + F) φ_k = γ φ_{k-1} / (|x|^2 + 1/k) + f_k`, `φ_0 = 0`.
pub fn monotone_iteration(
    ops: &OperatorSet,
    gamma: f64,
    f: &FieldVector,
    options: IterationOptions,
) -> Result<IterationTrace> {
    if !ops.mesh().same_as(f.mesh()) {
        return Err(Error::MeshMismatch);
    }
    check_gamma_below_hardy(ops, gamma)?;
    if options.steps < 2 {
        return Err(Error::Parameter(format!("K = {} must be at least 2", options.steps)));
    }
    if f.min() < 0.0 {
        return Err(Error::Parameter("monotone iteration needs f ≥ 0".into()));
    }
    let mesh = ops.mesh();
    let mut iterates = vec![FieldVector::zeros(mesh)];
    let mut steps = Vec::with_capacity(options.steps);
    for k in 1..=options.steps {
        let prev = iterates.last().unwrap();
        let fk = options.schedule.apply(f, k);
        let weight = operators::assemble_hardy(mesh, Some(k as f64));
        let rhs: Vec<f64> =
            prev.values().iter().zip(&weight).zip(fk.values()).map(|((p, w), fv)| gamma * w * p + fv).collect();
        let rhs = FieldVector::from_values(mesh, rhs)?;
        let rep = solver::solve_linear_from(ops, 0.0, &rhs, Some(prev.values().to_vec()), options.solver)
            .map_err(|e| e.at_step(k))?;
        let defect = prev.values().iter().zip(rep.solution.values()).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max);
        steps.push(StepRecord {
            k,
            l1: rep.norms["L1"],
            l2: rep.norms["L2"],
            rho_sq: rep.norms["rho_sq"],
            hardy: rep.norms["hardy"],
            min_value: rep.min_value,
            monotonicity_defect: defect,
            solver_iterations: rep.iterations,
            residual: rep.residual_norm,
        });
        iterates.push(rep.solution);
    }
    let (direct, distance_to_direct) = if options.compare_direct {
        let d = solver::solve_linear(ops, gamma, f, options.solver)?.solution;
        let dist = relative_lp_distance(iterates.last().unwrap(), &d, 2.0);
        (Some(d), Some(dist))
    } else {
        (None, None)
    };
    Ok(IterationTrace { iterates, steps, gamma, direct, distance_to_direct })
}

/// `‖a - b‖_{L^p} / ‖b‖_{L^p}`.
pub fn relative_lp_distance(a: &FieldVector, b: &FieldVector, p: f64) -> f64 {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let diff = FieldVector::from_values(a.mesh(), diff).expect("same mesh");
    diff.lp_norm(p) / b.lp_norm(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

/// Checks `∫ g u = γ ∫ (u/|x|^2) w + ∫ f w` for each probe `g`, with `w`
/// the `γ = 0` solution for datum `g`.
pub fn duality_verify(
    ops: &OperatorSet,
    u: &FieldVector,
    f: &FieldVector,
    gamma: f64,
    probes: &[FieldVector],
    options: SolverOptions,
) -> Result<DualityCheck> {
    u.check_same_mesh(f)?;
    if !ops.mesh().same_as(u.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let weighted_u: Vec<f64> = u.values().iter().zip(ops.hardy_diag()).map(|(a, w)| a * w).collect();
    let weighted_u = FieldVector::from_values(u.mesh(), weighted_u)?;
    let mut defects = Vec::with_capacity(probes.len());
    for (j, g) in probes.iter().enumerate() {
        let w = solver::solve_linear(ops, 0.0, g, options).map_err(|e| e.at_step(j))?.solution;
        let gu = g.inner(u)?;
        let defect = (gu - gamma * weighted_u.inner(&w)? - f.inner(&w)?).abs() / gu.abs().max(1.0);
        defects.push(defect);
    }
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    Ok(DualityCheck { defects, max_defect })
}

#[derive(Debug, Clone)]
pub struct PhiOmega {
    pub report: SolveReport,
    /// Minimum over nodes at distance ≥ 2h from the boundary.
    pub interior_min: f64,
}

/// Solution of `(L + F - γ/|x|^2) Φ = 1`, checked for positivity.
pub fn compute_phi_omega(ops: &OperatorSet, gamma: f64, options: SolverOptions) -> Result<PhiOmega> {
    let mesh = ops.mesh();
    let one = FieldVector::constant(mesh, 1.0);
    let report = solver::solve_linear(ops, gamma, &one, options)?;
    if report.min_value < -1e-10 {
        return Err(Error::Invariant(format!("Φ_Ω has negative value {}", report.min_value)));
    }
    let h = mesh.spacing();
    let interior_min = (0..mesh.interior_count())
        .filter(|&i| mesh.domain().distance_to_boundary(mesh.point(i)) >= 2.0 * h)
        .map(|i| report.solution.values()[i])
        .fold(f64::INFINITY, f64::min);
    if !(interior_min > 0.0) {
        return Err(Error::Invariant(format!("Φ_Ω not strictly positive inside (min {interior_min})")));
    }
    Ok(PhiOmega { report, interior_min })
}

/// Multiplicative profile of a singular datum `|x|^{-β} · profile(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Gaussian { sigma: f64 },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularSource {
    pub beta: f64,
    #[serde(default)]
    pub profile: Profile,
}

impl SingularSource {
    pub fn constant(value: f64) -> Self {
        Self { beta: 0.0, profile: Profile::Constant { value } }
    }

    pub fn power(beta: f64) -> Self {
        Self { beta, profile: Profile::default() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|a| a * a).sum();
        let shape = match self.profile {
            Profile::Constant { value } => value,
            Profile::Gaussian { sigma } => (-r2 / (sigma * sigma)).exp(),
        };
        if self.beta == 0.0 {
            shape
        } else {
            shape * r2.powf(-self.beta / 2.0)
        }
    }

    pub fn sample(&self, mesh: &Arc<Mesh>) -> Result<FieldVector> {
        sample_field(|x| self.eval(x), mesh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    FiniteTrend,
    DivergentTrend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    pub interior_count: usize,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityProbe {
    pub levels: Vec<ProbeLevel>,
    pub ratios: Vec<f64>,
    pub verdict: Verdict,
    pub ratio_threshold: f64,
}

/// Growth ratio above which consecutive levels count as diverging.
pub const DIVERGENCE_RATIO: f64 = 1.05;

/// `I_N = ∫ f Φ_Ω` over a ladder of meshes of the same domain and box.
pub fn solvability_probe(
    source: &SingularSource,
    domain: &Domain,
    box_half_width: f64,
    s: f64,
    gamma: f64,
    ladder: &[usize],
    options: SolverOptions,
) -> Result<SolvabilityProbe> {
    if ladder.len() < 3 {
        return Err(Error::Parameter(format!("mesh ladder needs at least 3 levels, got {}", ladder.len())));
    }
    if source.beta < 0.0 {
        return Err(Error::Parameter(format!("singularity exponent β = {} must be non-negative", source.beta)));
    }
    let mut levels = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let mesh = build_mesh(domain.clone(), n, box_half_width)?;
        let ops = OperatorSet::assemble(&mesh, s)?;
        let phi = compute_phi_omega(&ops, gamma, options)?;
        let f = source.sample(&mesh)?;
        let integral = mesh.cell_volume() * dot(f.values(), phi.report.solution.values());
        levels.push(ProbeLevel { nodes_per_axis: n, interior_count: mesh.interior_count(), integral });
    }
    let ratios: Vec<f64> = levels.windows(2).map(|w| w[1].integral / w[0].integral).collect();
    let diverging = ratios[ratios.len() - 2..].iter().all(|r| *r >= DIVERGENCE_RATIO);
    let verdict = if diverging { Verdict::DivergentTrend } else { Verdict::FiniteTrend };
    Ok(SolvabilityProbe { levels, ratios, verdict, ratio_threshold: DIVERGENCE_RATIO })
}

#[derive(Debug, Clone)]
pub struct SolaCheck {
    pub limit_a: FieldVector,
    pub limit_b: FieldVector,
    /// `‖limit_A - limit_B‖_{L^{m**}} / ‖limit_A‖_{L^{m**}}`.
    pub distance: f64,
    pub m_double_star: f64,
}

/// Runs the monotone iteration under two right-hand-side schedules and
/// compares the limits in `L^{m**}`.
pub fn sola_uniqueness_check(
    ops: &OperatorSet,
    gamma: f64,
    f: &FieldVector,
    m: f64,
    [schedule_a, schedule_b]: [Schedule; 2],
    steps: usize,
    solver: SolverOptions,
) -> Result<SolaCheck> {
    let table = special::exponent_table(ops.mesh().dim(), ops.s(), m)?;
    let mss = table.require_m_double_star()?;
    let run = |schedule| {
        let opts = IterationOptions { steps, schedule, solver, compare_direct: false };
        monotone_iteration(ops, gamma, f, opts).map(|t| t.last().clone())
    };
    let limit_a = run(schedule_a)?;
    let limit_b = run(schedule_b)?;
    let distance = relative_lp_distance(&limit_b, &limit_a, mss);
    Ok(SolaCheck { limit_a, limit_b, distance, m_double_star: mss })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationEnergy {
    pub k: f64,
    pub rho_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientNorm {
    pub j: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Bounds {
    pub p: f64,
    pub tk_energies: Vec<TruncationEnergy>,
    pub rho_sq_limit: f64,
    pub grad_lp_norms: Vec<GradientNorm>,
}

impl L1Bounds {
    /// `sup_j ‖∇φ_j‖ / ‖∇φ_2‖`.
    pub fn gradient_growth(&self) -> f64 {
        let base = self.grad_lp_norms.iter().find(|g| g.j == 2).map_or(f64::NAN, |g| g.norm);
        self.grad_lp_norms.iter().map(|g| g.norm).fold(0.0, f64::max) / base
    }
}

/// Energies of truncations of the limit and gradient norms along the
/// iteration, for data that is only integrable.
pub fn l1_case_bounds(
    ops: &OperatorSet,
    gamma: f64,
    f: &FieldVector,
    steps: usize,
    k_levels: &[f64],
    p: f64,
    solver: SolverOptions,
) -> Result<L1Bounds> {
    let n = ops.mesh().dim() as f64;
    let threshold = n / (n - 1.0);
    if !(p >= 1.0 && p < threshold) {
        return Err(Error::Parameter(format!("gradient exponent p = {p} must satisfy 1 ≤ p < n/(n-1) = {threshold}")));
    }
    if k_levels.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Parameter("truncation levels must be positive".into()));
    }
    let opts = IterationOptions { steps, schedule: Schedule::default(), solver, compare_direct: false };
    let trace = monotone_iteration(ops, gamma, f, opts)?;
    let u = trace.last();
    let mut tk_energies = Vec::with_capacity(k_levels.len());
    for &k in k_levels {
        let tk = u.map(|v| truncate(v, k));
        tk_energies.push(TruncationEnergy { k, rho_sq: operators::rho_sq(ops, &tk)? });
    }
    let grad_lp_norms = trace
        .iterates
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, phi)| GradientNorm { j, norm: operators::gradient_lp_norm(phi, p) })
        .collect();
    Ok(L1Bounds { p, tk_energies, rho_sq_limit: operators::rho_sq(ops, u)?, grad_lp_norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_mesh;

    fn setup(n: usize) -> OperatorSet {
        let mesh = build_mesh(Domain::ball(3, 1.0), n, 1.25).unwrap();
        OperatorSet::assemble(&mesh, 0.5).unwrap()
    }

    #[test]
    fn gamma_zero_collapses_to_direct_solve() {
        let ops = setup(12);
        let f = FieldVector::constant(ops.mesh(), 1.0);
        let trace = monotone_iteration(&ops, 0.0, &f, IterationOptions::new(4)).unwrap();
        assert!(trace.distance_to_direct.unwrap() < 1e-9);
        for w in trace.iterates[1..].windows(2) {
            let d = relative_lp_distance(&w[1], &w[0], 2.0);
            assert!(d < 1e-9);
        }
    }

    #[test]
    fn iteration_preconditions() {
        let ops = setup(12);
        let f = FieldVector::constant(ops.mesh(), 1.0);
        assert!(monotone_iteration(&ops, 0.3, &f, IterationOptions::new(5)).is_err());
        assert!(monotone_iteration(&ops, 0.1, &f, IterationOptions::new(1)).is_err());
        assert!(monotone_iteration(&ops, 0.1, &f.scaled(-1.0), IterationOptions::new(5)).is_err());
    }

    #[test]
    fn schedules() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        let f = FieldVector::constant(&mesh, 3.0);
        let t = Schedule::Truncation { scale: 1.0 }.apply(&f, 2);
        assert!(t.values().iter().all(|v| *v == 2.0));
        let d = Schedule::Damped { power: 1.0 }.apply(&f, 4);
        assert!(d.values().iter().all(|v| (*v - 2.25).abs() < 1e-15));
    }

    #[test]
    fn phi_omega_gamma_zero_is_torsion() {
        let ops = setup(12);
        let phi = compute_phi_omega(&ops, 0.0, SolverOptions::default()).unwrap();
        let direct =
            solver::solve_linear(&ops, 0.0, &FieldVector::constant(ops.mesh(), 1.0), SolverOptions::default()).unwrap();
        assert_eq!(phi.report.solution.values(), direct.solution.values());
        assert!(phi.interior_min > 0.0);
    }

    #[test]
    fn probe_needs_three_levels() {
        let err = solvability_probe(
            &SingularSource::constant(1.0),
            &Domain::ball(3, 1.0),
            1.25,
            0.5,
            0.1,
            &[12, 16],
            SolverOptions::default(),
        );
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn l1_threshold() {
        let ops = setup(12);
        let f = SingularSource::power(2.5).sample(ops.mesh()).unwrap();
        let ok = l1_case_bounds(&ops, 0.1, &f, 3, &[1.0], 1.4, SolverOptions::default());
        assert!(ok.is_ok());
        let err = l1_case_bounds(&ops, 0.1, &f, 3, &[1.0], 1.6, SolverOptions::default()).unwrap_err();
        assert!(err.to_string().contains("n/(n-1)"));
    }

    #[test]
    fn identical_schedules_give_zero_distance() {
        let ops = setup(12);
        let f = FieldVector::constant(ops.mesh(), 1.0);
        let s = Schedule::default();
        let check = sola_uniqueness_check(&ops, 0.1, &f, 1.3, [s, s], 5, SolverOptions::default()).unwrap();
        assert_eq!(check.distance, 0.0);
    }
}
