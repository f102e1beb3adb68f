//! Linear solves and smallest generalized eigenpairs of the assembled forms.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, FieldVector, MeshHeader};
use crate::operators::{self, OperatorSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target `‖A u - b‖ / ‖b‖`.
    pub tol: f64,
    /// `None` selects `20 √(interior count) + 500`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: None }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iterations: None }
    }

    pub fn iteration_limit(&self, size: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| 20 * (size as f64).sqrt().ceil() as usize + 500)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric operator.
///
/// Non-positive curvature `pᵀAp ≤ 0` aborts with [`Error::NotCoercive`].
/// On convergence of the recursive residual the true residual is recomputed
/// and iteration resumes if it has drifted above the target.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iterations: usize,
) -> Result<CgOutcome> {
    let size = b.len();
    if let Some(d) = diag.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::NotCoercive { iteration: 0, curvature: *d });
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; size], iterations: 0, residual: 0.0 });
    }
    let mut x = x0.unwrap_or_else(|| vec![0.0; size]);
    let mut ax = vec![0.0; size];
    let mut r = vec![0.0; size];
    let true_residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| {
        apply(x, ax);
        for i in 0..size {
            r[i] = b[i] - ax[i];
        }
        dot(r, r).sqrt()
    };
    let mut res = true_residual(&x, &mut ax, &mut r);
    let mut history = vec![res / b_norm];
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; size];
    let mut it = 0;
    while it < max_iterations {
        if res <= tol * b_norm {
            res = true_residual(&x, &mut ax, &mut r);
            if res <= tol * b_norm {
                return Ok(CgOutcome { x, iterations: it, residual: res / b_norm });
            }
            for i in 0..size {
                z[i] = r[i] / diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::NotCoercive { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..size {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt();
        history.push(res / b_norm);
        for i in 0..size {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..size {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    let res = true_residual(&x, &mut ax, &mut r);
    if res <= tol * b_norm {
        return Ok(CgOutcome { x, iterations: it, residual: res / b_norm });
    }
    Err(Error::MaxIterations { iterations: it, residual: res / b_norm, history })
}

/// Outcome of [`solve_linear`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: FieldVector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub gamma: f64,
    pub norms: BTreeMap<String, f64>,
    pub min_value: f64,
    pub max_value: f64,
    pub wall_time: f64,
    pub s: f64,
    pub tol: f64,
}

/// Everything in a [`SolveReport`] except the solution values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub residual_norm: f64,
    pub iterations: usize,
    pub gamma: f64,
    pub norms: BTreeMap<String, f64>,
    pub min_value: f64,
    pub max_value: f64,
    pub wall_time: f64,
    pub s: f64,
    pub tol: f64,
    pub mesh: MeshHeader,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            gamma: self.gamma,
            norms: self.norms.clone(),
            min_value: self.min_value,
            max_value: self.max_value,
            wall_time: self.wall_time,
            s: self.s,
            tol: self.tol,
            mesh: self.solution.mesh().header(),
        }
    }

    /// Record `‖u‖_{L^p}` under `name`.
    pub fn add_lp_norm(&mut self, name: &str, p: f64) {
        self.norms.insert(name.to_string(), self.solution.lp_norm(p));
    }
}

/// Solve `A(γ) u = f` with `A(γ) = L + F - γ/|x|^2`.
pub fn solve_linear(ops: &OperatorSet, gamma: f64, rhs: &FieldVector, options: SolverOptions) -> Result<SolveReport> {
    solve_linear_from(ops, gamma, rhs, None, options)
}

pub(crate) fn solve_linear_from(
    ops: &OperatorSet,
    gamma: f64,
    rhs: &FieldVector,
    x0: Option<Vec<f64>>,
    options: SolverOptions,
) -> Result<SolveReport> {
    if !ops.mesh().same_as(rhs.mesh()) {
        return Err(Error::MeshMismatch);
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Parameter(format!("γ = {gamma} must be finite and non-negative")));
    }
    if rhs.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("right-hand side has non-finite entries".into()));
    }
    let start = Instant::now();
    let diag = ops.diagonal(gamma);
    let outcome =
        pcg(|x, y| ops.apply(gamma, x, y), &diag, rhs.values(), x0, options.tol, options.iteration_limit(ops.size()))?;
    let solution = FieldVector::from_values(ops.mesh(), outcome.x)?;
    finish_report(ops, gamma, solution, outcome.iterations, outcome.residual, start, options.tol)
}

fn finish_report(
    ops: &OperatorSet,
    gamma: f64,
    solution: FieldVector,
    iterations: usize,
    residual_norm: f64,
    start: Instant,
    tol: f64,
) -> Result<SolveReport> {
    let mut norms = BTreeMap::new();
    norms.insert("L1".to_string(), solution.lp_norm(1.0));
    norms.insert("L2".to_string(), solution.lp_norm(2.0));
    norms.insert("rho_sq".to_string(), operators::rho_sq(ops, &solution)?);
    norms.insert("hardy".to_string(), operators::hardy_energy(ops.mesh(), &solution)?);
    Ok(SolveReport {
        min_value: solution.min(),
        max_value: solution.max(),
        solution,
        residual_norm,
        iterations,
        gamma,
        norms,
        wall_time: start.elapsed().as_secs_f64(),
        s: ops.s(),
        tol,
    })
}

/// Independent recomputation of `‖A(γ) u - f‖ / ‖f‖`.
pub fn residual_norm(ops: &OperatorSet, gamma: f64, u: &FieldVector, rhs: &FieldVector) -> f64 {
    let mut au = vec![0.0; ops.size()];
    ops.apply(gamma, u.values(), &mut au);
    let num: f64 = au.iter().zip(rhs.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = rhs.values().iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Weight of the generalized eigenproblem `(L + F) v = λ W v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Mass,
    /// `1/|x|^p`.
    HardyP {
        p: f64,
    },
}

impl Weight {
    pub fn diagonal(&self, ops: &OperatorSet) -> Vec<f64> {
        let mesh = ops.mesh();
        match *self {
            Weight::Mass => vec![1.0; ops.size()],
            Weight::HardyP { p } => (0..ops.size()).map(|i| mesh.radius(i).powf(-p)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative change of the Rayleigh quotient between sweeps.
    pub tol: f64,
    pub max_sweeps: usize,
    pub inner: SolverOptions,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_sweeps: 500, inner: SolverOptions::with_tol(1e-10) }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub vector: FieldVector,
    pub sweeps: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

/// Smallest `λ` with `(L + F) v = λ W v` by inverse power iteration; each
/// sweep is one preconditioned solve warm-started from the previous iterate.
pub fn min_generalized_eigen(ops: &OperatorSet, weight: Weight, options: EigenOptions) -> Result<EigenResult> {
    let w = weight.diagonal(ops);
    if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Parameter("eigen weight must be positive and finite".into()));
    }
    let size = ops.size();
    let diag = ops.diagonal(0.0);
    let limit = options.inner.iteration_limit(size);
    let w_norm = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();

    // positive start vector, peaked at the origin
    let mut v: Vec<f64> = (0..size).map(|i| 1.0 / (1.0 + ops.mesh().radius(i))).collect();
    let nv = w_norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = f64::INFINITY;
    let mut inner_iterations = 0;
    let mut guess: Option<Vec<f64>> = None;
    for sweep in 1..=options.max_sweeps {
        let rhs: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a * b).collect();
        let out = pcg(|x, y| ops.apply_form(x, y), &diag, &rhs, guess.take(), options.inner.tol, limit)
            .map_err(|e| e.at_step(sweep))?;
        inner_iterations += out.iterations;
        let y = out.x;
        // yᵀ(L+F)y = yᵀ W v and yᵀ W y
        let num: f64 = y.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        let ny = w_norm(&y);
        let next = num / (ny * ny);
        v = y.iter().map(|a| a / ny).collect();
        let change = (lambda - next).abs();
        lambda = next;
        guess = Some(v.iter().map(|a| a / lambda).collect());
        if change <= options.tol * lambda {
            let vector = FieldVector::from_values(ops.mesh(), v)?;
            return Ok(EigenResult { lambda, vector, sweeps: sweep, inner_iterations, converged: true });
        }
    }
    let vector = FieldVector::from_values(ops.mesh(), v)?;
    Ok(EigenResult { lambda, vector, sweeps: options.max_sweeps, inner_iterations, converged: false })
}

/// `ρ(v)^2 / (h^n vᵀ W v)`.
pub fn weighted_rayleigh_quotient(ops: &OperatorSet, weight: Weight, v: &FieldVector) -> Result<f64> {
    let w = weight.diagonal(ops);
    let den = ops.mass() * v.values().iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>();
    if den == 0.0 {
        return Err(Error::Domain("zero weighted norm in Rayleigh quotient".into()));
    }
    Ok(operators::rho_sq(ops, v)? / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, sample_field, Domain};
    use std::f64::consts::PI;

    #[test]
    fn pcg_solves_small_spd_system() {
        // tridiagonal 1D Laplacian
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let out = pcg(apply, &vec![2.0; n], &b, None, 1e-12, 500).unwrap();
        // exact: x_i = (i+1)(n-i)/2
        for (i, x) in out.x.iter().enumerate() {
            let exact = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((x - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn pcg_detects_indefinite() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0];
            y[1] = -x[1];
        };
        let err = pcg(apply, &[1.0, 1.0], &[1.0, 1.0], None, 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::NotCoercive { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn max_iterations_reports_history() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 16, 1.25).unwrap();
        let ops = OperatorSet::local_only(&mesh, 0.5).unwrap();
        let f = FieldVector::constant(&mesh, 1.0);
        let opts = SolverOptions { tol: 1e-12, max_iterations: Some(3) };
        match solve_linear(&ops, 0.0, &f, opts) {
            Err(Error::MaxIterations { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn torsion_error(n: usize) -> f64 {
        let mesh = build_mesh(Domain::ball(3, 1.0), n, 1.25).unwrap();
        let ops = OperatorSet::local_only(&mesh, 0.5).unwrap();
        let f = FieldVector::constant(&mesh, 1.0);
        let rep = solve_linear(&ops, 0.0, &f, SolverOptions::default()).unwrap();
        assert!(rep.residual_norm <= 1e-10);
        assert!(rep.min_value >= -1e-10);
        let exact = sample_field(|x| (1.0 - x.iter().map(|a| a * a).sum::<f64>()) / 6.0, &mesh).unwrap();
        rep.solution.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / exact.max()
    }

    #[test]
    fn torsion_function_local_only() {
        let coarse = torsion_error(12);
        let fine = torsion_error(20);
        assert!(fine < coarse, "{fine} vs {coarse}");
        assert!(fine < 0.05, "{fine}");
    }

    #[test]
    fn reported_residual_is_reproducible() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        let ops = OperatorSet::assemble(&mesh, 0.5).unwrap();
        let f = FieldVector::constant(&mesh, 1.0);
        let rep = solve_linear(&ops, 0.1, &f, SolverOptions::default()).unwrap();
        let again = residual_norm(&ops, 0.1, &rep.solution, &f);
        assert!((again - rep.residual_norm).abs() < 1e-14);
        let twice = solve_linear(&ops, 0.1, &f, SolverOptions::default()).unwrap();
        assert_eq!(rep.solution.values(), twice.solution.values());
        assert_eq!(rep.norms, twice.norms);
    }

    #[test]
    fn mass_eigenvalue_approaches_sine_mode() {
        let mesh = build_mesh(Domain::cube(3, 1.0), 16, 1.0).unwrap();
        let ops = OperatorSet::local_only(&mesh, 0.5).unwrap();
        let eig = min_generalized_eigen(&ops, Weight::Mass, EigenOptions::default()).unwrap();
        // separable, with the boundary on the cell faces
        let h = mesh.spacing();
        let exact = 3.0 * 4.0 / (h * h) * (PI / (2.0 * 16.0)).sin().powi(2);
        assert!(eig.converged);
        assert!((eig.lambda - exact).abs() / exact < 1e-6, "{} vs {exact}", eig.lambda);
        let q = weighted_rayleigh_quotient(&ops, Weight::Mass, &eig.vector).unwrap();
        assert!((q - eig.lambda).abs() <= 1e-8 * eig.lambda);
    }

    #[test]
    fn rejects_bad_input() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        let ops = OperatorSet::local_only(&mesh, 0.5).unwrap();
        let f = FieldVector::constant(&mesh, 1.0);
        assert!(solve_linear(&ops, -0.1, &f, SolverOptions::default()).is_err());
        let mut g = f.clone();
        g.values_mut()[0] = f64::NAN;
        assert!(solve_linear(&ops, 0.0, &g, SolverOptions::default()).is_err());
        let other = build_mesh(Domain::ball(3, 1.0), 16, 1.25).unwrap();
        assert!(matches!(
            solve_linear(&ops, 0.0, &FieldVector::zeros(&other), SolverOptions::default()),
            Err(Error::MeshMismatch)
        ));
    }
}
