//! Seeded property suite over one mesh, as run by the `verify` command.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, MeshPolicy, PairSampling};
use crate::error::Result;
use crate::grid::{FieldVector, Mesh};
use crate::operators::{self, OperatorSet};
use crate::schemes::{self, IterationOptions};
use crate::solver::{self, SolverOptions};
use crate::special;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value <= limit, value, limit }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value >= limit, value, limit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { samples: 20, steps: 30, seed: 0, solver: SolverOptions::default() }
    }
}

fn random_field(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> FieldVector {
    let values = (0..mesh.interior_count()).map(|_| rng.gen_range(lo..hi)).collect();
    FieldVector::from_values(mesh, values).expect("length matches mesh")
}

pub fn run_property_suite(policy: &MeshPolicy, s: f64, options: SuiteOptions) -> Result<Vec<Check>> {
    let mesh = policy.build()?;
    let ops = OperatorSet::assemble(&mesh, s)?;
    let n = mesh.dim();
    let lambda_n = special::hardy_constant(n);
    let tol = options.solver.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut checks = Vec::new();

    let gamma_hi = 0.2 * lambda_n / 0.25;
    let (mut asym, mut scale, mut off, mut row_deficit) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for i in 0..ops.size() {
        let mut row = 0.0;
        for j in 0..ops.size() {
            let a = ops.entry(gamma_hi, i, j);
            scale = scale.max(a.abs());
            asym = asym.max((a - ops.entry(gamma_hi, j, i)).abs());
            let a0 = ops.entry(0.0, i, j);
            if i != j {
                off = off.max(a0);
            }
            row += a0;
        }
        row_deficit = row_deficit.max(-row);
    }
    checks.push(Check::at_most("symmetry", asym / scale, 1e-12));
    checks.push(Check::at_most("off-diagonal sign", off, 0.0));
    checks.push(Check::at_most("row sum deficit", row_deficit, 0.0));

    let mut min_witness = f64::INFINITY;
    let mut homogeneity = 0.0f64;
    for _ in 0..options.samples {
        let u = random_field(&mesh, &mut rng, -1.0, 1.0);
        let h = operators::hardy_energy(&mesh, &u)?;
        min_witness = min_witness.min(operators::rho_sq(&ops, &u)? / (lambda_n * h));
        let q = analysis::rayleigh_quotient(&ops, &u)?;
        let c = rng.gen_range(0.01..100.0);
        homogeneity = homogeneity.max((analysis::rayleigh_quotient(&ops, &u.scaled(c))? - q).abs() / q);
    }
    checks.push(Check::at_least("hardy witness ρ²/(Λ_n H)", min_witness, 0.8));
    checks.push(Check::at_most("quotient homogeneity", homogeneity, 1e-12));

    let (mut min_u, mut excess, mut adjoint, mut duality) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for k in 0..options.samples {
        let gamma = gamma_hi * k as f64 / options.samples as f64;
        let f1 = random_field(&mesh, &mut rng, 0.0, 1.0);
        let bump = random_field(&mesh, &mut rng, 0.0, 1.0);
        let f2 = FieldVector::from_values(&mesh, f1.values().iter().zip(bump.values()).map(|(a, b)| a + b).collect())?;
        let g = random_field(&mesh, &mut rng, -1.0, 1.0);
        let u1 = solver::solve_linear(&ops, gamma, &f1, options.solver)?;
        let u2 = solver::solve_linear(&ops, gamma, &f2, options.solver)?;
        let ug = solver::solve_linear(&ops, gamma, &g, options.solver)?;
        min_u = min_u.min(u1.min_value);
        for (a, b) in u1.solution.values().iter().zip(u2.solution.values()) {
            excess = excess.max(a - b);
        }
        let lhs = g.inner(&u1.solution)?;
        adjoint = adjoint.max((lhs - f1.inner(&ug.solution)?).abs() / lhs.abs().max(1.0));
        let d = schemes::duality_verify(&ops, &u1.solution, &f1, gamma, &[g], options.solver)?;
        duality = duality.max(d.max_defect);
    }
    checks.push(Check::at_least("maximum principle min u", min_u, -10.0 * tol));
    checks.push(Check::at_most("comparison excess", excess, 10.0 * tol));
    checks.push(Check::at_most("adjoint identity", adjoint, 1e-8));
    checks.push(Check::at_most("duality defect", duality, 100.0 * tol));

    let mut defect = 0.0f64;
    let mut agreement = 0.0f64;
    let one = FieldVector::constant(&mesh, 1.0);
    for gamma in [0.0, 0.1, 0.2].map(|g| g * lambda_n / 0.25) {
        let mut it = IterationOptions::new(options.steps);
        it.solver = options.solver;
        let trace = schemes::monotone_iteration(&ops, gamma, &one, it)?;
        defect = defect.max(trace.max_monotonicity_defect());
        agreement = agreement.max(trace.distance_to_direct.unwrap_or(f64::INFINITY));
    }
    checks.push(Check::at_most("monotonicity defect", defect, 10.0 * tol));
    checks.push(Check::at_most("scheme/direct agreement", agreement, 1e-4));

    let gs_mesh = MeshPolicy { nodes_per_axis: 8, ..policy.clone() }.build()?;
    let u = random_field(&gs_mesh, &mut rng, 0.05, 3.0);
    let phi = random_field(&gs_mesh, &mut rng, -2.0, 2.0);
    let pairs = if gs_mesh.interior_count() <= 200 {
        PairSampling::All
    } else {
        PairSampling::Random { count: 100_000, seed: options.seed }
    };
    checks.push(Check::at_most(
        "ground state inequality",
        analysis::ground_state_inequality_check(&u, &phi, pairs)?,
        1e-9,
    ));
    let mut power = f64::NEG_INFINITY;
    for a in [0.5, 1.0, 1.5, 2.5] {
        power = power.max(analysis::power_inequality_check(a, 100_000, 10.0, options.seed)?);
    }
    checks.push(Check::at_most("power inequality", power, 1e-12));
    Ok(checks)
}
