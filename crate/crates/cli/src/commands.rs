use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use mlnhardy::analysis::{self, MeshPolicy};
use mlnhardy::io::{self, Table};
use mlnhardy::operators::AssemblyOptions;
use mlnhardy::schemes::{self, IterationOptions};
use mlnhardy::solver::{self, EigenOptions, SolverOptions};
use mlnhardy::verify::{self, SuiteOptions};
use mlnhardy::{build_mesh, Error, FieldVector, Mesh, OperatorSet, Result};

use crate::config::{Config, SourceSpec};

/// Result of a command: JSON summary, CSV tables, one-line message and
/// whether every asserted property held.
pub struct Outcome {
    pub result: Value,
    pub tables: Vec<(&'static str, Table)>,
    pub summary: String,
    pub pass: bool,
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn solver_options(c: &Config) -> SolverOptions {
    SolverOptions::with_tol(c.tol)
}

fn eigen_options(c: &Config) -> EigenOptions {
    EigenOptions { tol: c.eigen_tol, ..EigenOptions::default() }
}

fn mesh(c: &Config) -> Result<Arc<Mesh>> {
    build_mesh(c.domain.clone(), c.nodes_per_axis, c.box_half_width)
}

fn operators(c: &Config, mesh: &Arc<Mesh>) -> Result<OperatorSet> {
    let options = AssemblyOptions { self_cell_correction: c.self_cell_correction, boundary_fit: c.boundary_fit };
    OperatorSet::assemble_with(mesh, c.s, options)
}

fn source(c: &Config, mesh: &Arc<Mesh>) -> Result<FieldVector> {
    match &c.f {
        SourceSpec::Table { path } => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Parameter(format!("cannot read f table {path}: {e}")))?;
            let values = text
                .lines()
                .skip(1)
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    let last = l.rsplit(',').next().unwrap_or("").trim();
                    last.parse::<f64>().map_err(|_| Error::Parameter(format!("bad value `{last}` in f table {path}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            FieldVector::from_values(mesh, values)
        }
        spec => spec.singular().expect("non-table source").sample(mesh),
    }
}

pub fn run(c: &Config) -> Result<Outcome> {
    match c.command.as_str() {
        "solve" => solve(c),
        "iterate" => iterate(c),
        "constant" => constant(c),
        "scaling" => scaling(c),
        "probe-solvability" => probe(c),
        "sweep" => sweep(c),
        "verify" => verify_suite(c),
        other => Err(Error::Parameter(format!("unknown command `{other}`"))),
    }
}

fn solve(c: &Config) -> Result<Outcome> {
    let mesh = mesh(c)?;
    let ops = operators(c, &mesh)?;
    let f = source(c, &mesh)?;
    let report = solver::solve_linear(&ops, c.gamma, &f, solver_options(c))?;
    let summary = format!(
        "solved {} nodes in {} iterations, residual {:.2e}, max u {:.6e}",
        mesh.interior_count(),
        report.iterations,
        report.residual_norm,
        report.max_value
    );
    Ok(Outcome {
        result: to_value(&report.summary())?,
        tables: vec![("solution.csv", io::field_table(&report.solution))],
        summary,
        pass: true,
    })
}

fn iterate(c: &Config) -> Result<Outcome> {
    let mesh = mesh(c)?;
    let ops = operators(c, &mesh)?;
    let f = source(c, &mesh)?;
    let options =
        IterationOptions { steps: c.steps, schedule: c.schedule, solver: solver_options(c), compare_direct: true };
    let trace = schemes::monotone_iteration(&ops, c.gamma, &f, options)?;
    let mut tables = vec![("trace.csv", io::trace_table(&trace)), ("solution.csv", io::field_table(trace.last()))];
    let mut result = json!({
        "steps": trace.steps.len(),
        "max_monotonicity_defect": trace.max_monotonicity_defect(),
        "distance_to_direct": trace.distance_to_direct,
    });
    let n = mesh.dim() as f64;
    if c.p < n / (n - 1.0) {
        let bounds = schemes::l1_case_bounds(&ops, c.gamma, &f, c.steps, &c.k_levels, c.p, solver_options(c))?;
        let (tk, grad) = io::l1_tables(&bounds);
        tables.push(("tk_energies.csv", tk));
        tables.push(("grad_norms.csv", grad));
        result["gradient_growth"] = json!(bounds.gradient_growth());
        result["rho_sq_limit"] = json!(bounds.rho_sq_limit);
    }
    let summary = format!(
        "{} steps, monotonicity defect {:.1e}, distance to direct solve {:.3e}",
        trace.steps.len(),
        trace.max_monotonicity_defect(),
        trace.distance_to_direct.unwrap_or(f64::NAN)
    );
    Ok(Outcome { result, tables, summary, pass: true })
}

fn constant(c: &Config) -> Result<Outcome> {
    let table = analysis::hardy_inf_estimate(&c.domains, c.s, c.nodes_per_axis, 1.25, eigen_options(c))?;
    let mut result = json!({ "hardy": to_value(&table)?, "lambda_n": mlnhardy::special::hardy_constant(c.n) });
    if (c.p - 2.0).abs() > 0.0 {
        let mesh = mesh(c)?;
        let ops = operators(c, &mesh)?;
        let probe = analysis::mixed_hardy_p_probe(&ops, c.p, c.num_probes, c.seed, eigen_options(c))?;
        result["hardy_p"] = to_value(&probe)?;
    }
    let values: Vec<String> = table.rows.iter().map(|r| format!("{:.5}", r.lambda_min)).collect();
    let summary = format!("discrete Hardy constants [{}], spread {:.2}%", values.join(", "), 100.0 * table.spread);
    Ok(Outcome { result, tables: vec![("constant.csv", io::hardy_table(&table))], summary, pass: true })
}

fn scaling(c: &Config) -> Result<Outcome> {
    let policy =
        MeshPolicy { domain: c.domain.clone(), nodes_per_axis: c.nodes_per_axis, box_half_width: c.box_half_width };
    let sigma = c.profile_sigma;
    let profile = move |x: &[f64]| (-x.iter().map(|a| a * a).sum::<f64>() / (sigma * sigma)).exp();
    let study = analysis::scaling_study(profile, c.s, &c.lambdas, &policy)?;
    let summary = format!(
        "fitted slope {:.4} (expected {:.4}), identity defect {:.1e}",
        study.slope, study.expected_slope, study.max_identity_defect
    );
    Ok(Outcome {
        result: to_value(&study)?,
        tables: vec![("scaling.csv", io::scaling_table(&study))],
        summary,
        pass: true,
    })
}

fn probe(c: &Config) -> Result<Outcome> {
    let source =
        c.f.singular().ok_or_else(|| Error::Parameter("probe-solvability needs a constant or power `f`".into()))?;
    let probe =
        schemes::solvability_probe(&source, &c.domain, c.box_half_width, c.s, c.gamma, &c.ladder, solver_options(c))?;
    let ratios: Vec<String> = probe.ratios.iter().map(|r| format!("{r:.4}")).collect();
    let summary = format!("{:?} (ratios {})", probe.verdict, ratios.join(", "));
    Ok(Outcome { result: to_value(&probe)?, tables: vec![("probe.csv", io::probe_table(&probe))], summary, pass: true })
}

fn sweep(c: &Config) -> Result<Outcome> {
    let mesh = mesh(c)?;
    let ops = operators(c, &mesh)?;
    let f = source(c, &mesh)?;
    let sweep = analysis::integrability_sweep(&ops, c.m, &f, &c.gammas, solver_options(c))?;
    let summary = format!(
        "γ(m) = {:.5}, m** = {:.4}, bound ratio spread {:.3}",
        sweep.gamma_m, sweep.m_double_star, sweep.ratio_spread
    );
    Ok(Outcome { result: to_value(&sweep)?, tables: vec![("sweep.csv", io::sweep_table(&sweep))], summary, pass: true })
}

fn verify_suite(c: &Config) -> Result<Outcome> {
    let policy =
        MeshPolicy { domain: c.domain.clone(), nodes_per_axis: c.nodes_per_axis, box_half_width: c.box_half_width };
    let options = SuiteOptions { samples: c.num_probes, steps: c.steps, seed: c.seed, solver: solver_options(c) };
    let checks = verify::run_property_suite(&policy, c.s, options)?;
    let mut table = Table::new(&["check", "pass", "value", "limit"]);
    for k in &checks {
        table.push(vec![k.name.as_str().into(), k.pass.into(), k.value.into(), k.limit.into()]);
    }
    let failed: Vec<&str> = checks.iter().filter(|k| !k.pass).map(|k| k.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("all {} checks passed", checks.len())
    } else {
        format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))
    };
    Ok(Outcome { result: to_value(&checks)?, tables: vec![("verify.csv", table)], summary, pass: failed.is_empty() })
}

pub fn write_outputs(dir: &Path, config: &Config, outcome: &Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, table) in &outcome.tables {
        table.write(&dir.join(name))?;
    }
    let report = json!({
        "command": config.command,
        "config": to_value(config)?,
        "result": outcome.result,
        "pass": outcome.pass,
        "summary": outcome.summary,
    });
    io::write_json(&dir.join("report.json"), &report)
}
