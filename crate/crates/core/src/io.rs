//! CSV tables and JSON reports. Floats are written with 17 significant
//! digits so every value round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{HardyTable, IntegrabilitySweep, ScalingStudy};
use crate::error::Result;
use crate::grid::FieldVector;
use crate::schemes::{IterationTrace, L1Bounds, SolvabilityProbe};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Float(v) => out.push_str(&format_float(*v)),
                    Cell::Text(v) => out.push_str(v),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `node, x, y, z, value` (coordinates `x1..xn` outside three dimensions).
pub fn field_table(u: &FieldVector) -> Table {
    let mesh = u.mesh();
    let n = mesh.dim();
    let mut header: Vec<String> = vec!["node".into()];
    if n == 3 {
        header.extend(["x", "y", "z"].map(String::from));
    } else {
        header.extend((1..=n).map(|d| format!("x{d}")));
    }
    header.push("value".into());
    let mut table = Table { header, rows: Vec::with_capacity(u.len()) };
    for (i, v) in u.values().iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(mesh.point(i).iter().map(|&x| Cell::from(x)));
        row.push((*v).into());
        table.push(row);
    }
    table
}

pub fn trace_table(trace: &IterationTrace) -> Table {
    let mut t = Table::new(&[
        "k",
        "l1",
        "l2",
        "rho_sq",
        "hardy",
        "min_value",
        "monotonicity_defect",
        "solver_iterations",
        "residual",
    ]);
    for s in &trace.steps {
        t.push(vec![
            s.k.into(),
            s.l1.into(),
            s.l2.into(),
            s.rho_sq.into(),
            s.hardy.into(),
            s.min_value.into(),
            s.monotonicity_defect.into(),
            s.solver_iterations.into(),
            s.residual.into(),
        ]);
    }
    t
}

pub fn scaling_table(study: &ScalingStudy) -> Table {
    let mut t = Table::new(&["lambda", "q_scaled", "q_resampled", "gap", "identity_defect"]);
    for r in &study.rows {
        t.push(vec![r.lambda.into(), r.q_scaled.into(), r.q_resampled.into(), r.gap.into(), r.identity_defect.into()]);
    }
    t
}

pub fn hardy_table(table: &HardyTable) -> Table {
    let mut t = Table::new(&["domain", "N", "interior_count", "lambda_min", "sweeps", "converged"]);
    for r in &table.rows {
        let kind = serde_json::to_value(&r.domain).ok().and_then(|v| v["kind"].as_str().map(String::from));
        t.push(vec![
            Cell::Text(kind.unwrap_or_default()),
            r.nodes_per_axis.into(),
            r.interior_count.into(),
            r.lambda_min.into(),
            r.sweeps.into(),
            r.converged.into(),
        ]);
    }
    t
}

pub fn sweep_table(sweep: &IntegrabilitySweep) -> Table {
    let mut t = Table::new(&["gamma", "norm_m_double_star", "bound_ratio", "iterations"]);
    for r in &sweep.rows {
        t.push(vec![r.gamma.into(), r.norm.into(), r.bound_ratio.into(), r.iterations.into()]);
    }
    t
}

pub fn probe_table(probe: &SolvabilityProbe) -> Table {
    let mut t = Table::new(&["N", "interior_count", "integral", "ratio"]);
    for (k, l) in probe.levels.iter().enumerate() {
        let ratio = if k == 0 { f64::NAN } else { probe.ratios[k - 1] };
        t.push(vec![l.nodes_per_axis.into(), l.interior_count.into(), l.integral.into(), ratio.into()]);
    }
    t
}

pub fn l1_tables(bounds: &L1Bounds) -> (Table, Table) {
    let mut tk = Table::new(&["k", "rho_sq"]);
    for e in &bounds.tk_energies {
        tk.push(vec![e.k.into(), e.rho_sq.into()]);
    }
    let mut grad = Table::new(&["j", "grad_lp_norm"]);
    for g in &bounds.grad_lp_norms {
        grad.push(vec![g.j.into(), g.norm.into()]);
    }
    (tk, grad)
}
