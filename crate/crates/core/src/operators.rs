//! Assembly of the discrete mixed operator `-Δ + (-Δ)^s - γ/|x|^2` and the
//! energy functionals built from it.
//!
//! All matrices act pointwise on interior values; energies carry the cell
//! volume `h^n`, so `𝓑(u, v) = h^n vᵀ (L + F) u`.
//!
//! The fractional part `F` is a punctured lattice quadrature of the singular
//! integral. For row `i` with `ρ_i` the distance of `x_i` to the box boundary:
//!
//! * off-diagonal `F_ij = -C h^n |x_i - x_j|^{-n-2s}` for interior `j ≠ i`;
//! * diagonal `F_ii = C h^n Σ |x_i - x_j|^{-n-2s}` over box nodes `j ≠ i`
//!   with `|x_i - x_j| < ρ_i`, plus the exact tail
//!   `C ω_{n-1} ρ_i^{-2s} / (2s)` of the kernel outside that ball.
//!
//! The omitted self-cell is optionally restored to second order through the
//! local stencil: `C h^{2-2s} J_{n,s} / (2n) · L_h`, where
//! `J_{n,s} = ∫_{[-1/2,1/2]^n} |y|^{2-n-2s} dy`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dot, FieldVector, Mesh};
use crate::special;

/// Largest interior node count for which the dense fractional matrix is built.
pub const MAX_DENSE_NODES: usize = 10_000;

/// Sparse `2n+1`-point stencil of `-Δ` with homogeneous exterior values.
///
/// With boundary fitting, a neighbor outside `Ω` at axis distance `θh` from
/// the boundary adds `1/(θh^2)` to the diagonal instead of `1/h^2`; the
/// matrix stays symmetric and the solution error becomes second order.
#[derive(Debug, Clone)]
pub struct LocalStencil {
    diag: Vec<f64>,
    off: f64,
    offsets: Vec<usize>,
    cols: Vec<usize>,
}

/// Smallest boundary fraction `θ` used by the fitted stencil.
pub const MIN_BOUNDARY_FRACTION: f64 = 0.05;

impl LocalStencil {
    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if self.neighbors(i).contains(&j) {
            self.off
        } else {
            0.0
        }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    fn apply_row(&self, i: usize, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &j in self.neighbors(i) {
            acc += u[j];
        }
        self.diag[i] * u[i] + self.off * acc
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = self.apply_row(i, u));
    }
}

pub fn assemble_local(mesh: &Mesh, boundary_fit: bool) -> LocalStencil {
    let h = mesh.spacing();
    let h2 = h * h;
    let mut offsets = Vec::with_capacity(mesh.interior_count() + 1);
    let mut cols = Vec::new();
    let mut diag = Vec::with_capacity(mesh.interior_count());
    offsets.push(0);
    for i in 0..mesh.interior_count() {
        let b = mesh.box_index(i);
        let x = mesh.point(i);
        let mut d = 0.0;
        for axis in 0..mesh.dim() {
            for forward in [false, true] {
                match mesh.box_neighbor(b, axis, forward).and_then(|nb| mesh.interior_index(nb)) {
                    Some(j) => {
                        cols.push(j);
                        d += 1.0 / h2;
                    }
                    None if boundary_fit => {
                        let theta = (mesh.domain().axis_exit(x, axis, forward) / h).clamp(MIN_BOUNDARY_FRACTION, 1.0);
                        d += 1.0 / (theta * h2);
                    }
                    None => d += 1.0 / h2,
                }
            }
        }
        diag.push(d);
        offsets.push(cols.len());
    }
    LocalStencil { diag, off: -1.0 / h2, offsets, cols }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Restore the punctured self-cell through the local stencil.
    pub self_cell_correction: bool,
    /// Fit the local stencil to the boundary position along each axis.
    pub boundary_fit: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { self_cell_correction: true, boundary_fit: true }
    }
}

/// Dense symmetric fractional matrix on interior nodes.
#[derive(Debug, Clone)]
pub struct FractionalPart {
    size: usize,
    matrix: Vec<f64>,
    tail: Vec<f64>,
    correction: f64,
}

impl FractionalPart {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.size..(i + 1) * self.size]
    }

    /// Exact far-field contribution included in each diagonal entry.
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    /// Coefficient multiplying `L_h` for the self-cell correction (0 if off).
    pub fn self_cell_coefficient(&self) -> f64 {
        self.correction
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = dot(self.row(i), u));
    }
}

/// `∫_{[-1/2,1/2]^n} |y|^{2-n-2s} dy` by splitting the cube into `2n`
/// pyramids over its faces and integrating each face with Gauss–Legendre.
pub fn self_cell_moment(n: usize, s: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(24);
    let nf = n as f64;
    let power = 2.0 - nf - 2.0 * s;
    let face_dim = n - 1;
    let mut acc = 0.0;
    let mut idx = vec![0usize; face_dim];
    loop {
        let mut r2 = 0.25;
        let mut w = 1.0;
        for &k in &idx {
            let a = 0.5 * nodes[k];
            r2 += a * a;
            w *= 0.5 * weights[k];
        }
        acc += w * r2.powf(power / 2.0);
        let mut d = 0;
        loop {
            if d == face_dim {
                // ray from origin through the face: ∫_0^1 t^{1-2s} dt · (1/2) · face integral
                return 2.0 * nf * 0.5 * acc / (2.0 - 2.0 * s);
            }
            idx[d] += 1;
            if idx[d] < nodes.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let m = count.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..count {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = count as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[count - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

pub fn assemble_fractional(mesh: &Mesh, s: f64, options: AssemblyOptions) -> Result<FractionalPart> {
    let count = mesh.interior_count();
    if count > MAX_DENSE_NODES {
        return Err(Error::TooLarge { count, limit: MAX_DENSE_NODES });
    }
    let n = mesh.dim();
    let c_ns = special::normalization_constant(n, s)?;
    let h = mesh.spacing();
    let big_n = mesh.nodes_per_axis();
    let weight = c_ns * mesh.cell_volume();
    let exponent = -(n as f64 + 2.0 * s) / 2.0;
    let omega = special::unit_sphere_area(n);

    // Kernel and squared distance tabulated by absolute lattice offset.
    let table_len = mesh.box_count();
    let mut kernel = vec![0.0; table_len];
    let mut dist2 = vec![0.0; table_len];
    for (o, (k, d2)) in kernel.iter_mut().zip(dist2.iter_mut()).enumerate().skip(1) {
        let mut rest = o;
        let mut r2 = 0.0;
        for _ in 0..n {
            let c = (rest % big_n) as f64 * h;
            r2 += c * c;
            rest /= big_n;
        }
        *d2 = r2;
        *k = weight * r2.powf(exponent);
    }
    let strides: Vec<usize> = (0..n).map(|d| big_n.pow((n - 1 - d) as u32)).collect();

    let mut matrix = vec![0.0; count * count];
    let tail: Vec<f64> = (0..count)
        .map(|i| {
            let rho = mesh.distance_to_box(i);
            c_ns * omega * rho.powf(-2.0 * s) / (2.0 * s)
        })
        .collect();

    matrix.par_chunks_mut(count).enumerate().for_each(|(i, row)| {
        let a = mesh.multi_index(mesh.box_index(i));
        // offset contribution of each axis coordinate, per axis
        let axis_offsets: Vec<Vec<usize>> =
            (0..n).map(|d| (0..big_n).map(|b| a[d].abs_diff(b) * strides[d]).collect()).collect();
        let rho = mesh.distance_to_box(i);
        let rho2 = rho * rho;
        let mask = mesh.interior_mask();
        let mut diag = 0.0;
        // box nodes enumerated lexicographically: fixed summation order
        let mut idx = vec![0usize; n];
        let mut box_index = 0usize;
        loop {
            let o: usize = (0..n).map(|d| axis_offsets[d][idx[d]]).sum();
            if o != 0 {
                let k = kernel[o];
                if dist2[o] < rho2 {
                    diag += k;
                }
                if mask[box_index] {
                    let j = mesh.interior_index(box_index).unwrap();
                    row[j] = -k;
                }
            }
            box_index += 1;
            let mut d = n;
            loop {
                if d == 0 {
                    row[i] = diag + tail[i];
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < big_n {
                    break;
                }
                idx[d] = 0;
            }
        }
    });

    let correction = if options.self_cell_correction {
        let coef = c_ns * h.powf(2.0 - 2.0 * s) * self_cell_moment(n, s) / (2.0 * n as f64);
        let local = assemble_local(mesh, false);
        for i in 0..count {
            matrix[i * count + i] += coef * local.diag[i];
            for &j in local.neighbors(i) {
                matrix[i * count + j] += coef * local.off;
            }
        }
        coef
    } else {
        0.0
    };

    Ok(FractionalPart { size: count, matrix, tail, correction })
}

/// Hardy weight per node: `1/|x|^2`, or `1/(|x|^2 + 1/k)` when regularized.
pub fn assemble_hardy(mesh: &Mesh, regularization_k: Option<f64>) -> Vec<f64> {
    let shift = regularization_k.map_or(0.0, |k| 1.0 / k);
    (0..mesh.interior_count())
        .map(|i| {
            let r = mesh.radius(i);
            1.0 / (r * r + shift)
        })
        .collect()
}

/// Assembled pieces of `A(γ) = L + F - γ H` on one mesh.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    mesh: Arc<Mesh>,
    s: f64,
    c_ns: f64,
    local: LocalStencil,
    fractional: Option<FractionalPart>,
    hardy: Vec<f64>,
}

impl OperatorSet {
    /// Full mixed operator with the default fractional quadrature.
    pub fn assemble(mesh: &Arc<Mesh>, s: f64) -> Result<Self> {
        Self::assemble_with(mesh, s, AssemblyOptions::default())
    }

    pub fn assemble_with(mesh: &Arc<Mesh>, s: f64, options: AssemblyOptions) -> Result<Self> {
        let fractional = assemble_fractional(mesh, s, options)?;
        Ok(Self {
            mesh: Arc::clone(mesh),
            s,
            c_ns: special::normalization_constant(mesh.dim(), s)?,
            local: assemble_local(mesh, options.boundary_fit),
            fractional: Some(fractional),
            hardy: assemble_hardy(mesh, None),
        })
    }

    /// Local-only validation mode: the fractional part is dropped.
    pub fn local_only(mesh: &Arc<Mesh>, s: f64) -> Result<Self> {
        Ok(Self {
            mesh: Arc::clone(mesh),
            s,
            c_ns: special::normalization_constant(mesh.dim(), s)?,
            local: assemble_local(mesh, true),
            fractional: None,
            hardy: assemble_hardy(mesh, None),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    pub fn size(&self) -> usize {
        self.mesh.interior_count()
    }

    pub fn mass(&self) -> f64 {
        self.mesh.cell_volume()
    }

    pub fn local(&self) -> &LocalStencil {
        &self.local
    }

    pub fn fractional(&self) -> Option<&FractionalPart> {
        self.fractional.as_ref()
    }

    pub fn hardy_diag(&self) -> &[f64] {
        &self.hardy
    }

    /// Entry `(i, j)` of `A(γ)`.
    pub fn entry(&self, gamma: f64, i: usize, j: usize) -> f64 {
        let mut a = self.local.entry(i, j);
        if let Some(f) = &self.fractional {
            a += f.entry(i, j);
        }
        if i == j {
            a -= gamma * self.hardy[i];
        }
        a
    }

    /// Diagonal of `A(γ)`.
    pub fn diagonal(&self, gamma: f64) -> Vec<f64> {
        (0..self.size()).map(|i| self.entry(gamma, i, i)).collect()
    }

    /// `out = (L + F) u`, parallel by row with a fixed per-row order.
    pub fn apply_form(&self, u: &[f64], out: &mut [f64]) {
        match &self.fractional {
            Some(f) => {
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = self.local.apply_row(i, u) + dot(f.row(i), u))
            }
            None => self.local.apply(u, out),
        }
    }

    /// `out = A(γ) u`.
    pub fn apply(&self, gamma: f64, u: &[f64], out: &mut [f64]) {
        self.apply_form(u, out);
        if gamma != 0.0 {
            for ((o, w), v) in out.iter_mut().zip(&self.hardy).zip(u) {
                *o -= gamma * w * v;
            }
        }
    }

    /// `out = A(γ) u` with a caller-supplied Hardy weight instead of `1/|x|^2`.
    pub fn apply_with_weight(&self, gamma: f64, weight: &[f64], u: &[f64], out: &mut [f64]) {
        self.apply_form(u, out);
        for ((o, w), v) in out.iter_mut().zip(weight).zip(u) {
            *o -= gamma * w * v;
        }
    }

    fn check(&self, u: &FieldVector) -> Result<()> {
        if self.mesh.same_as(u.mesh()) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// `𝓑(u, v) = h^n vᵀ (L + F) u`.
pub fn bilinear_form(ops: &OperatorSet, u: &FieldVector, v: &FieldVector) -> Result<f64> {
    ops.check(u)?;
    ops.check(v)?;
    let mut au = vec![0.0; ops.size()];
    ops.apply_form(u.values(), &mut au);
    Ok(ops.mass() * dot(v.values(), &au))
}

/// `ρ(u)^2 = 𝓑(u, u)`.
pub fn rho_sq(ops: &OperatorSet, u: &FieldVector) -> Result<f64> {
    bilinear_form(ops, u, u)
}

/// Discrete Dirichlet energy `‖∇u‖^2 = h^n uᵀ L u`.
pub fn local_energy(ops: &OperatorSet, u: &FieldVector) -> Result<f64> {
    ops.check(u)?;
    let mut lu = vec![0.0; ops.size()];
    ops.local.apply(u.values(), &mut lu);
    Ok(ops.mass() * dot(u.values(), &lu))
}

/// `h^n uᵀ F u`; zero in local-only mode.
pub fn fractional_energy(ops: &OperatorSet, u: &FieldVector) -> Result<f64> {
    ops.check(u)?;
    Ok(match &ops.fractional {
        Some(f) => {
            let mut fu = vec![0.0; ops.size()];
            f.apply(u.values(), &mut fu);
            ops.mass() * dot(u.values(), &fu)
        }
        None => 0.0,
    })
}

/// `H_p(u) = h^n Σ u_i^2 / |x_i|^p` for `p ∈ [2s, 2]`.
pub fn hardy_functional(mesh: &Mesh, u: &FieldVector, p: f64, s: f64) -> Result<f64> {
    if !(p >= 2.0 * s - 1e-15 && p <= 2.0 + 1e-15) {
        return Err(Error::Domain(format!("Hardy exponent p = {p} outside [2s, 2] = [{}, 2]", 2.0 * s)));
    }
    if !mesh.same_as(u.mesh()) {
        return Err(Error::MeshMismatch);
    }
    Ok(hardy_sum(mesh, u.values(), p))
}

/// `H(u)` with the classical weight `1/|x|^2`.
pub fn hardy_energy(mesh: &Mesh, u: &FieldVector) -> Result<f64> {
    if !mesh.same_as(u.mesh()) {
        return Err(Error::MeshMismatch);
    }
    Ok(hardy_sum(mesh, u.values(), 2.0))
}

fn hardy_sum(mesh: &Mesh, u: &[f64], p: f64) -> f64 {
    let sum: f64 = u
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r2: f64 = mesh.point(i).iter().map(|x| x * x).sum();
            v * v / if p == 2.0 { r2 } else { r2.powf(p / 2.0) }
        })
        .sum();
    mesh.cell_volume() * sum
}

/// Gagliardo seminorm squared, `[u]_s^2 = (2/C) h^n uᵀ F u`, so that
/// `ρ(u)^2 = ‖∇u‖^2 + (C/2) [u]_s^2`.
pub fn gagliardo_seminorm_sq(ops: &OperatorSet, u: &FieldVector) -> Result<f64> {
    if ops.fractional.is_none() {
        return Err(Error::Parameter("Gagliardo seminorm needs the fractional part".into()));
    }
    Ok(2.0 / ops.c_ns * fractional_energy(ops, u)?)
}

/// Discrete `‖∇u‖_{L^p}` from forward differences on the zero-padded box.
pub fn gradient_lp_norm(u: &FieldVector, p: f64) -> f64 {
    let mesh = u.mesh();
    let n = mesh.dim();
    let big_n = mesh.nodes_per_axis();
    let h = mesh.spacing();
    let ext = big_n + 2;
    let total = ext.pow(n as u32);
    // padded copy: extended index e_d = b_d + 1
    let mut padded = vec![0.0; total];
    let ext_strides: Vec<usize> = (0..n).map(|d| ext.pow((n - 1 - d) as u32)).collect();
    for (i, v) in u.values().iter().enumerate() {
        let idx = mesh.multi_index(mesh.box_index(i));
        let e: usize = idx.iter().zip(&ext_strides).map(|(a, st)| (a + 1) * st).sum();
        padded[e] = *v;
    }
    let mut sum = 0.0;
    for e in 0..total {
        let mut g2 = 0.0;
        let mut rest = e;
        let mut any = padded[e] != 0.0;
        for d in (0..n).rev() {
            let c = rest % ext;
            rest /= ext;
            if c + 1 < ext {
                let nb = padded[e + ext_strides[d]];
                any |= nb != 0.0;
                let diff = (nb - padded[e]) / h;
                g2 += diff * diff;
            }
        }
        if any && g2 > 0.0 {
            sum += if p == 2.0 { g2 } else { g2.powf(p / 2.0) };
        }
    }
    (mesh.cell_volume() * sum).powf(1.0 / p)
}
