//! Cell-centered Cartesian grids on a bounding box `[-L, L]^n` with a domain
//! indicator, plus grid functions and midpoint quadrature.
//!
//! Node `i` along an axis sits at `-L + (i + 1/2) h` with `h = 2L/N`. With
//! `N` even no node coincides with the origin, so `1/|x|^2` is finite at
//! every node. Box nodes are numbered lexicographically with the last axis
//! varying fastest; interior nodes inherit that order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded open domain containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, half_widths: Vec<f64> },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
}

impl Domain {
    /// Ball of radius `r` centered at the origin of `R^n`.
    pub fn ball(n: usize, r: f64) -> Self {
        Domain::Ball { center: vec![0.0; n], radius: r }
    }

    /// Axis-aligned cube `(-a, a)^n`.
    pub fn cube(n: usize, a: f64) -> Self {
        Domain::Box { center: vec![0.0; n], half_widths: vec![a; n] }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Domain::Ball { center, .. } | Domain::Box { center, .. } | Domain::Ellipsoid { center, .. } => center,
        }
    }

    fn axes(&self) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius } => vec![*radius; center.len()],
            Domain::Box { half_widths, .. } => half_widths.clone(),
            Domain::Ellipsoid { semi_axes, .. } => semi_axes.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n < 3 {
            return Err(Error::Mesh(format!("domain dimension {n} below 3")));
        }
        let axes = self.axes();
        if axes.len() != n {
            return Err(Error::Mesh(format!("domain has {} extents for dimension {n}", axes.len())));
        }
        if axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) || self.center().iter().any(|c| !c.is_finite()) {
            return Err(Error::Mesh(format!("degenerate domain {self:?}")));
        }
        if !self.contains(&vec![0.0; n]) {
            return Err(Error::Mesh("origin must lie strictly inside the domain".into()));
        }
        Ok(())
    }

    /// Strict membership of the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 1.0
    }

    // < 1 inside, == 1 on the boundary
    fn level(&self, x: &[f64]) -> f64 {
        let c = self.center();
        match self {
            Domain::Ball { radius, .. } => {
                let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                r2.sqrt() / radius
            }
            Domain::Box { half_widths, .. } => {
                x.iter().zip(c).zip(half_widths).map(|((a, b), w)| (a - b).abs() / w).fold(0.0, f64::max)
            }
            Domain::Ellipsoid { semi_axes, .. } => {
                x.iter().zip(c).zip(semi_axes).map(|((a, b), w)| ((a - b) / w).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// Distance from `x` to the boundary; a lower bound for ellipsoids.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let c = self.center();
        match self {
            Domain::Ball { radius, .. } => {
                let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                (radius - r2.sqrt()).abs()
            }
            Domain::Box { half_widths, .. } => x
                .iter()
                .zip(c)
                .zip(half_widths)
                .map(|((a, b), w)| (w - (a - b).abs()).abs())
                .fold(f64::INFINITY, f64::min),
            Domain::Ellipsoid { semi_axes, .. } => {
                let shortest = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                (1.0 - self.level(x)).abs() * shortest
            }
        }
    }

    /// Distance from an interior `x` to the boundary along `±e_axis`.
    pub fn axis_exit(&self, x: &[f64], axis: usize, forward: bool) -> f64 {
        let sign = if forward { 1.0 } else { -1.0 };
        let c = self.center();
        let axes = self.axes();
        let rel = x[axis] - c[axis];
        match self {
            Domain::Box { .. } => axes[axis] - sign * rel,
            Domain::Ball { .. } | Domain::Ellipsoid { .. } => {
                let rest: f64 = (0..x.len()).filter(|&d| d != axis).map(|d| ((x[d] - c[d]) / axes[d]).powi(2)).sum();
                axes[axis] * (1.0 - rest).max(0.0).sqrt() - sign * rel
            }
        }
    }

    /// Largest `|x_d|` reached by the closure of the domain along each axis.
    fn reach(&self) -> Vec<f64> {
        self.center().iter().zip(self.axes()).map(|(c, a)| c.abs() + a).collect()
    }

    /// Same domain scaled by `factor` about the origin.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        match self {
            Domain::Ball { center, radius } => Domain::Ball { center: scale(center), radius: radius * factor },
            Domain::Box { center, half_widths } => {
                Domain::Box { center: scale(center), half_widths: scale(half_widths) }
            }
            Domain::Ellipsoid { center, semi_axes } => {
                Domain::Ellipsoid { center: scale(center), semi_axes: scale(semi_axes) }
            }
        }
    }

    /// Half-width of the smallest origin-centered box holding the domain.
    pub fn bounding_half_width(&self) -> f64 {
        self.reach().into_iter().fold(0.0, f64::max)
    }
}

/// Serializable description of a mesh; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshHeader {
    pub n: usize,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    #[serde(rename = "L")]
    pub box_half_width: f64,
    pub domain: Domain,
    pub interior_count: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    nodes_per_axis: usize,
    half_width: f64,
    spacing: f64,
    domain: Domain,
    interior_mask: Vec<bool>,
    box_to_interior: Vec<Option<usize>>,
    interior_to_box: Vec<usize>,
    coords: Vec<f64>,
}

impl Mesh {
    /// Build the cell-centered mesh of `[-L, L]^n` with `N` cells per axis.
    pub fn build(domain: Domain, nodes_per_axis: usize, box_half_width: f64) -> Result<Arc<Mesh>> {
        domain.validate()?;
        let n = domain.dim();
        let big_n = nodes_per_axis;
        if big_n < 8 || !big_n.is_multiple_of(2) {
            return Err(Error::Mesh(format!("N = {big_n} must be even and at least 8")));
        }
        if !(box_half_width.is_finite() && box_half_width > 0.0) {
            return Err(Error::Mesh(format!("box half-width {box_half_width} must be positive")));
        }
        let reach = domain.bounding_half_width();
        if reach > box_half_width * (1.0 + 1e-12) {
            return Err(Error::Mesh(format!(
                "domain reaches |x_d| = {reach} beyond the bounding box half-width {box_half_width}"
            )));
        }
        let total = big_n
            .checked_pow(n as u32)
            .filter(|t| *t <= 50_000_000)
            .ok_or_else(|| Error::Mesh(format!("{big_n}^{n} box nodes is too many")))?;
        let h = 2.0 * box_half_width / big_n as f64;
        let mut interior_mask = vec![false; total];
        let mut box_to_interior = vec![None; total];
        let mut interior_to_box = Vec::new();
        let mut coords = Vec::new();
        let mut x = vec![0.0; n];
        for b in 0..total {
            let mut rest = b;
            for d in (0..n).rev() {
                x[d] = -box_half_width + ((rest % big_n) as f64 + 0.5) * h;
                rest /= big_n;
            }
            if domain.contains(&x) {
                interior_mask[b] = true;
                box_to_interior[b] = Some(interior_to_box.len());
                interior_to_box.push(b);
                coords.extend_from_slice(&x);
            }
        }
        if interior_to_box.is_empty() {
            return Err(Error::Mesh("no node center falls inside the domain".into()));
        }
        Ok(Arc::new(Mesh {
            dim: n,
            nodes_per_axis: big_n,
            half_width: box_half_width,
            spacing: h,
            domain,
            interior_mask,
            box_to_interior,
            interior_to_box,
            coords,
        }))
    }

    pub fn from_header(header: &MeshHeader) -> Result<Arc<Mesh>> {
        let mesh = Self::build(header.domain.clone(), header.nodes_per_axis, header.box_half_width)?;
        if mesh.interior_count() != header.interior_count || mesh.dim != header.n {
            return Err(Error::Mesh("header does not reproduce the stored interior count".into()));
        }
        Ok(mesh)
    }

    pub fn header(&self) -> MeshHeader {
        MeshHeader {
            n: self.dim,
            nodes_per_axis: self.nodes_per_axis,
            box_half_width: self.half_width,
            domain: self.domain.clone(),
            interior_count: self.interior_count(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Quadrature weight `h^n` of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn box_count(&self) -> usize {
        self.interior_mask.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior_to_box.len()
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn interior_index(&self, box_index: usize) -> Option<usize> {
        self.box_to_interior[box_index]
    }

    pub fn box_index(&self, interior: usize) -> usize {
        self.interior_to_box[interior]
    }

    /// Coordinates of interior node `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinates of an arbitrary box node.
    pub fn box_point(&self, box_index: usize, out: &mut [f64]) {
        let mut rest = box_index;
        for d in (0..self.dim).rev() {
            out[d] = self.axis_coordinate(rest % self.nodes_per_axis);
            rest /= self.nodes_per_axis;
        }
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing
    }

    pub fn multi_index(&self, box_index: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rest = box_index;
        for d in (0..self.dim).rev() {
            idx[d] = rest % self.nodes_per_axis;
            rest /= self.nodes_per_axis;
        }
        idx
    }

    /// Box neighbour of `box_index` one step along `axis`, if inside the box.
    pub fn box_neighbor(&self, box_index: usize, axis: usize, forward: bool) -> Option<usize> {
        let stride = self.nodes_per_axis.pow((self.dim - 1 - axis) as u32);
        let coord = (box_index / stride) % self.nodes_per_axis;
        match forward {
            true if coord + 1 < self.nodes_per_axis => Some(box_index + stride),
            false if coord > 0 => Some(box_index - stride),
            _ => None,
        }
    }

    /// Euclidean norm of interior node `i`.
    pub fn radius(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Distance of interior node `i` to the bounding-box boundary.
    pub fn distance_to_box(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| self.half_width - x.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Interior node closest to the origin (lowest index on ties).
    pub fn node_nearest_origin(&self) -> usize {
        (0..self.interior_count()).min_by(|&a, &b| self.radius(a).total_cmp(&self.radius(b))).unwrap_or(0)
    }

    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.nodes_per_axis == other.nodes_per_axis
                && self.half_width == other.half_width
                && self.domain == other.domain)
    }
}

/// Free-function form of [`Mesh::build`].
pub fn build_mesh(domain: Domain, nodes_per_axis: usize, box_half_width: f64) -> Result<Arc<Mesh>> {
    Mesh::build(domain, nodes_per_axis, box_half_width)
}

/// Values of a grid function on the interior nodes of a mesh; zero outside.
#[derive(Debug, Clone)]
pub struct FieldVector {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self { mesh: Arc::clone(mesh), values: vec![0.0; mesh.interior_count()] }
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Self {
        Self { mesh: Arc::clone(mesh), values: vec![c; mesh.interior_count()] }
    }

    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.interior_count() {
            return Err(Error::Mesh(format!("{} values for {} interior nodes", values.len(), mesh.interior_count())));
        }
        Ok(Self { mesh: Arc::clone(mesh), values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { mesh: Arc::clone(&self.mesh), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn check_same_mesh(&self, other: &FieldVector) -> Result<()> {
        if self.mesh.same_as(&other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// Mass-weighted inner product `h^n Σ u_i v_i`.
    pub fn inner(&self, other: &FieldVector) -> Result<f64> {
        self.check_same_mesh(other)?;
        Ok(self.mesh.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `h^n Σ |u_i|^p`.
    pub fn integrate(&self, p: f64) -> f64 {
        integrate(self, p)
    }

    /// Discrete `L^p` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        integrate(self, p).powf(1.0 / p)
    }
}

/// Sample `g` at the interior node centers.
pub fn sample_field(g: impl Fn(&[f64]) -> f64, mesh: &Arc<Mesh>) -> Result<FieldVector> {
    let mut values = Vec::with_capacity(mesh.interior_count());
    for i in 0..mesh.interior_count() {
        let x = mesh.point(i);
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: i, position: x.to_vec(), value: v });
        }
        values.push(v);
    }
    Ok(FieldVector { mesh: Arc::clone(mesh), values })
}

/// Midpoint quadrature `h^n Σ |u_i|^p`.
pub fn integrate(u: &FieldVector, p: f64) -> f64 {
    assert!(p >= 1.0, "integrate: p = {p} below 1");
    let sum: f64 = if p == 1.0 {
        u.values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        u.values.iter().map(|v| v * v).sum()
    } else {
        u.values.iter().map(|v| v.abs().powf(p)).sum()
    };
    u.mesh.cell_volume() * sum
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_interior_count_close_to_volume() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 16, 1.25).unwrap();
        let expected = 4.0 * PI / 3.0 / mesh.cell_volume();
        let count = mesh.interior_count() as f64;
        assert!(((count - expected) / expected).abs() < 0.1, "{count} vs {expected}");
    }

    #[test]
    fn full_box_is_all_interior() {
        let mesh = build_mesh(Domain::cube(3, 1.0), 8, 1.0).unwrap();
        assert_eq!(mesh.interior_count(), 512);
        let u = FieldVector::constant(&mesh, 1.0);
        assert!((integrate(&u, 1.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn origin_outside_is_rejected() {
        let d = Domain::Ball { center: vec![2.0, 0.0, 0.0], radius: 1.0 };
        assert!(matches!(build_mesh(d, 16, 4.0), Err(Error::Mesh(_))));
        assert!(build_mesh(Domain::ball(3, 2.0), 16, 1.0).is_err());
        assert!(build_mesh(Domain::ball(3, 1.0), 15, 1.25).is_err());
        assert!(build_mesh(Domain::ball(3, 1.0), 6, 1.25).is_err());
        assert!(build_mesh(Domain::ball(2, 1.0), 16, 1.25).is_err());
    }

    #[test]
    fn ball_volume_converges() {
        let exact = 4.0 * PI / 3.0;
        let mut errors = Vec::new();
        for n in [12, 16, 20, 24] {
            let mesh = build_mesh(Domain::ball(3, 1.0), n, 1.25).unwrap();
            let vol = integrate(&FieldVector::constant(&mesh, 1.0), 1.0);
            errors.push((vol - exact).abs() / exact);
        }
        assert!(errors[2] < 0.05, "{errors:?}");
        // first order in h up to lattice-counting noise
        for (e, n) in errors.iter().zip([12.0, 16.0, 20.0, 24.0]) {
            assert!(*e < 2.5 * 1.25 * 2.0 / n, "{errors:?}");
        }
    }

    #[test]
    fn index_maps_are_bijective() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        for i in 0..mesh.interior_count() {
            assert_eq!(mesh.interior_index(mesh.box_index(i)), Some(i));
            assert!(mesh.interior_mask()[mesh.box_index(i)]);
        }
        let hits = mesh.interior_mask().iter().filter(|m| **m).count();
        assert_eq!(hits, mesh.interior_count());
        let mut p = vec![0.0; 3];
        mesh.box_point(mesh.box_index(7), &mut p);
        assert_eq!(p.as_slice(), mesh.point(7));
    }

    #[test]
    fn no_node_near_origin() {
        for n in [8, 12, 16] {
            let mesh = build_mesh(Domain::ball(3, 1.0), n, 1.25).unwrap();
            let h = mesh.spacing();
            assert!((0..mesh.interior_count()).all(|i| mesh.radius(i) >= h / 2.0));
        }
    }

    #[test]
    fn sampling() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 16, 1.25).unwrap();
        let ones = sample_field(|_| 1.0, &mesh).unwrap();
        assert!(ones.values().iter().all(|v| *v == 1.0));
        let sq = sample_field(|x| x.iter().map(|a| a * a).sum(), &mesh).unwrap();
        assert!(sq.min() > 0.0);
        let inv = sample_field(|x| 1.0 / x.iter().map(|a| a * a).sum::<f64>(), &mesh).unwrap();
        let nearest =
            (0..mesh.interior_count()).min_by(|&a, &b| mesh.radius(a).partial_cmp(&mesh.radius(b)).unwrap()).unwrap();
        assert_eq!(inv.max(), inv.values()[nearest]);
        let err = sample_field(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, &mesh).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn integrate_ball_and_homogeneity() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 20, 1.25).unwrap();
        let one = FieldVector::constant(&mesh, 1.0);
        let vol = integrate(&one, 1.0);
        assert!((vol - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 0.05);
        let v = sample_field(|x| x[0] - 0.3 * x[1], &mesh).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let a = integrate(&v.scaled(-2.5), p);
            let b = 2.5f64.powf(p) * integrate(&v, p);
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn neighbours_stay_in_box() {
        let mesh = build_mesh(Domain::cube(3, 1.0), 8, 1.0).unwrap();
        assert_eq!(mesh.box_neighbor(0, 0, false), None);
        assert_eq!(mesh.box_neighbor(0, 2, true), Some(1));
        assert_eq!(mesh.box_neighbor(0, 0, true), Some(64));
        assert_eq!(mesh.box_neighbor(7, 2, true), None);
    }

    #[test]
    fn header_round_trip() {
        let mesh = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        let json = serde_json::to_string(&mesh.header()).unwrap();
        let back: MeshHeader = serde_json::from_str(&json).unwrap();
        let rebuilt = Mesh::from_header(&back).unwrap();
        assert!(rebuilt.same_as(&mesh));
        assert_eq!(rebuilt.interior_count(), mesh.interior_count());
    }

    #[test]
    fn mismatch_detected() {
        let a = build_mesh(Domain::ball(3, 1.0), 12, 1.25).unwrap();
        let b = build_mesh(Domain::ball(3, 1.0), 16, 1.25).unwrap();
        let u = FieldVector::zeros(&a);
        let v = FieldVector::zeros(&b);
        assert!(matches!(u.inner(&v), Err(Error::MeshMismatch)));
    }
}
