//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use mlnhardy::schemes::SingularSource;
use mlnhardy::{build_mesh, Domain, FieldVector, Mesh, OperatorSet};

pub fn ball(nodes_per_axis: usize) -> Arc<Mesh> {
    build_mesh(Domain::ball(3, 1.0), nodes_per_axis, 1.25).expect("valid ball mesh")
}

pub fn operators(nodes_per_axis: usize, s: f64) -> OperatorSet {
    OperatorSet::assemble(&ball(nodes_per_axis), s).expect("assembly within size limit")
}

/// `|x|^{-1}` sampled on the operator mesh.
pub fn singular_rhs(ops: &OperatorSet) -> FieldVector {
    SingularSource::power(1.0).sample(ops.mesh()).expect("finite at nodes")
}
