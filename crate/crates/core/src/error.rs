use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("non-finite sample {value} at interior node {node} (x = {position:?})")]
    NonFinite { node: usize, position: Vec<f64>, value: f64 },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("dense fractional assembly needs {count} interior nodes, limit is {limit}; use a smaller N")]
    TooLarge { count: usize, limit: usize },

    #[error(
        "form not coercive at this γ/mesh: curvature {curvature:e} at iteration {iteration} \
         (γ at or above the discrete Hardy constant)"
    )]
    NotCoercive { iteration: usize, curvature: f64 },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step { step, source: Box::new(self) }
    }

    /// True for solver breakdown and non-convergence, including when wrapped
    /// with a step index.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotCoercive { .. } | Error::MaxIterations { .. } | Error::Invariant(_) => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
