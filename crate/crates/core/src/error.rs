use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty request: {0}")]
    EmptyRequest(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("degenerate conditioning variable (column {column})")]
    DegenerateConditioning { column: usize },

    #[error("singular normal matrix at query index {query}")]
    SingularNormalMatrix { query: usize },

    #[error("smoother failed at Gauss-Seidel iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate output: zero total variance")]
    DegenerateOutput,

    #[error("copula axiom violated on rectangle [{u0}, {u1}] x [{v0}, {v1}]: mass {mass}")]
    CopulaAxiom {
        u0: f64,
        u1: f64,
        v0: f64,
        v1: f64,
        mass: f64,
    },

    #[error("admissibility check failed: {0}")]
    Inadmissible(String),

    #[error("too many non-convergent replications: {failed} of {total}")]
    NonConvergence { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
