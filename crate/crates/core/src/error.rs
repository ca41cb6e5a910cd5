use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration. `path` is a dotted field path.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("topology lacks a directed spanning tree rooted at the leader")]
    NoRootedSpanningTree,

    #[error("reduced Laplacian is defective at eigenvalue {re:.6}{im:+.6}i; no diagonalizing real similarity exists")]
    Defective { re: f64, im: f64 },

    #[error("matrix is not Hurwitz after negation: eigenvalue with real part {0:.3e} <= 0")]
    NotHurwitz(f64),

    #[error("ill-conditioned Lyapunov solve (separation estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite value at step {step} (replica {replica})")]
    Diverged { step: u64, replica: usize },

    #[error("state bound |x_i| <= {bound} violated at step {step}: agent {agent} = {value}")]
    StateBound { step: u64, agent: usize, value: f64, bound: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}
