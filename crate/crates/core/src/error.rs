use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A region (or clique) whose target throughputs sum to one or more.
    #[error("infeasible targets: region {region:?} has throughput sum {sum:.6} >= 1")]
    Infeasible { region: Vec<usize>, sum: f64 },

    #[error("graph is not chordal")]
    NotChordal,

    #[error("state space too large: n = {n} exceeds the enumeration cap {cap}")]
    StateSpaceTooLarge { n: usize, cap: usize },

    #[error("inverse iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by targets that the chosen method cannot realise.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. } | Error::NonConvergence { .. })
    }
}
