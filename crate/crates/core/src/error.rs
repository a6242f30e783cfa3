use thiserror::Error;

/// Errors raised by the engagement engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge ({from}, {to}) references a node outside 0..{n_nodes}")]
    EdgeOutOfRange { from: usize, to: usize, n_nodes: usize },

    #[error("edge ({node}, {node}) is a self-loop")]
    SelfLoop { node: usize },

    #[error("edge ({from}, {to}) appears more than once")]
    DuplicateEdge { from: usize, to: usize },

    #[error("node {node} is outside 0..{n_nodes}")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("degenerate dynamics: pursuer speed {speed} must be positive")]
    NonPositiveSpeed { speed: f64 },

    #[error("time-to-go denominator {denominator:e} is singular")]
    SingularTimeToGo { denominator: f64 },

    #[error("non-finite state at t = {t}: pursuer {pursuer}, {term}")]
    NonFinite { t: f64, pursuer: usize, term: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
