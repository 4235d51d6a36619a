use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid converter spec: {0}")]
    InvalidSpec(String),

    #[error("structural netlist error: {0}")]
    Structure(String),

    #[error("network is singular in configuration {0}")]
    Singular(String),

    #[error("gate schedule error: {0}")]
    Gates(String),

    #[error(
        "conduction resolution failed at t = {time:e} s; diodes kept flipping: {oscillating:?}"
    )]
    Conduction { time: f64, oscillating: Vec<String> },

    #[error("no periodic steady state after {cycles} cycles (last residual {last:e})", last = history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { cycles: usize, history: Vec<f64> },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("{source_name}:{line}: {message}")]
    Config {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("regulator error: {0}")]
    Regulator(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
