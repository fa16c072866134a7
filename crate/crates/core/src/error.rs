use thiserror::Error;

use crate::circuit::NetlistError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid netlist: {0}")]
    Netlist(#[from] NetlistError),

    #[error("singular nodal matrix for switch configuration {config}: {detail}")]
    Singular { config: String, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The step controller could not find a step above `dt_min`.
    #[error("step size {dt:e} s fell below dt_min {dt_min:e} s (stiffness failure)")]
    Stiffness { dt: f64, dt_min: f64 },

    #[error("crossing search for diode {diode} did not converge (residual {residual:e})")]
    Crossing { diode: usize, residual: f64 },

    #[error("no consistent switch configuration at t = {t:e} s, cycling through {cycle:?}")]
    Inconsistent { t: f64, cycle: Vec<String> },

    #[error("scheduler protocol violation: {0}")]
    Protocol(String),

    #[error("controller wire protocol, cycle {cycle}: {detail}")]
    Wire { cycle: u64, detail: String },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Any error raised while a cycle was being simulated, tagged with where it happened.
    #[error("[{module}] cycle {cycle}, t = {t:e} s: {inner}")]
    Context {
        module: &'static str,
        cycle: u64,
        t: f64,
        inner: Box<Error>,
    },
}

impl Error {
    pub fn in_cycle(self, module: &'static str, cycle: u64, t: f64) -> Self {
        match self {
            already @ Error::Context { .. } => already,
            other => Error::Context {
                module,
                cycle,
                t,
                inner: Box::new(other),
            },
        }
    }

    /// Strips any [`Error::Context`] wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { inner, .. } => inner.root(),
            other => other,
        }
    }
}
