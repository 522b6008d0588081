use thiserror::Error;

/// Errors raised by the inversion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported system: {inputs} inputs exceed {outputs} outputs")]
    UnsupportedSystem { inputs: usize, outputs: usize },

    #[error("no {delay}-delay inverse: rank(T_L) - rank(T_(L-1)) = {rank_gain}, need {inputs}")]
    NoInverse {
        delay: usize,
        rank_gain: usize,
        inputs: usize,
    },

    #[error("system is not observable (observability rank {rank} < {states})")]
    NotObservable { rank: usize, states: usize },

    #[error("could not draw a persistently exciting input after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("{}", inconsistent_message(*.step, *.residual, *.tolerance))]
    InconsistentTrajectory {
        step: Option<i64>,
        residual: f64,
        tolerance: f64,
    },

    #[error(
        "history windows are not a trajectory of the data (residual {residual:e} > {tolerance:e})"
    )]
    InfeasibleHistory { residual: f64, tolerance: f64 },

    #[error(
        "solver did not converge in {iterations} iterations (primal {primal:e}, dual {dual:e})"
    )]
    Convergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse: {0}")]
    Parse(String),
}

fn inconsistent_message(step: Option<i64>, residual: f64, tolerance: f64) -> String {
    match step {
        Some(k) => format!(
            "windows at k = {k} are not a trajectory of the data (residual {residual:e} > {tolerance:e})"
        ),
        None => format!(
            "windows are not a trajectory of the data (residual {residual:e} > {tolerance:e})"
        ),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches a time index to an inconsistency error.
    pub(crate) fn at_step(self, k: i64) -> Self {
        match self {
            Error::InconsistentTrajectory {
                residual,
                tolerance,
                ..
            } => Error::InconsistentTrajectory {
                step: Some(k),
                residual,
                tolerance,
            },
            other => other,
        }
    }

    /// True for errors caused by numerical inconsistency rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InconsistentTrajectory { .. }
                | Error::InfeasibleHistory { .. }
                | Error::Convergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
