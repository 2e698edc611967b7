use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("workspace violation at sample {index} (t = {t:.3} s): {detail}")]
    Workspace { index: usize, t: f64, detail: String },

    #[error("planned foot penetrates the step surface at sample {index} (t = {t:.3} s): {detail}")]
    GroundPenetration { index: usize, t: f64, detail: String },

    #[error("cycloid angle is not monotone on the track phase: {0}")]
    NonMonotoneCycloid(String),

    #[error("degenerate Bezier blend: sin(theta_c4) = {0:e}")]
    DegenerateBlend(f64),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("root solver failed to converge (residual {residual:e}): {detail}")]
    NoConvergence { residual: f64, detail: String },

    #[error("inverse kinematics did not converge after {epochs} epochs (error {error:e}, theta = ({theta1:.6}, {theta2:.6}))")]
    IkNotConverged {
        epochs: usize,
        error: f64,
        theta1: f64,
        theta2: f64,
    },

    #[error("inverse kinematics failed at sample {index} ({leg} leg): {source}")]
    IkSample {
        index: usize,
        leg: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible parameter set: {0}")]
    Infeasible(String),

    #[error("mass matrix is numerically singular (condition estimate {0:e})")]
    SingularMassMatrix(f64),

    #[error("state blow-up at t = {t:.4} s: max |qdot| = {max_rate:.3e} rad/s")]
    BlowUp { t: f64, max_rate: f64 },

    #[error("zero-moment point denominator vanishes ({0:e}); body is in free fall")]
    FreeFall(f64),

    #[error("no active ground contact")]
    Airborne,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
