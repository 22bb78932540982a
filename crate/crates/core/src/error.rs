use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("operator has complex or repeated eigenvalues")]
    ComplexOrRepeatedEigenvalues,

    #[error("resolvent (iωI − L) is singular")]
    SingularResolvent,

    #[error("more than {max} switching events before t = {t}")]
    EventStorm { t: f64, max: usize },

    #[error("root refinement did not converge near t = {t}")]
    NonConvergedRoot { t: f64 },

    #[error("initial state lies on the switching surface with vanishing F-derivative")]
    DegenerateStart,

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("trajectory diverged at t = {t}")]
    DivergedTrajectory { t: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("point is not a grazing point: {0}")]
    NotAGrazingPoint(String),

    #[error("bracket [{lo}, {hi}] does not change sign")]
    BracketInvalid { lo: f64, hi: f64 },

    #[error("tracked leaf lost near V = {v}, C = {c}: {reason}")]
    LeafLost { v: f64, c: f64, reason: String },

    #[error("push-forward by {k} periods reaches t = {t_end}, not before the graze at {t_g}")]
    PushPastGraze { k: i32, t_end: f64, t_g: f64 },

    #[error("backward flow met a tangency at t = {t}")]
    BackwardEventAmbiguity { t: f64 },

    #[error("orbit lost before grazing at omega = {omega}: {reason}")]
    OrbitLostBeforeGraze { omega: f64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short stable identifier used in manifests and CSV failure columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ComplexOrRepeatedEigenvalues => "ComplexOrRepeatedEigenvalues",
            Error::SingularResolvent => "SingularResolvent",
            Error::EventStorm { .. } => "EventStorm",
            Error::NonConvergedRoot { .. } => "NonConvergedRoot",
            Error::DegenerateStart => "DegenerateStart",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::DivergedTrajectory { .. } => "DivergedTrajectory",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotAGrazingPoint(_) => "NotAGrazingPoint",
            Error::BracketInvalid { .. } => "BracketInvalid",
            Error::LeafLost { .. } => "LeafLost",
            Error::PushPastGraze { .. } => "PushPastGraze",
            Error::BackwardEventAmbiguity { .. } => "BackwardEventAmbiguity",
            Error::OrbitLostBeforeGraze { .. } => "OrbitLostBeforeGraze",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
