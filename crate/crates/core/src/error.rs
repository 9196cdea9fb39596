use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("could not find a non-singular sample point")]
    InconclusiveSingular,
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("output depends on an unknown input: {0}")]
    NonAffineOutput(String),
    #[error("no square subsystem of full rank exists")]
    SingularSigma,
    #[error("degenerate pivot: {0}")]
    PivotDegeneracy(String),
    #[error("codistribution generator has no potential")]
    MissingPotentials,
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("output/input coupling matrix is singular")]
    SingularMu,
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("iteration cap {0} reached")]
    IterationCap(usize),
    #[error("expression growth exceeded node cap ({nodes} > {cap})")]
    NodeCap { nodes: usize, cap: usize },
    #[error("flow blow-up at tau={tau}, t={t}: {reason}")]
    FlowBlowup { tau: f64, t: f64, reason: String },
    #[error("{0} independent symmetries; pass an explicit one")]
    MultipleSymmetries(usize),
    #[error("no sensitivity: {0}")]
    NoSensitivity(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownFunction { .. } => "UnknownFunction",
            Error::DivisionByZero => "DivisionByZero",
            Error::Domain(_) => "DomainError",
            Error::InconclusiveSingular => "InconclusiveSingular",
            Error::Validation(_) => "ValidationError",
            Error::UnknownModel(_) => "UnknownModel",
            Error::NonAffineOutput(_) => "NonAffineOutput",
            Error::SingularSigma => "SingularSigma",
            Error::PivotDegeneracy(_) => "PivotDegeneracy",
            Error::MissingPotentials => "MissingPotentials",
            Error::RankDeficient(_) => "RankDeficient",
            Error::SingularMu => "SingularMu",
            Error::NonConvergence(_) => "NonConvergence",
            Error::IterationCap(_) => "IterationCap",
            Error::NodeCap { .. } => "NodeCap",
            Error::FlowBlowup { .. } => "FlowBlowup",
            Error::MultipleSymmetries(_) => "MultipleSymmetries",
            Error::NoSensitivity(_) => "NoSensitivity",
            Error::Io(_) => "IoError",
        }
    }

    /// Input problems map to exit code 2, analysis failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::UnknownFunction { .. }
            | Error::Validation(_)
            | Error::UnknownModel(_)
            | Error::NonAffineOutput(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.code(), "message": self.to_string() });
        if let Error::Syntax { offset, .. } | Error::UnknownFunction { offset, .. } = self {
            v["offset"] = json!(offset);
        }
        v
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Error::DivisionByZero | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
