use ptq_impact::error::{FactorError, GeneratorError, GlmError, PolychoricError, StatsError, SurveyError};
use ptq_impact::Error;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(String),
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_core!(
    SurveyError,
    StatsError,
    PolychoricError,
    FactorError,
    GlmError,
    GeneratorError
);

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: i32,
    stage: &'a str,
    message: String,
}

impl CliError {
    /// 2 = invalid input or config, 3 = polychoric, 4 = factor, 5 = glm, 1 = io.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::Survey(_) | Error::Stats(_) | Error::Generator(_) => 2,
                Error::Polychoric(_) | Error::Factor(FactorError::Polychoric(_)) => 3,
                Error::Factor(_) => 4,
                Error::Glm(_) => 5,
            },
        }
    }

    pub fn stage(&self) -> &'static str {
        match self.exit_code() {
            1 => "io",
            3 => "polychoric",
            4 => "factor",
            5 => "glm",
            _ => "validation",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let body = ErrorBody {
            code: self.exit_code(),
            stage: self.stage(),
            message: self.to_string(),
        };
        serde_json::json!({ "error": body }).to_string()
    }
}

pub fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
