use thiserror::Error;

/// Errors raised while loading, validating or resampling survey data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurveyError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: rating {rating} outside 1..5")]
    RatingOutOfRange { line: u64, rating: i64 },
    #[error("line {line}: negative duration {duration}")]
    NegativeDuration { line: u64, duration: f64 },
    #[error("line {line}: tokens present on rating 5")]
    TokensOnRatingFive { line: u64 },
    #[error("line {line}: {message}")]
    Invariant { line: u64, message: String },
    #[error("unknown token column `{0}`")]
    UnknownToken(String),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("no informative tokens")]
    NoInformativeTokens,
    #[error("{0}")]
    EmptyClass(String),
    #[error("no tokened poor calls")]
    NoTokenedPoorCalls,
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolychoricError {
    #[error("degenerate marginal")]
    DegenerateMarginal,
    #[error("degenerate marginal for pair ({0}, {1})")]
    DegeneratePair(String, String),
    #[error("need at least 2 tokens, got {0}")]
    TooFewTokens(usize),
    #[error("empty contingency table")]
    EmptyTable,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("no factor exceeds noise floor")]
    NoFactors,
    #[error("invalid factor count {k} for {p} tokens")]
    InvalidFactorCount { k: usize, p: usize },
    #[error("every token unassigned at threshold {0}")]
    AllUnassigned(f64),
    #[error("parallel analysis needs at least 10 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error(transparent)]
    Polychoric(#[from] PolychoricError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("response has a single class")]
    SingleClass,
    #[error("singular weighted system")]
    Singular,
    #[error("group `{0}` is empty after token cleaning")]
    EmptyGroup(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
}

/// Crate-level error; each variant maps to one pipeline stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Polychoric(#[from] PolychoricError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
