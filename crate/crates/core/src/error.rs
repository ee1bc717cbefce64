use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown quantity preset `{0}`")]
    UnknownPreset(String),

    #[error("preset {0} needs a neighbourhood radius eps")]
    MissingEpsilon(String),

    #[error("invalid quantity spec: {0}")]
    InvalidQuantity(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("identification target out of range at row {row}: j_e = {index}")]
    InterpolationOutOfRange { row: usize, index: usize },

    #[error("sparse factorisation failed: {0}")]
    Factorization(String),

    #[error("non-finite value in field at level {level}, node {node}")]
    NonFinite { level: usize, node: usize },

    #[error("level misalignment: {0}")]
    LevelMisalignment(String),

    #[error("exact step tables: {0}")]
    ExactTables(String),

    #[error("only {found} long cycles completed, need at least {required}")]
    InsufficientCycles { found: usize, required: usize },

    #[error("degenerate gluing system (condition number {condition:.3e})")]
    DegenerateGluing { condition: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
