//! Error type shared by all modules.

use crate::momentum::{ModeIndex, SparseMomentum};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("small divisor {value:e} at j = {j}, nu = [{nu}] below floor {floor:e}")]
    DivisorTooSmall { j: ModeIndex, nu: Box<SparseMomentum>, value: f64, floor: f64 },
    #[error("amplitude |c_{j}| = {modulus:e} below conditioning floor {floor:e}")]
    Conditioning { j: ModeIndex, modulus: f64, floor: f64 },
    #[error("mode {j} outside frequency window |j| <= {window}")]
    Window { j: ModeIndex, window: i64 },
    #[error("order {order} exceeds cap {cap}")]
    OrderCap { order: usize, cap: usize },
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("fixed-point iteration did not contract: {0}")]
    NonContraction(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 configuration, 2 numeric or resonance, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Config(_) | Error::Precondition(_) | Error::Window { .. } | Error::OrderCap { .. } => 1,
            Error::Io(_) | Error::Json(_) => 1,
            Error::DivisorTooSmall { .. }
            | Error::Conditioning { .. }
            | Error::Resonance(_)
            | Error::NonContraction(_)
            | Error::IllConditioned(_) => 2,
            Error::Check(_) => 3,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Config(_) => "config",
            Error::Precondition(_) => "precondition",
            Error::DivisorTooSmall { .. } => "divisor_too_small",
            Error::Conditioning { .. } => "conditioning",
            Error::Window { .. } => "window",
            Error::OrderCap { .. } => "order_cap",
            Error::Resonance(_) => "resonance",
            Error::NonContraction(_) => "non_contraction",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Check(_) => "check",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
