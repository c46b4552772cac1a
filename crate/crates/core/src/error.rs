use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain condition violated: {0}")]
    DomainCondition(String),
    #[error("radius {r} outside admissible range (0, {max}]")]
    RadiusOutOfRange { r: f64, max: f64 },
    #[error("point outside the domain: {0}")]
    OutsideDomain(String),
    #[error("not a boundary point (residual {0:e})")]
    NotOnBoundary(f64),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("unknown model field `{0}`")]
    UnknownField(String),
    #[error("degenerate height H(r) = {0:e}")]
    DegenerateHeight(f64),
    #[error("modulus has infinite Dini integral")]
    InfiniteDini,
    #[error("cover: {0}")]
    Cover(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
