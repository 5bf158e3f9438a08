use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BmsError {
    #[error("argument {value} is outside the profile domain [0, inf)")]
    Domain { value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("query point has zero total weight against every data point")]
    IsolatedQuery,

    #[error("point {index} has zero total weight; kernel does not satisfy g(0) > 0")]
    ZeroWeight { index: usize },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
}

pub type Result<T> = std::result::Result<T, BmsError>;

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(BmsError::Parameter {
            name: "h",
            reason: format!("bandwidth must be positive and finite, got {h}"),
        })
    }
}
