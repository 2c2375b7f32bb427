use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mean lies outside the family's domain. `arm` is 1-based.
    #[error("mean {value} of arm {arm} is outside the {family} mean domain {domain}")]
    Domain {
        arm: usize,
        value: f64,
        family: &'static str,
        domain: &'static str,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    /// A component broke its contract, e.g. a policy returned an arm that
    /// does not exist.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
