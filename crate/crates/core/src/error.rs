use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input vectors do not determine the requested object.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// The query reaches outside the region the truncated object represents.
    #[error("outside truncation window: {0}")]
    Window(String),
    /// The object does not support this query in closed form.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A numerical search failed to produce a usable answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
