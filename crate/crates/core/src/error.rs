use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inadmissible lag window: {0}")]
    Window(String),
    #[error("numerical failure: {0}")]
    Numeric(&'static str),
    #[error("non-contractive dynamics: {0}")]
    Stability(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("coupling sequence has horizon {horizon} but the bound needs terms from k = {needed}")]
    InsufficientMoments { needed: usize, horizon: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("no analytic oracle: {0}")]
    Oracle(&'static str),
}
