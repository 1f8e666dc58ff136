use alloc::string::String;

/// Errors produced by the aggregation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller passed an argument that violates an operation precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Dimensions of two inputs disagree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A value violates a data invariant (non-finite entry, wrong length, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Clustering could not be fitted on the given data.
    #[error("codebook fit failed: {0}")]
    Fit(String),

    /// Two signatures or models do not share the same block layout.
    #[error("layout mismatch: {0}")]
    Layout(String),

    /// A test-scale operation was asked to materialize too much.
    #[error("resource limit exceeded: {requested} entries requested, limit is {limit}")]
    Resource { requested: usize, limit: usize },

    /// Evaluation is undefined for the given input.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A decomposition produced non-finite output.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
