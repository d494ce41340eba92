use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A channel value violated its invariants.
    #[error("invalid channel: {0}")]
    Channel(String),
    /// A kernel matrix was ill-shaped or singular.
    #[error("invalid kernel: {0}")]
    Kernel(String),
    /// A requested computation exceeds the enumeration budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A simulation state had no kernel assigned and no default was set.
    #[error("no kernel for bundle {0} and no default kernel set")]
    MissingKernel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
