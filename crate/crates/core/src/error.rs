use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("count table is empty: no messenger was detected")]
    EmptyTable,
    #[error("unphysical state: |a| = {norm} exceeds 1")]
    UnphysicalState { norm: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
