use alloc::string::String;

use crate::grid::Voxel;

/// Errors raised by the core numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid dimensions: {0}")]
    InvalidDims(String),
    #[error("data length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("fields do not share grid dimensions")]
    DimensionMismatch,
    #[error("voxel ({}, {}, {}) is not an interior voxel", .0.i, .0.j, .0.k)]
    BoundaryVoxel(Voxel),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("albedo {value} out of [0, 1] at flat index {index}")]
    AlbedoOutOfRange { index: usize, value: f64 },
    #[error("emission field is identically zero; residual normalization is undefined")]
    ZeroEmission,
    #[error("solver diverged (non-finite residual) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
