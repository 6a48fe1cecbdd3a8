use std::io;

use thiserror::Error;

use crate::image::PixelCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("division by zero at pixel ({}, {})", .0.x, .0.y)]
    DivisionByZero(PixelCoord),

    #[error("numerical degeneracy at pixel ({}, {}) in stage {stage}", .at.x, .at.y)]
    Degenerate { at: PixelCoord, stage: usize },

    #[error("singular linear system")]
    Singular,

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed image file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures that come from the numerical pipeline rather than
    /// from inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. } | Error::Singular | Error::NonFinite(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Malformed(_) | Error::UnsupportedFormat(_)
        )
    }
}
