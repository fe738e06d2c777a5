use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },

    #[error("truncated payload: need {needed} bytes, have {available}")]
    TruncatedPayload { needed: u64, available: u64 },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),

    #[error("non-finite header value: {0}")]
    NonFiniteHeader(String),

    #[error("invalid sample at index {index}: {value} is neither finite nor the nodata sentinel")]
    InvalidSample { index: usize, value: f32 },

    #[error("mask payload byte {value:#04x} at offset {offset} is not 0 or 1")]
    BadByte { offset: usize, value: u8 },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window {window} exceeds raster {height}x{width}")]
    WindowTooLarge { window: usize, height: usize, width: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tile {tile} band {band} has no valid samples")]
    AllNodataTile { tile: usize, band: usize },

    #[error("unknown tile {0}")]
    UnknownTile(usize),

    #[error("unknown band {0}")]
    UnknownBand(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("kernel {kernel} larger than input {input}")]
    KernelTooLarge { kernel: usize, input: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("expected sequence of {expected} frames, got {got}")]
    BadSequenceLength { expected: usize, got: usize },

    #[error("range too short: {0}")]
    RangeTooShort(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, sample {sample}")]
    NonFiniteLoss { epoch: usize, sample: usize },

    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),

    #[error("truth has zero variance")]
    ZeroVariance,

    #[error("need at least 4 scores for quartiles, got {0}")]
    TooFewScores(usize),

    #[error("missing tile {0}")]
    MissingTile(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::BadMagic { .. } => "BadMagic",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::TrailingBytes(_) => "TrailingBytes",
            Error::NonFiniteHeader(_) => "NonFiniteHeader",
            Error::InvalidSample { .. } => "InvalidSample",
            Error::BadByte { .. } => "BadByte",
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::AllNodataTile { .. } => "AllNodataTile",
            Error::UnknownTile(_) => "UnknownTile",
            Error::UnknownBand(_) => "UnknownBand",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::KernelTooLarge { .. } => "KernelTooLarge",
            Error::IndexOutOfRange(_) => "IndexOutOfRange",
            Error::BadSequenceLength { .. } => "BadSequenceLength",
            Error::RangeTooShort(_) => "RangeTooShort",
            Error::EmptyDataset => "EmptyDataset",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::VersionMismatch(_) => "VersionMismatch",
            Error::ZeroVariance => "ZeroVariance",
            Error::TooFewScores(_) => "TooFewScores",
            Error::MissingTile(_) => "MissingTile",
            Error::Parse { .. } => "ParseError",
            Error::IoFailure(_) => "IoFailure",
        }
    }
}
