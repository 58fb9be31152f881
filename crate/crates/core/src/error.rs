use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("patch size {patch} does not fit a {width}x{height} frame")]
    PatchTooLarge {
        patch: usize,
        width: usize,
        height: usize,
    },

    #[error("region lies outside the frame")]
    EmptyRegion,

    #[error("histogram is not normalized (sum = {0})")]
    Unnormalized(f64),

    #[error("no samples to fit")]
    NoSamples,

    #[error("empty sample list")]
    EmptySamples,

    #[error("posterior evaluation failed: {0}")]
    Posterior(String),

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("need at least two frames, got {0}")]
    TooFewFrames(usize),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible synthetic sequence: {0}")]
    Infeasible(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed {what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("ppm {path}: {message}")]
    Ppm { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
