use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("compression ratio {0}% is outside 0..=99")]
    InvalidRatio(u32),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("model is {model_width}x{model_height} but frame is {frame_width}x{frame_height}")]
    Incompatible {
        model_width: usize,
        model_height: usize,
        frame_width: usize,
        frame_height: usize,
    },

    #[error("mask is {mask_width}x{mask_height} but groundtruth is {truth_width}x{truth_height}")]
    MaskTruthMismatch {
        mask_width: usize,
        mask_height: usize,
        truth_width: usize,
        truth_height: usize,
    },

    #[error("groundtruth label {label} at pixel ({x}, {y}) is not a valid change-detection label")]
    MalformedGroundTruth { label: u8, x: usize, y: usize },

    #[error("confusion counter overflow")]
    CounterOverflow,

    #[error("missing sequence: {}", .0.display())]
    MissingSequence(PathBuf),

    #[error("gap in frame numbering: expected index {expected}, found {}", .found.display())]
    NumberingGap { expected: u64, found: PathBuf },

    #[error("no groundtruth for frame {}", .frame.display())]
    MissingGroundTruth { frame: PathBuf },

    #[error("cannot decode {}: {source}", .path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{} is {frame_width}x{frame_height} but groundtruth {} is {truth_width}x{truth_height}", .frame.display(), .truth.display())]
    FrameTruthMismatch {
        frame: PathBuf,
        truth: PathBuf,
        frame_width: usize,
        frame_height: usize,
        truth_width: usize,
        truth_height: usize,
    },

    #[error("sequence frames differ in size: {} is {width}x{height}, expected {expected_width}x{expected_height}", .path.display())]
    FrameSizeChange {
        path: PathBuf,
        width: usize,
        height: usize,
        expected_width: usize,
        expected_height: usize,
    },

    #[error("bad temporal ROI in {}: {reason}", .path.display())]
    TemporalRoi { path: PathBuf, reason: String },

    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),

    #[error("ratio {ratio}%: {source}")]
    AtRatio {
        ratio: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot encode {}: {source}", .path.display())]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
