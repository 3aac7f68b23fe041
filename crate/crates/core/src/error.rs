use thiserror::Error;

use crate::model::Diagnostic;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0}")]
    Invalid(Diagnostic),
    #[error("layer `{layer}`: cost overflows 64-bit counters")]
    Overflow { layer: String },
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("network failed validation ({} diagnostics)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("layer `{layer}`: ofmap is {h}x{w}, square ofmap required")]
    NonSquareOfmap { layer: String, h: u64, w: u64 },
    #[error("invalid energy model parameters: {0}")]
    Params(String),
    #[error("invalid grouping strategy: {0}")]
    Strategy(String),
}

impl PlanError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            PlanError::Invalid(d) => d,
            _ => &[],
        }
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 3 usable records, got {0}")]
    TooFewRecords(usize),
    #[error("degenerate design: every usable configuration has the same arithmetic intensity")]
    Degenerate,
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum BlueprintError {
    #[error("unknown blueprint `{0}`")]
    Unknown(String),
    #[error("input resolution {0} is not a positive multiple of 32")]
    Resolution(u64),
    #[error(
        "width multiplier {multiplier} gives non-integral channel count for {channels} channels"
    )]
    Width { multiplier: f64, channels: u64 },
    #[error("width multiplier is only supported for mobilenet_v1")]
    WidthUnsupported,
    #[error("malformed config id `{0}`")]
    ConfigId(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u32),
    #[error("duplicate layer id `{0}`")]
    DuplicateId(String),
    #[error("{0}")]
    Schema(String),
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(
        "output size along {axis} is not integral: ({size} + 2*{padding} - {kernel}) / {stride}"
    )]
    NonIntegral {
        axis: &'static str,
        size: usize,
        padding: usize,
        kernel: usize,
        stride: usize,
    },
}
