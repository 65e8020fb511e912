use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image dimensions must be positive (got {width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("raster length {got} does not match {width}x{height}x{channels}")]
    RasterLength {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("invalid augmentation config: {0}")]
    InvalidAugConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("sample weight at row {row} is negative or non-finite")]
    InvalidWeight { row: usize },
    #[error("sample weights sum to zero")]
    ZeroWeightSum,
    #[error("feature row {row} has norm {norm}, expected unit length")]
    NonUnitNorm { row: usize, norm: f64 },
    #[error("temperature must be positive and finite (got {0})")]
    InvalidTemperature(f64),
    #[error("epoch {epoch} out of range for {total} epochs")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("domain-class counts are empty")]
    EmptyCounts,
    #[error("beta {0} outside [0, 1]")]
    BetaOutOfRange(f64),
    #[error("unknown domain index {0}")]
    UnknownDomain(usize),
    #[error("class index {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("cache was produced by parameter version {cache}, network is at {net}")]
    StaleCache { cache: u64, net: u64 },
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("cannot assemble batch: {0}")]
    BatchAssembly(String),
    #[error("at least 2 domains are required (got {0})")]
    TooFewDomains(usize),
    #[error("at least 2 distinct classes are required in the labels")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid synthetic domain spec: {0}")]
    InvalidSynthSpec(String),
}
