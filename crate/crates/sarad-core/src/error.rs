use alloc::string::String;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("expected image in {expected:?} domain, got {got:?}")]
    DomainMismatch {
        expected: crate::image::Domain,
        got: crate::image::Domain,
    },
    #[error("negative intensity {value} at flat index {index}")]
    NegativeIntensity { index: usize, value: f64 },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("image is constant; min-max normalization is undefined")]
    ConstantImage,
    #[error("image has no pixels")]
    EmptyImage,
    #[error("percentage {0} outside (0, 100]")]
    InvalidPercent(f64),
    #[error("patch size {size} exceeds image dimension {dim}")]
    PatchTooLarge { size: usize, dim: usize },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("pixel ({row}, {col}) covered by no patch")]
    UncoveredPixel { row: usize, col: usize },
    #[error("patch at ({row}, {col}) does not fit in {height}x{width} canvas")]
    PatchOutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("reflectivity must be positive, got {0}")]
    NonPositiveReflectivity(f64),
    #[error("scene spec has zero area")]
    ZeroAreaScene,
    #[error("denominator pixel at flat index {index} is not positive")]
    ZeroDenominator { index: usize },
    #[error("need at least {min} samples, got {got}")]
    SampleTooSmall { min: usize, got: usize },
    #[error("layer {layer}: {context}")]
    LayerShape { layer: usize, context: String },
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },
    #[error("gradient count {got} does not match parameter count {expected}")]
    GradientCount { expected: usize, got: usize },
    #[error("acquisition stack too small: need {min} dates, got {got}")]
    StackTooSmall { min: usize, got: usize },
    #[error("window of side {side} exceeds image dimensions {height}x{width}")]
    WindowTooLarge {
        side: usize,
        height: usize,
        width: usize,
    },
    #[error("guard window must be strictly inside the outer window")]
    GuardTooLarge,
    #[error("singular linear system")]
    SingularSystem,
    #[error("covariance matrix singular at pixel ({row}, {col})")]
    SingularMatrix { row: usize, col: usize },
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("pattern {index} out of bounds")]
    PatternOutOfBounds { index: usize },
    #[error("patterns {first} and {second} overlap")]
    PatternOverlap { first: usize, second: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
