use thiserror::Error;

/// Every failure the library can report. Per-frame failures inside a pipeline
/// run are recorded in the report rather than surfaced through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image histogram is degenerate: no threshold separates two classes")]
    DegenerateHistogram,
    #[error("mask is empty")]
    EmptyMask,
    #[error("five-point conic system is rank deficient")]
    SingularConfiguration,
    #[error("conic does not describe a real ellipse")]
    NotAnEllipse,
    #[error("edge map has {found} set pixels, at least 5 are required")]
    InsufficientEdges { found: usize },
    #[error("region of interest disagrees with the foreground segmentation (support {support:.3})")]
    RoiMismatch { support: f64 },
    #[error("vesselness map has no valid pixels")]
    EmptyValidRegion,
    #[error("no frame is usable")]
    NoUsableFrames,
    #[error("overlap fraction {fraction:.3} is below the required minimum")]
    InsufficientOverlap { fraction: f64 },
    #[error("signal is constant over the overlap")]
    ZeroVariance,
    #[error("no registration hypothesis could be evaluated")]
    NoValidHypothesis,
    #[error("warped frame does not overlap the mosaic")]
    EmptyOverlap,
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
