use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("instance mask has no foreground pixels")]
    EmptyMask,

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown {kind} backend `{id}`")]
    UnknownBackend { kind: &'static str, id: String },

    #[error("backend `{id}` unavailable: {reason}")]
    BackendUnavailable { id: String, reason: String },

    #[error("malformed rle: {0}")]
    MalformedRle(String),

    #[error("mask selects no feature cell")]
    EmptySelection,

    #[error("pooled feature vector has zero norm")]
    ZeroVector,

    #[error("promotion of target {0} produced an empty mask")]
    EmptyPromotion(usize),

    #[error("unknown class label `{0}`")]
    UnknownClass(String),

    #[error("missing tile at row {row}, col {col}")]
    MissingTile { row: usize, col: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
