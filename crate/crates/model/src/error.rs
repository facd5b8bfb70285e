use aqa_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),

    #[error("coordinate grid needs at least 2x2 cells, got {h}x{w}")]
    DegenerateGrid { h: usize, w: usize },

    #[error("empty question")]
    EmptyQuestion,

    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error("dataset: {0}")]
    Data(String),

    #[error("non-finite loss at epoch {epoch}, lr {lr}, batch {batch:?}")]
    NonFinite { epoch: usize, lr: f64, batch: Vec<String> },

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Features(#[from] aqa_core::features::FeatureError),

    #[error(transparent)]
    Questions(#[from] aqa_core::questengine::QuestionError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
