//! Neural acoustic question answering network, training loop and reports.

pub mod config;
pub mod coordmap;
pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod micro;
pub mod network;
pub mod train;

pub use config::{preset, presets, CoordKind, CoordSites, CoordSpan, ExtractorKind, ModelConfig};
pub use data::{Ablation, SplitData};
pub use error::{ModelError, Result};
pub use eval::{evaluate, render_report, EvalReport};
pub use network::{Batch, Graph, Naaqa};
pub use train::{train, EpochLog, Scheduler, TrainConfig, TrainOutcome};
