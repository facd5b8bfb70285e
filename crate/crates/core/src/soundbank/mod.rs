//! Elementary-sound banks: synthesis, annotation and ingestion.

mod bank;
mod ingest;
mod synth;

use thiserror::Error;

pub use bank::{
    build_bank, build_bank_with_thresholds, label, median, select_combinations, Bank, BankHeader, BankManifest,
    ElementarySound, Split, Thresholds, BANK_SIZE, GENERATOR_VERSION, MANIFEST_FILE, OCTAVES,
};
pub use ingest::{ingest_wav_dir, MetadataRow};
pub use synth::{label_to_frequency, note_to_frequency, synth_note, Envelope, Timbre, MAX_DURATION_S, MIN_DURATION_S};

#[derive(Debug, Error)]
pub enum BankError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("envelope needs {needed_s:.3} s but the note lasts {duration_s:.3} s")]
    EnvelopeInfeasible { duration_s: f64, needed_s: f64 },
    #[error("no metadata row for `{0}`")]
    MissingMetadata(String),
    #[error("metadata lists `{0}` but the file does not exist")]
    MissingFile(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
