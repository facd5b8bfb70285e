//! Data generation for acoustic question answering: elementary sound banks,
//! scene composition and rendering, template-based questions with an
//! executable answer oracle, and log-mel spectrogram features.

pub mod attributes;
pub mod audio;
pub mod dsp;
pub mod features;
pub mod questengine;
pub mod scenegen;
pub mod seed;
pub mod soundbank;
