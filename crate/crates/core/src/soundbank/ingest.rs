use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::bank::{finish_bank, measure, Bank, ElementarySound, Split, Thresholds};
use super::BankError;
use crate::attributes::{Brightness, Instrument, Loudness, Note};
use crate::audio::{quantize_i16, read_wav, resample_linear, trim_silence};
use crate::dsp::SAMPLE_RATE;

/// One row of the metadata file that accompanies a directory of recordings.
#[derive(Clone, Debug, Deserialize)]
pub struct MetadataRow {
    pub file: String,
    pub instrument: Instrument,
    pub note: Note,
    pub octave: i32,
}

const TRIM_DBFS: f64 = -60.0;

/// Builds a bank from mono WAV files described by a JSON array of
/// [`MetadataRow`]s. Nothing is returned unless every file ingests cleanly.
pub fn ingest_wav_dir(
    dir: &Path,
    metadata: &Path,
    split: Split,
    thresholds: Option<Thresholds>,
) -> Result<Bank, BankError> {
    let rows: Vec<MetadataRow> = serde_json::from_slice(&fs::read(metadata)?)?;
    let mut by_file: BTreeMap<String, MetadataRow> = BTreeMap::new();
    for row in rows {
        by_file.insert(row.file.clone(), row);
    }

    let mut files: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| name.to_ascii_lowercase().ends_with(".wav"))
        .collect();
    files.sort();

    if let Some(missing) = files.iter().find(|f| !by_file.contains_key(*f)) {
        return Err(BankError::MissingMetadata(missing.clone()));
    }
    if let Some(row) = by_file.keys().find(|k| !files.contains(k)) {
        return Err(BankError::MissingFile(row.clone()));
    }

    let mut sounds = Vec::with_capacity(files.len());
    for (i, file) in files.iter().enumerate() {
        let row = &by_file[file];
        let audio = read_wav(&dir.join(file))?;
        let resampled = resample_linear(&audio.samples, audio.sample_rate, SAMPLE_RATE);
        let trimmed = trim_silence(&resampled, TRIM_DBFS);
        if trimmed.is_empty() {
            return Err(BankError::Format(format!("{file}: silent after trimming")));
        }
        let waveform = quantize_i16(trimmed);
        let (brightness_value, loudness_lufs) =
            measure(&waveform).map_err(|e| BankError::Format(format!("{file}: {e}")))?;
        let id = format!("{}_{:03}_{}_{}{}", split.as_str(), i, row.instrument, row.note, row.octave);
        sounds.push(ElementarySound {
            path: format!("sounds/{id}.wav"),
            id,
            instrument: row.instrument,
            note: row.note,
            octave: row.octave,
            duration_s: waveform.len() as f64 / SAMPLE_RATE as f64,
            brightness_value,
            brightness_label: Brightness::Dark,
            loudness_lufs,
            loudness_label: Loudness::Quiet,
            waveform,
        });
    }
    Ok(finish_bank(split, sounds, thresholds, None))
}
