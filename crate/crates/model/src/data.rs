//! Dataset splits as the network consumes them.
//!
//! Directory layout written by the dataset pipeline:
//!
//! ```text
//! banks/{train,test}/        sound banks
//! scenes/{train,val,test}/   scene specs, WAVs and index.json
//! questions/{split}.jsonl    QA records with a label header
//! features/{split}/*.aqaf    padded or resized spectrograms
//! features/norm_stats.json   statistics fitted on train
//! vocab.json                 token list
//! ```

use std::path::{Path, PathBuf};

use aqa_autodiff::{Real, Tensor};
use aqa_core::features::{normalize, read_features, NormStats, Spectrogram};
use aqa_core::questengine::{label_set, read_qa_jsonl, QaRecord, QuestionType, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::network::Batch;

pub const SPLITS: [&str; 3] = ["train", "val", "test"];
pub const VOCAB_FILE: &str = "vocab.json";
pub const NORM_FILE: &str = "norm_stats.json";

pub fn questions_path(root: &Path, split: &str) -> PathBuf {
    root.join("questions").join(format!("{split}.jsonl"))
}

pub fn features_dir(root: &Path, split: &str) -> PathBuf {
    root.join("features").join(split)
}

pub fn feature_path(root: &Path, split: &str, scene_id: &str) -> PathBuf {
    features_dir(root, split).join(format!("{scene_id}.aqaf"))
}

pub fn scenes_dir(root: &Path, split: &str) -> PathBuf {
    root.join("scenes").join(split)
}

pub fn norm_path(root: &Path) -> PathBuf {
    root.join("features").join(NORM_FILE)
}

/// Modality ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    BlankAudio,
    UnknownQuestions,
}

/// Replaces every value with 1 and marks every frame valid, so all scenes
/// become the same input.
pub fn blank_spectrogram(spec: &mut Spectrogram) {
    spec.data.iter_mut().for_each(|v| *v = 1.0);
    spec.valid_frames = spec.n_frames;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub scene: usize,
    pub tokens: Vec<usize>,
    pub label: usize,
    pub question_type: QuestionType,
    pub temporal: bool,
    pub question_id: String,
}

/// Normalized spectrograms plus the encoded questions that refer to them.
#[derive(Clone, Debug)]
pub struct SplitData {
    pub name: String,
    pub scenes: Vec<Spectrogram>,
    pub examples: Vec<Example>,
}

/// Under [`Ablation::UnknownQuestions`] every question becomes a single
/// `<unk>`, so not even its length survives.
fn encode(vocab: &Vocabulary, text: &str, ablation: Ablation) -> Vec<usize> {
    match ablation {
        Ablation::UnknownQuestions => vec![vocab.unk_id()],
        _ => vocab.encode(text),
    }
}

impl SplitData {
    /// Pairs records with raw (unnormalized) spectrograms keyed by scene id.
    pub fn from_parts(
        name: &str,
        raw: Vec<Spectrogram>,
        records: &[QaRecord],
        vocab: &Vocabulary,
        stats: &NormStats,
        ablation: Ablation,
    ) -> Result<Self> {
        let labels = label_set();
        let mut scenes = Vec::with_capacity(raw.len());
        for mut s in raw {
            if ablation == Ablation::BlankAudio {
                blank_spectrogram(&mut s);
            }
            scenes.push(normalize(&s, stats)?);
        }
        if let Some(first) = scenes.first() {
            if let Some(bad) = scenes.iter().find(|s| (s.n_mels, s.n_frames) != (first.n_mels, first.n_frames)) {
                return Err(ModelError::Data(format!(
                    "scene {} is {}x{}, expected {}x{}",
                    bad.scene_id, bad.n_mels, bad.n_frames, first.n_mels, first.n_frames
                )));
            }
        }
        let index: std::collections::HashMap<&str, usize> =
            scenes.iter().enumerate().map(|(i, s)| (s.scene_id.as_str(), i)).collect();
        let mut examples = Vec::with_capacity(records.len());
        for r in records {
            let scene = *index
                .get(r.scene_id.as_str())
                .ok_or_else(|| ModelError::Data(format!("{}: no features for scene {}", r.question_id, r.scene_id)))?;
            let label = labels.iter().position(|l| *l == r.answer).ok_or_else(|| {
                ModelError::Data(format!("{}: answer {:?} not in the label set", r.question_id, r.answer))
            })?;
            let tokens = encode(vocab, &r.text, ablation);
            if tokens.is_empty() {
                return Err(ModelError::EmptyQuestion);
            }
            examples.push(Example {
                scene,
                tokens,
                label,
                question_type: r.question_type,
                temporal: r.has_temporal_relation,
                question_id: r.question_id.clone(),
            });
        }
        Ok(Self { name: name.to_string(), scenes, examples })
    }

    /// Loads one split from a dataset directory.
    pub fn load(root: &Path, split: &str, vocab: &Vocabulary, stats: &NormStats, ablation: Ablation) -> Result<Self> {
        let (header, records) = read_qa_jsonl(&questions_path(root, split))?;
        check_labels(&header.labels)?;
        let mut ids: Vec<&str> = records.iter().map(|r| r.scene_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        let raw = ids
            .iter()
            .map(|id| read_features(&feature_path(root, split, id)).map_err(ModelError::from))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(split, raw, &records, vocab, stats, ablation)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Assembles the examples at `indices` into one batch.
    pub fn batch<T: Real>(&self, indices: &[usize], pad_id: usize) -> Result<Batch<T>> {
        let first =
            self.scenes.first().ok_or_else(|| ModelError::Data(format!("split {} has no scenes", self.name)))?;
        let (mels, frames) = (first.n_mels, first.n_frames);
        let seq_len = indices.iter().map(|&i| self.examples[i].tokens.len()).max().unwrap_or(0);
        let mut spec = Vec::with_capacity(indices.len() * mels * frames);
        let mut tokens = Vec::with_capacity(indices.len() * seq_len);
        let mut lengths = Vec::with_capacity(indices.len());
        let mut valid_frames = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = &self.examples[i];
            let s = &self.scenes[ex.scene];
            spec.extend(s.data.iter().map(|&v| T::from_f64_lossy(v as f64)));
            valid_frames.push(s.valid_frames);
            tokens.extend(&ex.tokens);
            tokens.extend(std::iter::repeat_n(pad_id, seq_len - ex.tokens.len()));
            lengths.push(ex.tokens.len());
        }
        let spec = Tensor::from_vec(&[indices.len(), 1, mels, frames], spec)?;
        Ok(Batch { spec, valid_frames, tokens, lengths, seq_len })
    }
}

/// The label order of a data file must be the model's output order.
pub fn check_labels(labels: &[String]) -> Result<()> {
    if labels != label_set() {
        return Err(ModelError::Incompatible(format!(
            "label order of {} entries differs from the built-in {}-label set",
            labels.len(),
            label_set().len()
        )));
    }
    Ok(())
}

pub fn read_vocab(root: &Path) -> Result<Vocabulary> {
    Ok(serde_json::from_slice(&std::fs::read(root.join(VOCAB_FILE))?)?)
}

pub fn read_norm(root: &Path) -> Result<NormStats> {
    Ok(serde_json::from_slice(&std::fs::read(norm_path(root))?)?)
}
