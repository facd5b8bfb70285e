//! Scene, question and feature generation shared by the pipeline commands.

use std::fs;
use std::path::Path;

use aqa_core::audio::read_wav;
use aqa_core::features::{
    fit_norm, melspec, pad_to, resize_bilinear, write_features, MelConfig, NormStats, Spectrogram, TARGET_FRAMES,
};
use aqa_core::questengine::{generate_run, write_qa_jsonl, GenerationConfig, QaHeader, QaRecord, Template, Vocabulary};
use aqa_core::scenegen::{
    compose_scene, read_index, read_spec, render_scene, write_index, write_scene, SceneConfig, SceneIndex, SceneSpec,
};
use aqa_core::seed::derive_seed;
use aqa_core::soundbank::{build_bank, Bank, Split};
use aqa_model::data::{feature_path, features_dir, norm_path, questions_path, scenes_dir, VOCAB_FILE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{data, CliError, Result};

/// Scenes are rendered and featurized in chunks of this many to bound memory.
const CHUNK: usize = 256;
const COMPOSE_ATTEMPTS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Pad,
    Resize,
}

impl FeatureMode {
    pub fn apply(self, spec: &Spectrogram) -> Result<Spectrogram> {
        match self {
            FeatureMode::Pad => pad_to(spec, TARGET_FRAMES).map_err(data),
            FeatureMode::Resize => resize_bilinear(spec, TARGET_FRAMES).map_err(data),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetPreset {
    /// 200 scenes, 800 questions.
    Micro,
    /// 2,000 scenes, 8,000 questions.
    Small,
    /// 50,000 scenes, 200,000 questions.
    Paper,
}

impl DatasetPreset {
    pub fn total_scenes(self) -> usize {
        match self {
            DatasetPreset::Micro => 200,
            DatasetPreset::Small => 2_000,
            DatasetPreset::Paper => 50_000,
        }
    }

    /// 70/15/15 split of the scenes.
    pub fn split_sizes(self) -> [(&'static str, usize); 3] {
        let n = self.total_scenes();
        let val = n * 15 / 100;
        let test = n * 15 / 100;
        [("train", n - val - test), ("val", val), ("test", test)]
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetPreset::Micro => "micro",
            DatasetPreset::Small => "small",
            DatasetPreset::Paper => "paper",
        }
    }
}

pub const QUESTIONS_PER_SCENE: usize = 4;

/// Composes a scene, redrawing on the rare composition failure.
pub fn compose(bank: &Bank, seed: u64, split: &str, index: usize, config: &SceneConfig) -> Result<SceneSpec> {
    let id = format!("{split}_{index:06}");
    let mut last = None;
    for attempt in 0..COMPOSE_ATTEMPTS {
        let s = derive_seed(seed, &format!("scene_{split}_{attempt}"), index as u64);
        match compose_scene(bank, s, &id, config) {
            Ok(spec) => return Ok(spec),
            Err(e) => last = Some(e),
        }
    }
    Err(data(format!("scene {id}: {}", last.map(|e| e.to_string()).unwrap_or_default())))
}

/// Running merge of per-chunk normalization statistics.
#[derive(Default)]
pub struct NormAccumulator {
    parts: Vec<(f64, f64, f64)>,
}

impl NormAccumulator {
    pub fn add(&mut self, specs: &[Spectrogram]) -> Result<()> {
        let n: usize = specs.iter().map(|s| s.n_mels * s.valid_frames).sum();
        if n == 0 {
            return Ok(());
        }
        let st = fit_norm(specs, "train").map_err(data)?;
        self.parts.push((n as f64, st.mean, st.std));
        Ok(())
    }

    pub fn finish(&self) -> Result<NormStats> {
        let total: f64 = self.parts.iter().map(|p| p.0).sum();
        if total == 0.0 {
            return Err(CliError::Data("no training frames to fit normalization".into()));
        }
        let mean = self.parts.iter().map(|(n, m, _)| n * m).sum::<f64>() / total;
        let var = self.parts.iter().map(|(n, m, s)| n * (s * s + (m - mean) * (m - mean))).sum::<f64>() / total;
        Ok(NormStats { mean, std: var.sqrt(), split: "train".into() })
    }
}

/// Composes, renders and writes `count` scenes, optionally featurizing each.
/// Returns the specs in index order.
pub fn generate_scenes(
    bank: &Bank,
    split: &str,
    count: usize,
    seed: u64,
    scenes_out: &Path,
    features: Option<(&Path, &MelConfig, FeatureMode)>,
    mut norm: Option<&mut NormAccumulator>,
) -> Result<Vec<SceneSpec>> {
    let config = SceneConfig::default();
    fs::create_dir_all(scenes_out)?;
    if let Some((dir, _, _)) = features {
        fs::create_dir_all(dir)?;
    }
    let mut specs = Vec::with_capacity(count);
    let mut index = SceneIndex { split: split.to_string(), scenes: Vec::with_capacity(count) };
    for start in (0..count).step_by(CHUNK) {
        let end = (start + CHUNK).min(count);
        let done: Vec<(SceneSpec, _, Option<Spectrogram>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let spec = compose(bank, seed, split, i, &config)?;
                let audio = render_scene(&spec, bank).map_err(data)?;
                let entry = write_scene(scenes_out, &spec, &audio).map_err(data)?;
                let feat = match features {
                    Some((dir, mel, mode)) => {
                        let f = featurize(&audio, &spec.scene_id, mel, mode)?;
                        write_features(&dir.join(format!("{}.aqaf", spec.scene_id)), &f).map_err(data)?;
                        Some(f)
                    }
                    None => None,
                };
                Ok((spec, entry, feat))
            })
            .collect::<Result<_>>()?;
        let mut chunk_feats = Vec::new();
        for (spec, entry, feat) in done {
            specs.push(spec);
            index.scenes.push(entry);
            chunk_feats.extend(feat);
        }
        if let Some(acc) = norm.as_deref_mut() {
            acc.add(&chunk_feats)?;
        }
    }
    write_index(scenes_out, &index).map_err(data)?;
    Ok(specs)
}

pub fn featurize(audio: &[f32], scene_id: &str, mel: &MelConfig, mode: FeatureMode) -> Result<Spectrogram> {
    let raw = melspec(audio, mel).map_err(data)?;
    let mut f = mode.apply(&raw)?;
    f.scene_id = scene_id.to_string();
    Ok(f)
}

/// Featurizes every scene listed in `scenes_dir/index.json`.
pub fn extract_features(
    scenes: &Path,
    out: &Path,
    mel: &MelConfig,
    mode: FeatureMode,
    mut norm: Option<&mut NormAccumulator>,
) -> Result<Vec<String>> {
    let index = read_index(scenes).map_err(data)?;
    fs::create_dir_all(out)?;
    let mut ids = Vec::new();
    for chunk in index.scenes.chunks(CHUNK) {
        let feats: Vec<Spectrogram> = chunk
            .par_iter()
            .map(|e| {
                let audio = read_wav(&scenes.join(&e.audio_path)).map_err(data)?;
                if audio.sample_rate != mel.sample_rate {
                    return Err(CliError::Data(format!(
                        "{}: sample rate {} but the feature preset expects {}",
                        e.audio_path, audio.sample_rate, mel.sample_rate
                    )));
                }
                let f = featurize(&audio.samples, &e.scene_id, mel, mode)?;
                write_features(&out.join(format!("{}.aqaf", e.scene_id)), &f).map_err(data)?;
                Ok(f)
            })
            .collect::<Result<_>>()?;
        if let Some(acc) = norm.as_deref_mut() {
            acc.add(&feats)?;
        }
        ids.extend(feats.into_iter().map(|f| f.scene_id));
    }
    Ok(ids)
}

/// Loads every scene spec listed in an index.
pub fn load_specs(scenes: &Path) -> Result<Vec<SceneSpec>> {
    let index = read_index(scenes).map_err(data)?;
    index.scenes.iter().map(|e| read_spec(&scenes.join(&e.spec_path)).map_err(data)).collect()
}

/// Generates and writes questions for one split.
pub fn generate_split_questions(
    specs: &[SceneSpec],
    templates: &[Template],
    per_scene: usize,
    seed: u64,
    split: &str,
    out: &Path,
) -> Result<Vec<QaRecord>> {
    let config = GenerationConfig { per_scene, pool_size: (4 * per_scene).max(16), ..GenerationConfig::default() };
    let run = generate_run(specs, templates, &config, seed);
    if !run.exhausted.is_empty() {
        return Err(CliError::Data(format!(
            "{} scene(s) could not supply {per_scene} questions, first {}",
            run.exhausted.len(),
            run.exhausted[0]
        )));
    }
    write_qa_jsonl(out, &QaHeader::new(split), &run.records).map_err(data)?;
    Ok(run.records)
}

/// One-shot build: banks, scenes, questions, vocabulary and features for all
/// three splits under `out`. Validation scenes draw from the training bank,
/// test scenes from the held-out bank.
pub fn build_dataset(out: &Path, preset: DatasetPreset, seed: u64, templates: &[Template]) -> Result<()> {
    let mel = MelConfig::long_stride();
    let train_bank = build_bank(Split::Train, seed).map_err(data)?;
    let test_bank = build_bank(Split::Test, seed).map_err(data)?;
    train_bank.write(&out.join("banks").join("train")).map_err(data)?;
    test_bank.write(&out.join("banks").join("test")).map_err(data)?;

    let mut norm = NormAccumulator::default();
    let mut train_records = Vec::new();
    for (split, count) in preset.split_sizes() {
        let bank = if split == "test" { &test_bank } else { &train_bank };
        let feats = features_dir(out, split);
        let acc = (split == "train").then_some(&mut norm);
        let specs = generate_scenes(
            bank,
            split,
            count,
            seed,
            &scenes_dir(out, split),
            Some((&feats, &mel, FeatureMode::Pad)),
            acc,
        )?;
        let q_seed = derive_seed(seed, &format!("questions_{split}"), 0);
        let records = generate_split_questions(
            &specs,
            templates,
            QUESTIONS_PER_SCENE,
            q_seed,
            split,
            &questions_path(out, split),
        )?;
        if split == "train" {
            train_records = records;
        }
        debug_assert!(specs.iter().all(|s| feature_path(out, split, &s.scene_id).exists()));
    }
    let stats = norm.finish()?;
    fs::write(norm_path(out), serde_json::to_vec_pretty(&stats)?)?;
    let vocab = Vocabulary::from_records(&train_records);
    fs::write(out.join(VOCAB_FILE), serde_json::to_vec_pretty(&vocab)?)?;
    Ok(())
}
