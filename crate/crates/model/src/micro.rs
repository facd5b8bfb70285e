//! A 64-record crossed dataset for overfitting checks.
//!
//! Eight scenes each receive the same eight questions. The scenes and
//! questions are picked so that neither modality alone predicts many answers:
//! a model that sees only the question can do no better than the
//! per-question majority answer (the question ceiling), and one that sees
//! only the audio no better than the per-scene majority (the scene ceiling).

use std::collections::{BTreeMap, BTreeSet};

use aqa_core::features::{fit_norm, melspec, pad_to, MelConfig, NormStats, Spectrogram, TARGET_FRAMES};
use aqa_core::questengine::{builtin_templates, execute, instantiate, QaRecord, Vocabulary};
use aqa_core::scenegen::{compose_scene, render_scene, SceneConfig, SceneSpec};
use aqa_core::seed::{derive_seed, rng_for};
use aqa_core::soundbank::{build_bank, Split};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{Ablation, SplitData};
use crate::error::{ModelError, Result};
use crate::train::TrainConfig;

pub const MICRO_SCENES: usize = 8;
pub const MICRO_QUESTIONS: usize = 8;
const CANDIDATE_SCENES: usize = 32;
const PROBE_SCENES: usize = 12;
const SEARCH_STEPS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ceilings {
    /// Best accuracy from the question alone.
    pub question_only: f64,
    /// Best accuracy from the scene alone.
    pub scene_only: f64,
    /// Share of the most common answer.
    pub majority: f64,
}

#[derive(Clone, Debug)]
pub struct MicroDataset {
    pub specs: Vec<SceneSpec>,
    /// Raw log-mel features padded to the standard width.
    pub features: Vec<Spectrogram>,
    pub records: Vec<QaRecord>,
    pub vocab: Vocabulary,
    pub stats: NormStats,
    pub ceilings: Ceilings,
}

impl MicroDataset {
    pub fn split(&self, ablation: Ablation) -> Result<SplitData> {
        SplitData::from_parts("micro", self.features.clone(), &self.records, &self.vocab, &self.stats, ablation)
    }
}

/// Ceilings of an answer table indexed `[scene][question]`.
pub fn ceilings(answers: &[Vec<String>]) -> Ceilings {
    let total: usize = answers.iter().map(Vec::len).sum();
    let majority_of = |items: &mut dyn Iterator<Item = &String>| {
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        for a in items {
            *counts.entry(a).or_default() += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    };
    let n_q = answers.first().map_or(0, Vec::len);
    let q: usize = (0..n_q).map(|j| majority_of(&mut answers.iter().map(|row| &row[j]))).sum();
    let s: usize = answers.iter().map(|row| majority_of(&mut row.iter())).sum();
    let m = majority_of(&mut answers.iter().flatten());
    let frac = |x: usize| x as f64 / total.max(1) as f64;
    Ceilings { question_only: frac(q), scene_only: frac(s), majority: frac(m) }
}

fn score(table: &[Vec<Option<String>>], scenes: &[usize], questions: &[usize]) -> f64 {
    let answers: Vec<Vec<String>> =
        scenes.iter().map(|&s| questions.iter().map(|&q| table[q][s].clone().unwrap_or_default()).collect()).collect();
    let c = ceilings(&answers);
    c.question_only.max(c.scene_only) + 0.25 * c.majority
}

/// Builds the dataset from the training bank. Everything derives from `seed`.
pub fn build_micro(seed: u64) -> Result<MicroDataset> {
    let data_err = |e: &dyn std::fmt::Display| ModelError::Data(e.to_string());
    let bank = build_bank(Split::Train, seed).map_err(|e| data_err(&e))?;
    let scene_cfg = SceneConfig::default();
    let candidates = (0..CANDIDATE_SCENES)
        .map(|i| compose_scene(&bank, derive_seed(seed, "micro_scene", i as u64), &format!("micro_{i:02}"), &scene_cfg))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| data_err(&e))?;

    // Questions that have a well-defined answer on every candidate scene.
    let templates = builtin_templates();
    let mut rng = rng_for(seed, "micro_questions", 0);
    let mut questions: Vec<QaRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    for scene in candidates.iter().take(PROBE_SCENES) {
        for t in &templates {
            for _ in 0..4 {
                let Ok(r) = instantiate(t, scene, &mut rng) else { continue };
                if seen.contains(&r.text) {
                    continue;
                }
                if candidates.iter().all(|s| execute(&r.program, s).is_ok()) {
                    seen.insert(r.text.clone());
                    questions.push(r);
                }
            }
        }
    }
    if questions.len() < MICRO_QUESTIONS {
        return Err(ModelError::Data(format!("only {} scene-independent questions found", questions.len())));
    }
    let table: Vec<Vec<Option<String>>> =
        questions.iter().map(|q| candidates.iter().map(|s| execute(&q.program, s).ok()).collect()).collect();

    // Local search over (scene set, question set).
    let mut rng = rng_for(seed, "micro_search", 0);
    let mut s_ids: Vec<usize> = (0..candidates.len()).collect();
    s_ids.shuffle(&mut rng);
    s_ids.truncate(MICRO_SCENES);
    let mut q_ids: Vec<usize> = (0..questions.len()).collect();
    q_ids.shuffle(&mut rng);
    q_ids.truncate(MICRO_QUESTIONS);
    let mut best = score(&table, &s_ids, &q_ids);
    for _ in 0..SEARCH_STEPS {
        let (mut s_try, mut q_try) = (s_ids.clone(), q_ids.clone());
        if rng.random_bool(0.5) {
            let outside: Vec<usize> = (0..candidates.len()).filter(|i| !s_try.contains(i)).collect();
            let slot = rng.random_range(0..s_try.len());
            s_try[slot] = *outside.choose(&mut rng).unwrap();
        } else {
            let outside: Vec<usize> = (0..questions.len()).filter(|i| !q_try.contains(i)).collect();
            let Some(&pick) = outside.choose(&mut rng) else { continue };
            let slot = rng.random_range(0..q_try.len());
            q_try[slot] = pick;
        }
        let sc = score(&table, &s_try, &q_try);
        if sc <= best {
            best = sc;
            s_ids = s_try;
            q_ids = q_try;
        }
    }
    s_ids.sort_unstable();
    q_ids.sort_unstable();

    let mel = MelConfig::long_stride();
    let mut specs = Vec::new();
    let mut features = Vec::new();
    let mut records = Vec::new();
    let mut answers = Vec::new();
    for &si in &s_ids {
        let spec = candidates[si].clone();
        let audio = render_scene(&spec, &bank).map_err(|e| data_err(&e))?;
        let mut f = pad_to(&melspec(&audio, &mel)?, TARGET_FRAMES)?;
        f.scene_id = spec.scene_id.clone();
        let mut row = Vec::new();
        for (j, &qi) in q_ids.iter().enumerate() {
            let q = &questions[qi];
            let answer = table[qi][si].clone().expect("filtered to answerable questions");
            row.push(answer.clone());
            records.push(QaRecord {
                question_id: format!("{}_q{j}", spec.scene_id),
                scene_id: spec.scene_id.clone(),
                answer,
                ..q.clone()
            });
        }
        answers.push(row);
        features.push(f);
        specs.push(spec);
    }
    let stats = fit_norm(&features, "micro")?;
    let vocab = Vocabulary::from_records(&records);
    Ok(MicroDataset { specs, features, records, vocab, stats, ceilings: ceilings(&answers) })
}

/// The scaled-down model sized for the dataset's vocabulary.
pub fn micro_model_config(data: &MicroDataset) -> ModelConfig {
    ModelConfig { vocab_size: data.vocab.len(), ..ModelConfig::micro() }
}

/// Training settings for overfitting: batch 16, up to 300 epochs, with the
/// training set doubling as the selection split.
pub fn micro_train_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 300,
        early_stop_patience: 30,
        plateau_patience: 10,
        target_accuracy: Some(0.95),
        ..TrainConfig::desk()
    }
}
