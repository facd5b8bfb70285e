use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{instantiate, QaRecord, QuestionError, QuestionType, Template};
use crate::scenegen::SceneSpec;
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    pub per_scene: usize,
    /// Accepted candidates gathered per scene before subsampling.
    pub pool_size: usize,
    pub attempts_per_template: usize,
    /// Cap on each (type, answer) pair as a multiple of its uniform share.
    pub cap_multiplier: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { per_scene: 4, pool_size: 16, attempts_per_template: 8, cap_multiplier: 3.0 }
    }
}

/// Accepted instantiations with distinct templates, in random template order.
pub fn candidate_pool(
    scene: &SceneSpec,
    templates: &[Template],
    config: &GenerationConfig,
    rng: &mut impl Rng,
) -> Vec<QaRecord> {
    let mut order: Vec<usize> = (0..templates.len()).collect();
    order.shuffle(rng);
    let mut pool = Vec::new();
    for i in order {
        if pool.len() >= config.pool_size {
            break;
        }
        for _ in 0..config.attempts_per_template {
            if let Ok(r) = instantiate(&templates[i], scene, rng) {
                pool.push(r);
                break;
            }
        }
    }
    pool
}

/// Run-level answer counters.
#[derive(Clone, Debug)]
pub struct Balancer {
    multiplier: f64,
    expected_total: usize,
    type_counts: BTreeMap<QuestionType, usize>,
    pair_counts: HashMap<(QuestionType, String), usize>,
    overflow: usize,
}

impl Balancer {
    pub fn new(expected_total: usize, multiplier: f64) -> Self {
        Self { multiplier, expected_total, type_counts: BTreeMap::new(), pair_counts: HashMap::new(), overflow: 0 }
    }

    /// Largest count allowed for any single answer of type `t`.
    pub fn cap(&self, t: QuestionType) -> usize {
        let share = self.expected_total as f64 / (QuestionType::ALL.len() * t.answers().len()) as f64;
        ((self.multiplier * share).ceil() as usize).max(1)
    }

    pub fn count(&self, t: QuestionType, answer: &str) -> usize {
        self.pair_counts.get(&(t, answer.to_string())).copied().unwrap_or(0)
    }

    fn over_cap(&self, r: &QaRecord) -> bool {
        self.count(r.question_type, &r.answer) >= self.cap(r.question_type)
    }

    fn record(&mut self, r: &QaRecord) {
        if self.over_cap(r) {
            self.overflow += 1;
        }
        *self.type_counts.entry(r.question_type).or_default() += 1;
        *self.pair_counts.entry((r.question_type, r.answer.clone())).or_default() += 1;
    }

    /// Picks that had to exceed a cap because the pool offered nothing else.
    pub fn overflow(&self) -> usize {
        self.overflow
    }

    /// Greedy choice of `k` records: under-cap first, then the rarest type,
    /// then the rarest answer within that type.
    pub fn pick(&mut self, mut pool: Vec<QaRecord>, k: usize, rng: &mut impl Rng) -> Vec<QaRecord> {
        pool.shuffle(rng);
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k && !pool.is_empty() {
            let best = (0..pool.len())
                .min_by_key(|&i| {
                    let r = &pool[i];
                    (
                        self.over_cap(r),
                        self.type_counts.get(&r.question_type).copied().unwrap_or(0),
                        self.count(r.question_type, &r.answer),
                    )
                })
                .unwrap();
            let r = pool.swap_remove(best);
            self.record(&r);
            chosen.push(r);
        }
        chosen
    }
}

fn number(scene_id: &str, records: &mut [QaRecord]) {
    for (k, r) in records.iter_mut().enumerate() {
        r.question_id = format!("{scene_id}_q{k}");
    }
}

/// `per_scene` questions from distinct templates for one scene.
pub fn generate_questions(
    scene: &SceneSpec,
    templates: &[Template],
    per_scene: usize,
    rng: &mut impl Rng,
) -> Result<Vec<QaRecord>, QuestionError> {
    let config = GenerationConfig { per_scene, pool_size: (4 * per_scene).max(per_scene), ..Default::default() };
    let pool = candidate_pool(scene, templates, &config, rng);
    if pool.len() < per_scene {
        return Err(QuestionError::Exhausted {
            scene_id: scene.scene_id.clone(),
            accepted: pool.len(),
            wanted: per_scene,
        });
    }
    let mut balancer = Balancer::new(per_scene, config.cap_multiplier);
    let mut out = balancer.pick(pool, per_scene, rng);
    number(&scene.scene_id, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<QaRecord>,
    /// Scenes that could not supply enough questions.
    pub exhausted: Vec<String>,
    pub overflow: usize,
}

/// Two-pass generation over many scenes: candidate pools are built in
/// parallel, one RNG stream per scene, then subsampled in scene order under
/// shared answer caps.
pub fn generate_run(
    scenes: &[SceneSpec],
    templates: &[Template],
    config: &GenerationConfig,
    master_seed: u64,
) -> RunOutput {
    let pools: Vec<Vec<QaRecord>> = scenes
        .par_iter()
        .map(|s| candidate_pool(s, templates, config, &mut rng_for(master_seed, &s.scene_id, 0)))
        .collect();
    let mut balancer = Balancer::new(scenes.len() * config.per_scene, config.cap_multiplier);
    let mut out = RunOutput::default();
    for (scene, pool) in scenes.iter().zip(pools) {
        if pool.len() < config.per_scene {
            out.exhausted.push(scene.scene_id.clone());
            continue;
        }
        let mut rng = rng_for(master_seed, &scene.scene_id, 1);
        let mut picked = balancer.pick(pool, config.per_scene, &mut rng);
        number(&scene.scene_id, &mut picked);
        out.records.extend(picked);
    }
    out.overflow = balancer.overflow();
    out
}
