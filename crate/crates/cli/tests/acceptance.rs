//! Acceptance run: every criterion is timed against its budget and reported
//! as one PASS/FAIL line. The lines go straight to stdout, so they show up
//! even when the harness captures test output.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aqa_autodiff::suite::run_op_suite;
use aqa_autodiff::{Real, Tensor};
use aqa_cli::dataset::compose;
use aqa_cli::manifest::walk;
use aqa_core::attributes::{ordinal, Brightness, GlobalPosition, Instrument, Loudness, Note};
use aqa_core::dsp::lufs_integrated;
use aqa_core::features::{melspec, MelConfig, TARGET_FRAMES};
use aqa_core::questengine::{
    builtin_templates, execute, execute_naive, generate_run, label_set, resolve, Bindings, GenerationConfig,
    QuestionType, Template,
};
use aqa_core::scenegen::{SceneConfig, SceneSpec, MAX_SCENE_S, MAX_SCENE_SAMPLES};
use aqa_core::seed::rng_for;
use aqa_core::soundbank::{build_bank, Bank, Split};
use aqa_model::config::coordmap_placements;
use aqa_model::coordmap::{make_coord_maps, Axis};
use aqa_model::micro::{build_micro, micro_model_config, micro_train_config};
use aqa_model::network::Modulation;
use aqa_model::{Ablation, Batch, CoordKind, ExtractorKind, Graph, ModelConfig, Naaqa, TrainConfig};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Criteria that cannot hold as stated, with the reason printed beside them.
const KNOWN_UNATTAINABLE: &[(usize, &str)] = &[(
    2,
    "the per-type answer sets sum to 12+6+2+2+15+3+16+2 = 58 labels, so a label set with that \
     partition cannot also have exactly 57 entries",
)];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn shape_law() -> Outcome {
    let cfg = MelConfig::long_stride();
    let mut rng = rng_for(1, "shape_law", 0);
    let audio: Vec<f32> = (0..MAX_SCENE_SAMPLES).map(|_| rng.random_range(-0.5..0.5)).collect();
    let spec = melspec(&audio, &cfg).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} samples at {} Hz, window {} hop {} -> {} frames x {} mels",
        audio.len(),
        cfg.sample_rate,
        cfg.window,
        cfg.hop,
        spec.valid_frames,
        spec.n_mels
    );
    check(
        MAX_SCENE_SAMPLES as f64 == MAX_SCENE_S * 48_000.0
            && cfg.window == 512
            && cfg.hop == 2048
            && spec.valid_frames == 418
            && spec.n_frames == TARGET_FRAMES
            && spec.n_mels == 64,
        detail,
    )
}

fn compose_many(bank: &Bank, split: &str, n: usize, seed: u64) -> Result<Vec<SceneSpec>, String> {
    let config = SceneConfig::default();
    (0..n).map(|i| compose(bank, seed, split, i, &config).map_err(|e| e.to_string())).collect()
}

fn answer_space() -> Outcome {
    let labels = label_set();
    let sizes: Vec<usize> = [
        QuestionType::Note,
        QuestionType::Instrument,
        QuestionType::Brightness,
        QuestionType::Loudness,
        QuestionType::AbsolutePosition,
        QuestionType::GlobalPosition,
        QuestionType::Count,
        QuestionType::Exist,
    ]
    .iter()
    .map(|t| t.answers().len())
    .collect();
    let shared = QuestionType::AbsolutePosition.answers() == QuestionType::RelativePosition.answers()
        && QuestionType::Count.answers() == QuestionType::CountInstruments.answers()
        && QuestionType::Exist.answers() == QuestionType::CountComparison.answers();
    let union: BTreeSet<String> = QuestionType::ALL.iter().flat_map(|t| t.answers()).collect();
    let partition_ok = sizes == [12, 6, 2, 2, 15, 3, 16, 2] && shared && union.len() == labels.len();

    let bank = build_bank(Split::Train, 21).map_err(|e| e.to_string())?;
    let scenes = compose_many(&bank, "uniform", 7_600, 21)?;
    let run = generate_run(&scenes, &builtin_templates(), &GenerationConfig::default(), 21);
    let mut rng = rng_for(21, "uniform_guess", 0);
    let hits = run.records.iter().filter(|r| labels.choose(&mut rng).unwrap() == &r.answer).count();
    let n = run.records.len();
    let acc = 100.0 * hits as f64 / n as f64;
    let target = 100.0 / 57.0;
    let detail = format!(
        "{} labels (partition {sizes:?}, shared sets {shared}); uniform guessing {acc:.3}% over {n} questions vs {target:.3}%",
        labels.len()
    );
    check(labels.len() == 57 && partition_ok && n >= 30_000 && (acc - target).abs() <= 0.3, detail)
}

fn uniform_bindings(t: &Template, rng: &mut impl Rng) -> Bindings {
    t.placeholders()
        .into_iter()
        .map(|p| {
            let stem = p.trim_start_matches('<').trim_end_matches('>').trim_end_matches(|c: char| c.is_ascii_digit());
            let v = match stem {
                "I" => Instrument::ALL.choose(rng).unwrap().to_string(),
                "N" => Note::ALL.choose(rng).unwrap().to_string(),
                "B" => Brightness::ALL.choose(rng).unwrap().to_string(),
                "L" => Loudness::ALL.choose(rng).unwrap().to_string(),
                "GP" => GlobalPosition::ALL.choose(rng).unwrap().to_string(),
                "O" => ordinal(rng.random_range(1..=6)).unwrap().to_string(),
                _ => ["before", "after"].choose(rng).unwrap().to_string(),
            };
            (p, v)
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let bank = build_bank(Split::Train, 3).map_err(|e| e.to_string())?;
    let scenes = compose_many(&bank, "oracle", 1_000, 3)?;
    let templates = builtin_templates();
    let mut rng = rng_for(3, "oracle_pairs", 0);
    let (mut agree, mut ill) = (0, 0);
    for s in &scenes {
        let t = templates.choose(&mut rng).unwrap();
        let (_, program) = resolve(t, &uniform_bindings(t, &mut rng)).map_err(|e| e.to_string())?;
        let a = execute(&program, s);
        if a == execute_naive(&program, s) {
            agree += 1;
        }
        ill += a.is_err() as usize;
    }
    check(agree == 1_000 && ill > 0, format!("{agree}/1000 pairs agree, {ill} of them ill-posed"))
}

fn gradient_suite() -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    for seed in aqa_model::train::DEFAULT_SEEDS {
        for (op, report) in run_op_suite(seed).map_err(|e| e.to_string())? {
            checks += 1;
            if report.worst() > worst.0 {
                worst = (report.worst(), format!("{op} seed {seed}"));
            }
        }
    }
    check(
        worst.0 < 1e-4,
        format!("{checks} op checks over 5 seeds, worst relative error {:.2e} ({})", worst.0, worst.1),
    )
}

fn random_batch<T: Real>(seed: u64, b: usize, frames: usize, vocab: usize) -> Batch<T> {
    let mut rng = rng_for(seed, "batch", 0);
    let spec: Vec<T> = (0..b * 64 * frames).map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0))).collect();
    let lengths: Vec<usize> = (0..b).map(|_| rng.random_range(3..=12)).collect();
    let seq_len = *lengths.iter().max().unwrap();
    let mut tokens = Vec::new();
    for &l in &lengths {
        tokens.extend((0..l).map(|_| rng.random_range(2..vocab)));
        tokens.extend(std::iter::repeat_n(0, seq_len - l));
    }
    Batch {
        spec: Tensor::from_vec(&[b, 1, 64, frames], spec).unwrap(),
        valid_frames: vec![frames; b],
        tokens,
        lengths,
        seq_len,
    }
}

fn logits<T: Real>(model: &Naaqa<T>, g: &mut Graph<T>, b: &Batch<T>) -> Result<Vec<f64>, String> {
    let out = model.forward(g, b).map_err(|e| e.to_string())?;
    Ok(g.tape.value(out).data().iter().map(|v| v.as_f64()).collect())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn neutrality() -> Outcome {
    let cfg = ModelConfig::optimized(ExtractorKind::Parallel);
    let input = random_batch::<f64>(5, 2, TARGET_FRAMES, cfg.vocab_size);
    let plain = Naaqa::<f64>::new(cfg.clone(), 5).map_err(|e| e.to_string())?;
    let modulated = logits(&plain, &mut Graph::eval(), &input)?;
    let bypass = logits(&plain, &mut Graph::eval().with_modulation(Modulation::Bypass), &input)?;
    let film = max_abs_diff(&modulated, &bypass);
    let with = Naaqa::<f64>::new(ModelConfig { malimo: true, ..cfg }, 5).map_err(|e| e.to_string())?;
    let malimo = max_abs_diff(&modulated, &logits(&with, &mut Graph::eval(), &input)?);
    check(film < 1e-6 && malimo < 1e-6, format!("FiLM vs unmodulated {film:.2e}, MALiMo on vs off {malimo:.2e}"))
}

fn coordinate_maps() -> Outcome {
    let mut grids = 0;
    for h in [2, 3, 5, 8, 16, 33, 64] {
        for w in [2, 3, 7, 53, 105, 209, 418] {
            let maps = make_coord_maps(h, w, CoordKind::Both).map_err(|e| e.to_string())?;
            for m in &maps {
                let constant = (0..h).all(|r| {
                    (0..w).all(|c| match m.kind {
                        Axis::Time => m.at(r, c) == m.at(0, c),
                        Axis::Freq => m.at(r, c) == m.at(r, 0),
                    })
                });
                let (first, last) = match m.kind {
                    Axis::Time => (m.at(0, 0), m.at(0, w - 1)),
                    Axis::Freq => (m.at(0, 0), m.at(h - 1, 0)),
                };
                if !constant || first != -1.0 || (last - 1.0).abs() > 1e-12 {
                    return Err(format!("{:?} map wrong at {h}x{w}", m.kind));
                }
            }
            grids += 1;
        }
    }
    let placements = coordmap_placements();
    let input = random_batch::<f32>(6, 1, TARGET_FRAMES, 91);
    for (label, sites) in &placements {
        let cfg = ModelConfig { coordmaps: *sites, ..ModelConfig::optimized(ExtractorKind::Parallel) };
        let model = Naaqa::<f32>::new(cfg, 1).map_err(|e| format!("{label}: {e}"))?;
        let out = logits(&model, &mut Graph::eval(), &input).map_err(|e| format!("{label}: {e}"))?;
        if out.len() != model.config().o {
            return Err(format!("{label}: {} logits", out.len()));
        }
    }
    check(placements.len() == 13, format!("{grids} grids checked, {} placements ran forward", placements.len()))
}

fn sine(freq: f64, amp: f64, seconds: f64) -> Vec<f32> {
    let n = (48_000.0 * seconds) as usize;
    (0..n).map(|i| (amp * (2.0 * PI * freq * i as f64 / 48_000.0).sin()) as f32).collect()
}

fn loudness() -> Outcome {
    let full = lufs_integrated(&sine(997.0, 1.0, 5.0), 48_000).map_err(|e| e.to_string())?;
    let base = sine(440.0, 0.5, 3.0);
    let l0 = lufs_integrated(&base, 48_000).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for gain_db in [-20.0, -12.0, -6.0, -1.0, 3.0, 6.0] {
        let g = 10f64.powf(gain_db / 20.0);
        let y: Vec<f32> = base.iter().map(|&v| (v as f64 * g) as f32).collect();
        let d = lufs_integrated(&y, 48_000).map_err(|e| e.to_string())? - l0;
        worst = worst.max((d - gain_db).abs());
    }
    check(
        (full + 3.01).abs() <= 0.1 && worst <= 0.05,
        format!("997 Hz full scale {full:.3} LUFS, worst gain-law error {worst:.4} LU"),
    )
}

fn count(cfg: &ModelConfig) -> Result<usize, String> {
    Ok(Naaqa::<f32>::new(cfg.clone(), 0).map_err(|e| e.to_string())?.count_parameters())
}

fn gru_count(hidden: usize, input: usize) -> usize {
    3 * hidden * input + 3 * hidden * hidden + 2 * 3 * hidden
}

fn parameter_laws() -> Outcome {
    let base = ModelConfig::optimized(ExtractorKind::Parallel);
    let n = count(&base)?;

    let model = Naaqa::<f32>::new(base.clone(), 0).map_err(|e| e.to_string())?;
    let mut durations_ok = true;
    for frames in [105, 209, 418, 600] {
        let out = logits(&model, &mut Graph::eval(), &random_batch::<f32>(2, 1, frames, base.vocab_size))?;
        durations_ok &= out.len() == base.o && model.count_parameters() == n;
    }

    let mut deltas = Vec::new();
    for kind in [
        ExtractorKind::Parallel,
        ExtractorKind::Conv2dStack,
        ExtractorKind::InterleavedTimeFirst,
        ExtractorKind::InterleavedFreqFirst,
    ] {
        let cfg = ModelConfig::optimized(kind);
        deltas.push(count(&ModelConfig { malimo: true, ..cfg.clone() })? - count(&cfg)?);
    }
    let film = 2 * base.j * base.m;
    let malimo_oracle = gru_count(base.malimo_hidden, base.feature_channels()) + film * base.malimo_hidden + film;
    let malimo_ok = deltas.iter().all(|&d| d == malimo_oracle);

    let mut monotone = true;
    for step in [1, 2] {
        let variants = [
            ModelConfig { g: base.g + step, ..base.clone() },
            ModelConfig { j: base.j + step, ..base.clone() },
            ModelConfig { m: base.m + step, ..base.clone() },
            ModelConfig { c: base.c + step, ..base.clone() },
            ModelConfig { h: base.h + step, ..base.clone() },
        ];
        for v in &variants {
            monotone &= count(v)? > n;
        }
    }

    let doubled = ModelConfig { g: 2 * base.g, ..base.clone() };
    let big = Naaqa::<f32>::new(doubled.clone(), 0).map_err(|e| e.to_string())?;
    let generator =
        |m: &Naaqa<f32>| m.parameter_breakdown().into_iter().find(|(k, _)| k == "film_generator").map(|p| p.1);
    let gen_delta = generator(&big).unwrap_or(0) - generator(&model).unwrap_or(0);
    let total_delta = big.count_parameters() - n;
    let doubling_ok = gen_delta == base.g * film
        && total_delta == gru_count(2 * base.g, base.e) - gru_count(base.g, base.e) + base.g * film;

    check(
        durations_ok && malimo_ok && monotone && doubling_ok,
        format!(
            "duration-invariant {durations_ok}; MALiMo delta {deltas:?} (expected {malimo_oracle}); monotone {monotone}; \
             G {}->{} adds {total_delta} incl. generator {gen_delta} = G*2JM",
            base.g,
            2 * base.g
        ),
    )
}

fn overfit() -> Outcome {
    let data = build_micro(7).map_err(|e| e.to_string())?;
    let cfg = micro_model_config(&data);
    let pad = data.vocab.pad_id();
    let run = |ablation: Ablation, tc: &TrainConfig| -> Result<(f64, usize), String> {
        let split = data.split(ablation).map_err(|e| e.to_string())?;
        let model = Naaqa::<f32>::new(cfg.clone(), 1).map_err(|e| e.to_string())?;
        let out = aqa_model::train(model, &split, &split, tc, 1, pad, |_| {}).map_err(|e| e.to_string())?;
        let best = out.history.iter().map(|l| l.val_acc).fold(0.0, f64::max);
        Ok((best, out.history.len()))
    };
    let full_cfg = micro_train_config();
    let (full, epochs) = run(Ablation::None, &full_cfg)?;
    // Ablations get the epoch budget the full-modality run needed.
    let capped = TrainConfig { max_epochs: epochs, target_accuracy: None, ..full_cfg };
    let (blank, _) = run(Ablation::BlankAudio, &capped)?;
    let (unknown, _) = run(Ablation::UnknownQuestions, &capped)?;
    check(
        full >= 0.95 && epochs <= 300 && full - blank >= 0.20 && full - unknown >= 0.20,
        format!(
            "{} records, full {:.1}% after {epochs} epochs; blank_audio {:.1}%, unknown_questions {:.1}% \
             (ceilings: question-only {:.1}%, scene-only {:.1}%)",
            data.records.len(),
            100.0 * full,
            100.0 * blank,
            100.0 * unknown,
            100.0 * data.ceilings.question_only,
            100.0 * data.ceilings.scene_only
        ),
    )
}

fn aqa(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aqa"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("AQA_DATA_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("aqa {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = walk(dir).map_err(|e| e.to_string())?;
    files.push(dir.join(aqa_cli::manifest::MANIFEST_FILE));
    files
        .into_iter()
        .map(|f| {
            let key = f.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            fs::read(&f).map(|b| (key, b)).map_err(|e| e.to_string())
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        aqa(&["dataset", "build", "--preset", "micro", "--seed", "4", "--out", &s(d)])?;
    }
    let (ta, tb) = (tree(&a)?, tree(&b)?);
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let kinds =
        ["wav", "aqaf", "jsonl", "json"].map(|ext| ta.keys().filter(|k| k.ends_with(&format!(".{ext}"))).count());
    let data_same = ta.len() == tb.len() && differing.is_empty();

    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/micro.json");
    let mut histories = Vec::new();
    for run in ["r1", "r2"] {
        let out = tmp.path().join(run);
        aqa(&[
            "train",
            "--config",
            &s(&config),
            "--data",
            &s(&a),
            "--seed",
            "8",
            "--out",
            &s(&out),
            "--max-epochs",
            "2",
        ])?;
        histories.push(fs::read(out.join("history.jsonl")).map_err(|e| e.to_string())?);
    }
    let traces_same = histories[0] == histories[1] && !histories[0].is_empty();
    check(
        data_same && traces_same,
        format!(
            "{} files ({} wav, {} feature, {} jsonl, {} json) identical across builds: {data_same}{}; \
             loss traces identical: {traces_same}",
            ta.len(),
            kinds[0],
            kinds[1],
            kinds[2],
            kinds[3],
            if differing.is_empty() { String::new() } else { format!(" (differ: {differing:?})") }
        ),
    )
}

fn generation_statistics() -> Outcome {
    let bank = build_bank(Split::Train, 11).map_err(|e| e.to_string())?;
    let scenes = compose_many(&bank, "stats", 500, 11)?;
    let counts: Vec<usize> = scenes.iter().map(|s| s.events.len()).collect();
    let (cmin, cmax) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
    let longest = scenes.iter().map(|s| s.total_duration_s).fold(0.0, f64::max);
    let samples_ok = scenes.iter().all(|s| s.total_samples() <= MAX_SCENE_SAMPLES);
    let durations: Vec<f64> = scenes.iter().flat_map(|s| s.events.iter().map(|e| e.duration_s)).collect();
    let (dmin, dmax) = durations.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    check(
        cmin >= 5 && cmax <= 15 && longest <= MAX_SCENE_S && samples_ok && dmin >= 0.69 && dmax <= 1.11,
        format!(
            "sounds per scene {cmin}..{cmax}, longest scene {longest:.2} s, sound durations {dmin:.3}..{dmax:.3} s"
        ),
    )
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

/// Writes past the harness's output capture.
macro_rules! report {
    ($($arg:tt)*) => {{
        let mut out = std::io::stdout().lock();
        writeln!(out, $($arg)*).unwrap();
        out.flush().unwrap();
    }};
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, name: "spectrogram shape law", budget: Duration::from_secs(1), run: shape_law },
        Criterion { id: 2, name: "answer-space law", budget: minutes(5), run: answer_space },
        Criterion { id: 3, name: "oracle equivalence", budget: minutes(2), run: oracle_equivalence },
        Criterion { id: 4, name: "gradient suite", budget: minutes(5), run: gradient_suite },
        Criterion { id: 5, name: "FiLM/MALiMo neutrality at init", budget: minutes(1), run: neutrality },
        Criterion { id: 6, name: "coordinate-map law", budget: minutes(2), run: coordinate_maps },
        Criterion { id: 7, name: "loudness conformance", budget: minutes(1), run: loudness },
        Criterion { id: 8, name: "structural parameter laws", budget: minutes(1), run: parameter_laws },
        Criterion { id: 9, name: "overfit sanity", budget: minutes(10), run: overfit },
        Criterion { id: 10, name: "end-to-end determinism", budget: minutes(10), run: determinism },
        Criterion { id: 11, name: "generation statistics", budget: minutes(5), run: generation_statistics },
    ];
    let mut failed = BTreeSet::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = format!("{:.1}s of {}s", elapsed.as_secs_f64(), c.budget.as_secs());
        let late = if in_time { "" } else { " over budget;" };
        report!("criterion {:>2} {} {} ({timing}){late} {detail}", c.id, if pass { "PASS" } else { "FAIL" }, c.name);
        if !pass {
            failed.insert(c.id);
            if let Some((_, why)) = KNOWN_UNATTAINABLE.iter().find(|(id, _)| *id == c.id) {
                report!("             known unattainable: {why}");
            }
        }
    }
    let known: BTreeSet<usize> = KNOWN_UNATTAINABLE.iter().map(|(id, _)| *id).collect();
    report!("{} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    assert_eq!(failed, known, "failing criteria differ from the documented unattainable set");
}
