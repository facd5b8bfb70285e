use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aqa_autodiff::suite::run_op_suite;
use aqa_autodiff::Checkpoint;
use aqa_core::features::{read_features, MelConfig};
use aqa_core::questengine::{builtin_templates, label_set, load_templates, read_qa_jsonl, Template};
use aqa_core::scenegen::read_index;
use aqa_core::soundbank::{build_bank, ingest_wav_dir, Bank, Split};
use aqa_model::data::{questions_path, read_norm, read_vocab, NORM_FILE, VOCAB_FILE};
use aqa_model::eval::{evaluate, render_report};
use aqa_model::matrix::{aggregate, render_matrix, RunOutcome, RunRecord};
use aqa_model::train::DEFAULT_SEEDS;
use aqa_model::{ModelError, Naaqa, SplitData};

use crate::cli::*;
use crate::dataset::{
    build_dataset, extract_features, generate_scenes, generate_split_questions, load_specs, NormAccumulator,
};
use crate::error::{data, CliError, Result};
use crate::experiment::{experiments, Experiment};
use crate::manifest::{walk, RunManifest};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const RUN_RECORD_FILE: &str = "run_record.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const MATRIX_FILE: &str = "matrix.json";

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which keeps the first setting.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Bank(c) => bank(c),
        Command::Scenes(ScenesCommand::Generate { bank, count, seed, split, out }) => {
            scenes(&bank, count, seed, split, &out)
        }
        Command::Questions(QuestionsCommand::Generate { scenes, templates, per_scene, seed, out }) => {
            questions(&scenes, templates.as_deref(), per_scene, seed, &out)
        }
        Command::Features(FeaturesCommand::Extract { scenes, preset, mode, fit_norm, out }) => {
            features(&scenes, &preset, mode, fit_norm, &out)
        }
        Command::Dataset(DatasetCommand::Build { preset, seed, out }) => {
            let mut m = RunManifest::start("dataset build");
            m.param("preset", preset.name()).param("seed", seed);
            m.seeds.push(seed);
            build_dataset(&out, preset, seed, &builtin_templates())?;
            m.finish_dir(&out)?;
            println!("dataset {} written to {}", preset.name(), out.display());
            Ok(())
        }
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Report(ReportCommand::Matrix { runs }) => matrix(&runs),
        Command::Gradcheck(args) => gradcheck(args),
        Command::Params(args) => params(&args.config),
        Command::Configs(ConfigsCommand::Export { out }) => export_configs(&out),
    }
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    }
}

fn bank(c: BankCommand) -> Result<()> {
    match c {
        BankCommand::Build { split, seed, out } => {
            let mut m = RunManifest::start("bank build");
            m.param("split", split_of(split).as_str()).param("seed", seed);
            m.seeds.push(seed);
            let bank = build_bank(split_of(split), seed).map_err(data)?;
            bank.write(&out).map_err(data)?;
            m.finish_dir(&out)?;
            println!("{} sounds written to {}", bank.sounds.len(), out.display());
        }
        BankCommand::Ingest { wav, manifest, split, out } => {
            let mut m = RunManifest::start("bank ingest");
            m.param("split", split_of(split).as_str());
            m.input(&manifest, &out)?;
            let bank = ingest_wav_dir(&wav, &manifest, split_of(split), None).map_err(data)?;
            bank.write(&out).map_err(data)?;
            m.finish_dir(&out)?;
            println!("{} sounds ingested into {}", bank.sounds.len(), out.display());
        }
    }
    Ok(())
}

fn scenes(bank_dir: &Path, count: usize, seed: u64, split: Option<String>, out: &Path) -> Result<()> {
    let mut m = RunManifest::start("scenes generate");
    m.input(&bank_dir.join(aqa_core::soundbank::MANIFEST_FILE), out)?;
    let bank = Bank::load(bank_dir).map_err(data)?;
    let split = split.unwrap_or_else(|| bank.split.as_str().to_string());
    m.param("count", count).param("split", &split).param("seed", seed);
    m.seeds.push(seed);
    generate_scenes(&bank, &split, count, seed, out, None, None)?;
    m.finish_dir(out)?;
    println!("{count} scenes written to {}", out.display());
    Ok(())
}

fn load_template_file(path: Option<&Path>) -> Result<Vec<Template>> {
    match path {
        Some(p) => load_templates(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => Ok(builtin_templates()),
    }
}

fn questions(scenes: &Path, templates: Option<&Path>, per_scene: usize, seed: u64, out: &Path) -> Result<()> {
    if per_scene == 0 {
        return Err(CliError::Usage("--per-scene must be at least 1".into()));
    }
    let mut m = RunManifest::start("questions generate");
    m.param("per_scene", per_scene).param("seed", seed);
    m.seeds.push(seed);
    m.input(&scenes.join(aqa_core::scenegen::INDEX_FILE), scenes)?;
    if let Some(t) = templates {
        m.input(t, scenes)?;
    }
    let templates = load_template_file(templates)?;
    let split = read_index(scenes).map_err(data)?.split;
    let specs = load_specs(scenes)?;
    let records = generate_split_questions(&specs, &templates, per_scene, seed, &split, out)?;
    m.finish_file(out)?;
    println!("{} questions written to {}", records.len(), out.display());
    Ok(())
}

fn features(scenes: &Path, preset: &str, mode: crate::dataset::FeatureMode, fit_norm: bool, out: &Path) -> Result<()> {
    let mel = MelConfig::preset(preset).ok_or_else(|| CliError::Usage(format!("unknown feature preset {preset}")))?;
    let mut m = RunManifest::start("features extract");
    m.param("preset", preset).param("mode", format!("{mode:?}").to_lowercase());
    m.input(&scenes.join(aqa_core::scenegen::INDEX_FILE), scenes)?;
    let mut acc = NormAccumulator::default();
    let ids = extract_features(scenes, out, &mel, mode, fit_norm.then_some(&mut acc))?;
    if fit_norm {
        fs::write(out.join(NORM_FILE), serde_json::to_vec_pretty(&acc.finish()?)?)?;
    }
    m.finish_dir(out)?;
    println!("{} feature files written to {}", ids.len(), out.display());
    Ok(())
}

/// Model config with the dataset's vocabulary and mel count filled in.
fn fit_to_data(exp: &Experiment, data_dir: &Path, vocab_len: usize) -> Result<aqa_model::ModelConfig> {
    let mut cfg = exp.model.clone();
    cfg.vocab_size = vocab_len;
    let probe = aqa_model::data::features_dir(data_dir, "train");
    if let Some(first) = fs::read_dir(&probe).ok().and_then(|mut d| d.find_map(|e| e.ok())) {
        let f = read_features(&first.path()).map_err(data)?;
        if f.n_mels != cfg.n_mels {
            return Err(CliError::Incompatible(format!(
                "experiment expects {} mel bands, dataset has {}",
                cfg.n_mels, f.n_mels
            )));
        }
    }
    Ok(cfg)
}

fn verify_data_inputs(data_dir: &Path, m: &mut RunManifest, splits: &[&str]) -> Result<()> {
    let mut files = vec![data_dir.join(VOCAB_FILE), aqa_model::data::norm_path(data_dir)];
    files.extend(splits.iter().map(|s| questions_path(data_dir, s)));
    for f in files {
        crate::manifest::verify(data_dir, &f)?;
        m.input(&f, data_dir)?;
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut exp = Experiment::load(&args.config)?;
    if let Some(e) = args.max_epochs {
        exp.training.max_epochs = e;
    }
    exp.training.ablation = args.ablation.into();
    exp.training.validate()?;
    let mut m = RunManifest::start("train");
    m.param("experiment", &exp.name).param("seed", args.seed).param("ablation", format!("{:?}", args.ablation));
    m.param("max_epochs", exp.training.max_epochs);
    m.seeds.push(args.seed);
    m.input(&args.config, &args.out)?;
    verify_data_inputs(&args.data, &mut m, &["train", "val"])?;

    let vocab = read_vocab(&args.data)?;
    let stats = read_norm(&args.data)?;
    let cfg = fit_to_data(&exp, &args.data, vocab.len())?;
    m.config_hash = Some(cfg.hash());
    let ablation = exp.training.ablation;
    let train_split = SplitData::load(&args.data, "train", &vocab, &stats, ablation)?;
    let val_split = SplitData::load(&args.data, "val", &vocab, &stats, ablation)?;
    let model = Naaqa::<f32>::new(cfg, args.seed)?;

    fs::create_dir_all(&args.out)?;
    let mut history = fs::File::create(args.out.join(HISTORY_FILE))?;
    let mut io_err = None;
    let result = aqa_model::train(model, &train_split, &val_split, &exp.training, args.seed, vocab.pad_id(), |log| {
        println!(
            "epoch {} train_loss {:.4} val_loss {:.4} val_acc {:.4} lr {:e}",
            log.epoch, log.train_loss, log.val_loss, log.val_acc, log.lr
        );
        let line = serde_json::to_string(log).expect("epoch log serializes");
        if let Err(e) = writeln!(history, "{line}") {
            io_err.get_or_insert(e);
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let record_path = args.out.join(RUN_RECORD_FILE);
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(e) => {
            let failed =
                RunRecord { config: exp.name.clone(), seed: args.seed, outcome: RunOutcome::Failed(e.to_string()) };
            fs::write(&record_path, serde_json::to_vec_pretty(&failed)?)?;
            m.finish_dir(&args.out)?;
            return Err(e.into());
        }
    };
    let metadata = serde_json::json!({
        "experiment": exp.name,
        "seed": args.seed,
        "best_epoch": outcome.best_epoch,
        "best_val_loss": outcome.best_val_loss,
        "ablation": ablation,
    });
    outcome.model.to_checkpoint(metadata).save(&args.out.join(CHECKPOINT_DIR))?;

    let eval_split = if questions_path(&args.data, "test").exists() { "test" } else { "val" };
    let split = if eval_split == "val" {
        val_split
    } else {
        SplitData::load(&args.data, eval_split, &vocab, &stats, ablation)?
    };
    let report = evaluate(&outcome.model, &split, label_set(), exp.training.batch_size, vocab.pad_id())?;
    print!("{}", render_report(&report));
    let record = RunRecord { config: exp.name.clone(), seed: args.seed, outcome: RunOutcome::Report(Box::new(report)) };
    fs::write(&record_path, serde_json::to_vec_pretty(&record)?)?;
    m.finish_dir(&args.out)?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut m = RunManifest::start("eval");
    m.param("split", &args.split).param("batch_size", args.batch_size);
    let report_dir = args.report.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    for f in walk(&args.checkpoint)? {
        crate::manifest::verify(args.checkpoint.parent().unwrap_or(Path::new(".")), &f)?;
        m.input(&f, &report_dir)?;
    }
    verify_data_inputs(&args.data, &mut m, &[args.split.as_str()])?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = Naaqa::<f32>::from_checkpoint(&ckpt)?;
    m.config_hash = Some(model.config().hash());
    let (header, _) = read_qa_jsonl(&questions_path(&args.data, &args.split)).map_err(data)?;
    let vocab = read_vocab(&args.data)?;
    if vocab.len() != model.config().vocab_size {
        return Err(CliError::Incompatible(format!(
            "checkpoint vocabulary has {} tokens, dataset {}",
            model.config().vocab_size,
            vocab.len()
        )));
    }
    let stats = read_norm(&args.data)?;
    let split = SplitData::load(&args.data, &args.split, &vocab, &stats, aqa_model::Ablation::None)?;
    let report = evaluate(&model, &split, &header.labels, args.batch_size, vocab.pad_id())?;
    fs::create_dir_all(&report_dir)?;
    fs::write(&args.report, serde_json::to_vec_pretty(&report)?)?;
    m.finish_file(&args.report)?;
    print!("{}", render_report(&report));
    Ok(())
}

fn matrix(runs: &Path) -> Result<()> {
    let mut m = RunManifest::start("report matrix");
    let mut records = Vec::new();
    for f in walk(runs)? {
        if f.file_name().is_some_and(|n| n == RUN_RECORD_FILE) {
            let r: RunRecord =
                serde_json::from_slice(&fs::read(&f)?).map_err(|e| data(format!("{}: {e}", f.display())))?;
            m.input(&f, runs)?;
            records.push(r);
        }
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("no {RUN_RECORD_FILE} under {}", runs.display())));
    }
    let order: Vec<String> = experiments().into_iter().map(|e| e.name).collect();
    let report = aggregate(&records, &order);
    let path = runs.join(MATRIX_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&report)?)?;
    m.finish_file(&path)?;
    print!("{}", render_matrix(&report));
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let seeds = if args.seeds.is_empty() { DEFAULT_SEEDS.to_vec() } else { args.seeds };
    let mut failures = Vec::new();
    for seed in seeds {
        let results = run_op_suite(seed).map_err(ModelError::from)?;
        for (op, report) in results {
            let ok = report.worst() < report.tolerance;
            println!(
                "{op:<28} seed {seed:<8} max_rel_error {:.3e} {}",
                report.worst(),
                if ok { "PASS" } else { "FAIL" }
            );
            if !ok {
                failures.push(format!("{op}@{seed}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("gradient check failed for {}", failures.join(", "))))
    }
}

fn params(config: &Path) -> Result<()> {
    let exp = Experiment::load(config)?;
    let model = Naaqa::<f32>::new(exp.model.clone(), 0)?;
    println!("{} parameters {} config_hash {}", exp.name, model.count_parameters(), exp.model.hash());
    for (module, n) in model.parameter_breakdown() {
        println!("  {module:<16} {n}");
    }
    Ok(())
}

fn export_configs(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    for e in experiments() {
        let mut bytes = serde_json::to_vec_pretty(&e)?;
        bytes.push(b'\n');
        fs::write(out.join(e.file_name()), bytes)?;
    }
    println!("{} experiment files written to {}", experiments().len(), out.display());
    Ok(())
}
