//! Aggregation of repeated runs (configs x seeds) into one table.

use std::collections::BTreeMap;
use std::fmt::Write;

use aqa_core::questengine::QuestionType;
use serde::{Deserialize, Serialize};

use crate::eval::EvalReport;

/// One finished (or failed) training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: String,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Report(Box<EvalReport>),
    Failed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation over the runs.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), n: xs.len() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub config: String,
    pub parameter_count: Option<usize>,
    pub overall: Option<MeanStd>,
    pub per_type: BTreeMap<QuestionType, MeanStd>,
    pub seeds: Vec<u64>,
    /// `(seed, message)` for each run that did not produce a report.
    pub failures: Vec<(u64, String)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
}

/// Groups runs by config. Rows follow `order`; configs missing from it are
/// appended in first-seen order.
pub fn aggregate(runs: &[RunRecord], order: &[String]) -> MatrixReport {
    let mut names: Vec<String> = order.to_vec();
    for r in runs {
        if !names.contains(&r.config) {
            names.push(r.config.clone());
        }
    }
    let rows = names
        .into_iter()
        .filter_map(|name| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.config == name).collect();
            if mine.is_empty() {
                return None;
            }
            let reports: Vec<&EvalReport> = mine
                .iter()
                .filter_map(|r| match &r.outcome {
                    RunOutcome::Report(rep) => Some(rep.as_ref()),
                    RunOutcome::Failed(_) => None,
                })
                .collect();
            let failures = mine
                .iter()
                .filter_map(|r| match &r.outcome {
                    RunOutcome::Failed(msg) => Some((r.seed, msg.clone())),
                    RunOutcome::Report(_) => None,
                })
                .collect();
            let overall = MeanStd::of(&reports.iter().map(|r| r.overall_accuracy).collect::<Vec<_>>());
            let per_type = QuestionType::ALL
                .iter()
                .filter_map(|&t| {
                    let xs: Vec<f64> =
                        reports.iter().filter_map(|r| r.per_type.get(&t).and_then(|x| x.accuracy())).collect();
                    MeanStd::of(&xs).map(|m| (t, m))
                })
                .collect();
            Some(MatrixRow {
                config: name,
                parameter_count: reports.first().map(|r| r.parameter_count),
                overall,
                per_type,
                seeds: mine.iter().map(|r| r.seed).collect(),
                failures,
            })
        })
        .collect();
    MatrixReport { rows }
}

fn cell(m: Option<&MeanStd>) -> String {
    match m {
        Some(m) => format!("{:.1}±{:.1}", 100.0 * m.mean, 100.0 * m.std),
        None => "-".into(),
    }
}

/// Text table with one row per config and one column per question type.
pub fn render_matrix(m: &MatrixReport) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<36}{:>10}{:>14}", "config", "params", "overall");
    for t in QuestionType::ALL {
        let _ = write!(s, "{:>22}", t.name());
    }
    let _ = writeln!(s);
    for row in &m.rows {
        let params = row.parameter_count.map_or("-".into(), |p| format!("{:.2}M", p as f64 / 1e6));
        let _ = write!(s, "{:<36}{:>10}{:>14}", row.config, params, cell(row.overall.as_ref()));
        for t in QuestionType::ALL {
            let _ = write!(s, "{:>22}", cell(row.per_type.get(&t)));
        }
        let _ = writeln!(s);
        for (seed, msg) in &row.failures {
            let _ = writeln!(s, "  seed {seed} failed: {msg}");
        }
    }
    s
}
