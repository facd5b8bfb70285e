//! Accuracy reports by question type and by presence of a temporal relation.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::time::Instant;

use aqa_autodiff::Tape;
use aqa_core::questengine::QuestionType;
use serde::{Deserialize, Serialize};

use crate::data::SplitData;
use crate::error::Result;
use crate::network::{Graph, Naaqa};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.correct += hit as usize;
    }
}

/// Relation split of one question type; `None` marks a column as N/A.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSplit {
    pub with_relation: Option<Tally>,
    pub without_relation: Option<Tally>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub gold: String,
    pub predicted: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub overall: Tally,
    pub overall_accuracy: f64,
    pub per_type: BTreeMap<QuestionType, Tally>,
    pub relation_split: BTreeMap<QuestionType, RelationSplit>,
    /// Most frequent (gold, predicted) mistakes.
    pub confusion: Vec<Confusion>,
    pub loss: Option<f64>,
    pub parameter_count: usize,
    pub runtime_s: f64,
}

/// Question types whose relation split is reported as N/A.
pub fn relation_not_applicable(t: QuestionType) -> bool {
    matches!(t, QuestionType::RelativePosition | QuestionType::CountComparison)
}

const CONFUSIONS_KEPT: usize = 10;

/// Builds a report from gold/predicted label indices.
pub fn report_from_predictions(
    split: &str,
    items: &[(QuestionType, bool, usize)],
    predictions: &[usize],
    labels: &[String],
) -> EvalReport {
    assert_eq!(items.len(), predictions.len(), "one prediction per item");
    let mut overall = Tally::default();
    let mut per_type: BTreeMap<QuestionType, Tally> = BTreeMap::new();
    let mut with: BTreeMap<QuestionType, Tally> = BTreeMap::new();
    let mut without: BTreeMap<QuestionType, Tally> = BTreeMap::new();
    let mut mistakes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&(t, temporal, gold), &pred) in items.iter().zip(predictions) {
        let hit = gold == pred;
        overall.add(hit);
        per_type.entry(t).or_default().add(hit);
        if temporal { &mut with } else { &mut without }.entry(t).or_default().add(hit);
        if !hit {
            *mistakes.entry((gold, pred)).or_default() += 1;
        }
    }
    let relation_split = per_type
        .keys()
        .map(|&t| {
            let split = if relation_not_applicable(t) {
                RelationSplit { with_relation: None, without_relation: None }
            } else {
                RelationSplit { with_relation: with.get(&t).copied(), without_relation: without.get(&t).copied() }
            };
            (t, split)
        })
        .collect();
    let mut confusion: Vec<Confusion> = mistakes
        .into_iter()
        .map(|((g, p), count)| Confusion {
            gold: labels.get(g).cloned().unwrap_or_else(|| g.to_string()),
            predicted: labels.get(p).cloned().unwrap_or_else(|| p.to_string()),
            count,
        })
        .collect();
    confusion.sort_by_key(|c| std::cmp::Reverse(c.count));
    confusion.truncate(CONFUSIONS_KEPT);
    EvalReport {
        split: split.to_string(),
        overall,
        overall_accuracy: overall.accuracy().unwrap_or(0.0),
        per_type,
        relation_split,
        confusion,
        loss: None,
        parameter_count: 0,
        runtime_s: 0.0,
    }
}

/// Mean loss and argmax predictions over a split in eval mode.
pub fn predict(model: &Naaqa<f32>, data: &SplitData, batch_size: usize, pad_id: usize) -> Result<(f64, Vec<usize>)> {
    let order: Vec<usize> = (0..data.len()).collect();
    let mut predictions = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0;
    for chunk in order.chunks(batch_size.max(1)) {
        let batch = data.batch::<f32>(chunk, pad_id)?;
        let mut g = Graph::eval();
        let logits = model.forward(&mut g, &batch)?;
        let targets: Vec<usize> = chunk.iter().map(|&i| data.examples[i].label).collect();
        let loss = g.tape.softmax_cross_entropy(logits, &targets)?;
        loss_sum += g.tape.value(loss).item() as f64 * chunk.len() as f64;
        predictions.extend(argmax_rows(&g.tape, logits));
    }
    Ok((loss_sum / data.len().max(1) as f64, predictions))
}

pub(crate) fn argmax_rows(tape: &Tape<f32>, logits: aqa_autodiff::Var) -> Vec<usize> {
    let value = tape.value(logits);
    let k = value.shape()[1];
    value
        .data()
        .chunks(k)
        .map(|row| row.iter().enumerate().fold(0, |best, (i, v)| if *v > row[best] { i } else { best }))
        .collect()
}

/// Evaluates a model on a split.
pub fn evaluate(
    model: &Naaqa<f32>,
    data: &SplitData,
    labels: &[String],
    batch_size: usize,
    pad_id: usize,
) -> Result<EvalReport> {
    crate::data::check_labels(labels)?;
    if model.config().o != labels.len() {
        return Err(crate::error::ModelError::Incompatible(format!(
            "model has {} outputs for {} labels",
            model.config().o,
            labels.len()
        )));
    }
    let start = Instant::now();
    let (loss, predictions) = predict(model, data, batch_size, pad_id)?;
    let items: Vec<(QuestionType, bool, usize)> =
        data.examples.iter().map(|e| (e.question_type, e.temporal, e.label)).collect();
    let mut report = report_from_predictions(&data.name, &items, &predictions, labels);
    report.loss = Some(loss);
    report.parameter_count = model.count_parameters();
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn pct(t: Option<Tally>) -> String {
    match t.and_then(|t| t.accuracy()) {
        Some(a) => format!("{:.1}", 100.0 * a),
        None => "N/A".into(),
    }
}

/// Plain-text table: one column per question type, then the relation rows.
pub fn render_report(r: &EvalReport) -> String {
    let mut s = String::new();
    let types: Vec<QuestionType> = QuestionType::ALL.to_vec();
    let _ = writeln!(
        s,
        "split {}  params {}  overall {:.1}% ({}/{})",
        r.split,
        r.parameter_count,
        100.0 * r.overall_accuracy,
        r.overall.correct,
        r.overall.total
    );
    let _ = write!(s, "{:<18}", "");
    for t in &types {
        let _ = write!(s, "{:>20}", t.name());
    }
    let _ = writeln!(s);
    let row = |s: &mut String, name: &str, f: &dyn Fn(QuestionType) -> Option<Tally>| {
        let _ = write!(s, "{name:<18}");
        for &t in &types {
            let _ = write!(s, "{:>20}", pct(f(t)));
        }
        let _ = writeln!(s);
    };
    row(&mut s, "accuracy", &|t| r.per_type.get(&t).copied());
    row(&mut s, "with relation", &|t| r.relation_split.get(&t).and_then(|x| x.with_relation));
    row(&mut s, "without relation", &|t| r.relation_split.get(&t).and_then(|x| x.without_relation));
    if !r.confusion.is_empty() {
        let _ = writeln!(s, "top confusions (gold -> predicted):");
        for c in &r.confusion {
            let _ = writeln!(s, "  {} -> {}: {}", c.gold, c.predicted, c.count);
        }
    }
    s
}
