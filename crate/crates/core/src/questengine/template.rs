use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::program::validate;
use super::{execute, has_temporal_relation, IllPosed, Node, Op, Program, QuestionError, QuestionType};
use crate::attributes::{ordinal, parse_ordinal, Brightness, GlobalPosition, Instrument, Loudness, Note};
use crate::scenegen::{global_bucket, SceneSpec};

const BUILTIN: &str = include_str!("../../data/templates.json");

/// Number of reordered scenes used to spot order-blind questions.
const SHUFFLES: usize = 5;
/// Probability that a placeholder is drawn from an event of the scene.
const SCENE_BIAS: f64 = 0.75;
const CONSTRAINT_RETRIES: usize = 20;

/// Program node with placeholder arguments. The pseudo-op `relate` turns into
/// `relate_before` or `relate_after` depending on its `<REL>` binding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonNode {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<String>,
    #[serde(default)]
    pub inputs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// The listed placeholder groups must not all bind to the same values.
    Distinct(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub template_id: String,
    pub question_type: QuestionType,
    pub text_pattern: String,
    pub program_skeleton: Vec<SkeletonNode>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

/// Placeholder to surface form.
pub type Bindings = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub question_id: String,
    pub scene_id: String,
    pub template_id: String,
    pub question_type: QuestionType,
    pub has_temporal_relation: bool,
    pub text: String,
    pub program: Program,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejected {
    Constraints,
    IllPosed(IllPosed),
    /// The answer survives every reordering of the scene.
    Degenerate,
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Instrument,
    Note,
    Brightness,
    Loudness,
    Ordinal,
    GlobalPosition,
    Relation,
}

fn slot_of(placeholder: &str) -> Option<Slot> {
    let body = placeholder.strip_prefix('<')?.strip_suffix('>')?;
    let stem = body.trim_end_matches(|c: char| c.is_ascii_digit());
    Some(match stem {
        "I" => Slot::Instrument,
        "N" => Slot::Note,
        "B" => Slot::Brightness,
        "L" => Slot::Loudness,
        "O" => Slot::Ordinal,
        "GP" => Slot::GlobalPosition,
        "REL" => Slot::Relation,
        _ => return None,
    })
}

fn is_placeholder(s: &str) -> bool {
    s.starts_with('<') && s.ends_with('>')
}

fn text_placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let Some(len) = rest[start..].find('>') else { break };
        out.push(rest[start..start + len + 1].to_string());
        rest = &rest[start + len + 1..];
    }
    out
}

impl Template {
    /// Placeholders used by the program skeleton, sorted.
    pub fn placeholders(&self) -> BTreeSet<String> {
        self.program_skeleton.iter().filter_map(|n| n.arg.clone()).filter(|a| is_placeholder(a)).collect()
    }

    pub fn validate(&self) -> Result<(), QuestionError> {
        let err = |reason: String| Err(QuestionError::InvalidTemplate { id: self.template_id.clone(), reason });
        let in_program = self.placeholders();
        let in_text: BTreeSet<String> = text_placeholders(&self.text_pattern).into_iter().collect();
        for p in in_text.iter().chain(&in_program) {
            if slot_of(p).is_none() {
                return err(format!("unknown placeholder {p}"));
            }
        }
        if in_text != in_program {
            return err(format!("text uses {in_text:?}, program uses {in_program:?}"));
        }
        for c in &self.constraints {
            let Constraint::Distinct(groups) = c;
            if groups.len() < 2 || groups.iter().any(|g| g.len() != groups[0].len()) {
                return err("distinct needs at least two groups of equal size".into());
            }
            if let Some(p) = groups.iter().flatten().find(|p| !in_program.contains(*p)) {
                return err(format!("constraint names unused placeholder {p}"));
            }
        }
        let mut dummy = Bindings::new();
        for p in &in_program {
            dummy.insert(p.clone(), default_value(slot_of(p).unwrap()).to_string());
        }
        let (_, program) = resolve(self, &dummy)?;
        validate(&program)
            .map_err(|e| QuestionError::InvalidTemplate { id: self.template_id.clone(), reason: e.to_string() })?;
        let terminal = program.last().map(|n| n.op).unwrap();
        if !self.question_type.terminals().contains(&terminal) {
            return err(format!("terminal {terminal} does not answer {}", self.question_type));
        }
        Ok(())
    }
}

fn default_value(slot: Slot) -> &'static str {
    match slot {
        Slot::Instrument => "violin",
        Slot::Note => "C",
        Slot::Brightness => "bright",
        Slot::Loudness => "loud",
        Slot::Ordinal => "first",
        Slot::GlobalPosition => "middle",
        Slot::Relation => "before",
    }
}

/// Parses and validates a JSON array of templates.
pub fn parse_templates(json: &str) -> Result<Vec<Template>, QuestionError> {
    let templates: Vec<Template> = serde_json::from_str(json)?;
    let mut seen = HashSet::new();
    for t in &templates {
        if !seen.insert(t.template_id.as_str()) {
            return Err(QuestionError::InvalidTemplate { id: t.template_id.clone(), reason: "duplicate id".into() });
        }
        t.validate()?;
    }
    Ok(templates)
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>, QuestionError> {
    parse_templates(&fs::read_to_string(path)?)
}

/// The template set shipped with the crate.
pub fn builtin_templates() -> Vec<Template> {
    parse_templates(BUILTIN).expect("bundled templates are valid")
}

/// Fills the text pattern and turns the skeleton into a concrete program.
pub fn resolve(template: &Template, bindings: &Bindings) -> Result<(String, Program), QuestionError> {
    let err = |reason: String| QuestionError::InvalidTemplate { id: template.template_id.clone(), reason };
    let lookup = |p: &str| bindings.get(p).cloned().ok_or_else(|| err(format!("{p} is unbound")));

    let mut program = Vec::with_capacity(template.program_skeleton.len());
    for sk in &template.program_skeleton {
        let value = match &sk.arg {
            Some(a) if is_placeholder(a) => Some(lookup(a)?),
            other => other.clone(),
        };
        let node = if sk.op == "relate" {
            let op = match value.as_deref() {
                Some("before") => Op::RelateBefore,
                Some("after") => Op::RelateAfter,
                v => return Err(err(format!("relate needs before/after, got {v:?}"))),
            };
            Node { op, arg: None, inputs: sk.inputs.clone() }
        } else {
            let op: Op = sk.op.parse()?;
            let arg = match (op, value) {
                (Op::Nth, Some(v)) => {
                    let k =
                        parse_ordinal(&v).or_else(|| v.parse().ok()).ok_or_else(|| err(format!("bad ordinal {v}")))?;
                    Some(k.to_string())
                }
                (_, v) => v,
            };
            Node { op, arg, inputs: sk.inputs.clone() }
        };
        program.push(node);
    }

    let mut text = template.text_pattern.clone();
    for p in text_placeholders(&template.text_pattern) {
        text = text.replacen(&p, &lookup(&p)?, 1);
    }
    Ok((fix_articles(&text), program))
}

/// Turns "a" into "an" before words read with a leading vowel sound.
pub fn fix_articles(text: &str) -> String {
    let words: Vec<&str> = text.split(' ').collect();
    let mut out: Vec<&str> = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let next = words.get(i + 1).copied().unwrap_or("");
        let vowel = next.starts_with(|c: char| "aeiouAEIOU".contains(c)) || next == "F" || next == "F#";
        out.push(if *w == "a" && vowel { "an" } else { w });
    }
    out.join(" ")
}

fn sample_slot(slot: Slot, scene: &SceneSpec, rng: &mut impl Rng) -> String {
    let from_scene = !scene.events.is_empty() && rng.random_bool(SCENE_BIAS);
    let event = scene.events.choose(rng);
    match slot {
        Slot::Instrument => match (from_scene, event) {
            (true, Some(e)) => e.instrument,
            _ => *Instrument::ALL.choose(rng).unwrap(),
        }
        .to_string(),
        Slot::Note => match (from_scene, event) {
            (true, Some(e)) => e.note,
            _ => *Note::ALL.choose(rng).unwrap(),
        }
        .to_string(),
        Slot::Brightness => match (from_scene, event) {
            (true, Some(e)) => e.brightness_label,
            _ => *Brightness::ALL.choose(rng).unwrap(),
        }
        .to_string(),
        Slot::Loudness => match (from_scene, event) {
            (true, Some(e)) => e.loudness_label,
            _ => *Loudness::ALL.choose(rng).unwrap(),
        }
        .to_string(),
        Slot::GlobalPosition => match (from_scene, event) {
            (true, Some(e)) => e.global_position,
            _ => *GlobalPosition::ALL.choose(rng).unwrap(),
        }
        .to_string(),
        Slot::Ordinal => {
            let hi = if from_scene { 3 } else { scene.events.len().clamp(1, 15) };
            ordinal(rng.random_range(1..=hi)).unwrap().to_string()
        }
        Slot::Relation => if rng.random_bool(0.5) { "before" } else { "after" }.to_string(),
    }
}

fn satisfies(constraints: &[Constraint], b: &Bindings) -> bool {
    constraints.iter().all(|c| {
        let Constraint::Distinct(groups) = c;
        let values: Vec<Vec<&String>> = groups.iter().map(|g| g.iter().map(|p| &b[p]).collect()).collect();
        (0..values.len()).all(|i| (i + 1..values.len()).all(|j| values[i] != values[j]))
    })
}

fn sample_bindings(template: &Template, scene: &SceneSpec, rng: &mut impl Rng) -> Option<Bindings> {
    for _ in 0..CONSTRAINT_RETRIES {
        let b: Bindings = template
            .placeholders()
            .into_iter()
            .map(|p| {
                let v = sample_slot(slot_of(&p).unwrap(), scene, rng);
                (p, v)
            })
            .collect();
        if satisfies(&template.constraints, &b) {
            return Some(b);
        }
    }
    None
}

/// The same scene with its events played in a random order. Silences keep
/// their slots; onsets, positions and thirds are recomputed.
pub fn permuted_scene(scene: &SceneSpec, rng: &mut impl Rng) -> SceneSpec {
    let mut out = scene.clone();
    out.events.shuffle(rng);
    let mut cursor = 0.0;
    for (k, e) in out.events.iter_mut().enumerate() {
        cursor += scene.silence_gaps_s.get(k).copied().unwrap_or(0.0);
        e.onset_s = cursor;
        e.absolute_position = k + 1;
        e.global_position = global_bucket(cursor, scene.total_duration_s);
        cursor += e.duration_s;
    }
    out
}

/// Draws placeholder values, executes the program and screens the result.
pub fn instantiate(template: &Template, scene: &SceneSpec, rng: &mut impl Rng) -> Result<QaRecord, Rejected> {
    let bindings = sample_bindings(template, scene, rng).ok_or(Rejected::Constraints)?;
    let (text, program) = resolve(template, &bindings).map_err(|e| Rejected::Invalid(e.to_string()))?;
    let answer = match execute(&program, scene) {
        Ok(a) => a,
        Err(super::ExecError::IllPosed(p)) => return Err(Rejected::IllPosed(p)),
        Err(e) => return Err(Rejected::Invalid(e.to_string())),
    };
    let terminal = program.last().map(|n| n.op).unwrap();
    if !terminal.is_order_free_terminal() {
        let changes = (0..SHUFFLES).any(|_| execute(&program, &permuted_scene(scene, rng)).as_ref() != Ok(&answer));
        if !changes {
            return Err(Rejected::Degenerate);
        }
    }
    Ok(QaRecord {
        question_id: format!("{}_{}", scene.scene_id, template.template_id),
        scene_id: scene.scene_id.clone(),
        template_id: template.template_id.clone(),
        question_type: template.question_type,
        has_temporal_relation: has_temporal_relation(&program),
        text,
        program,
        answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn articles() {
        assert_eq!(fix_articles("Is there a A note"), "Is there an A note");
        assert_eq!(fix_articles("Is there a F# note"), "Is there an F# note");
        assert_eq!(fix_articles("Is there a G note"), "Is there a G note");
        assert_eq!(fix_articles("a eighth"), "an eighth");
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(text_placeholders("Is <I> <REL> the <O> <I2>?"), ["<I>", "<REL>", "<O>", "<I2>"]);
        assert_eq!(slot_of("<GP>"), Some(Slot::GlobalPosition));
        assert_eq!(slot_of("<L2>"), Some(Slot::Loudness));
        assert_eq!(slot_of("<X>"), None);
    }
}
