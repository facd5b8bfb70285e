use std::collections::BTreeSet;

use thiserror::Error;

use super::program::validate;
use super::{Node, Op};
use crate::attributes::{ordinal, Brightness, GlobalPosition, Instrument, Loudness, Note};
use crate::scenegen::{SceneSpec, SoundEvent};

/// Why a well-formed program has no answer on a given scene.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum IllPosed {
    #[error("unique found {found} events")]
    NotUnique { found: usize },
    #[error("nth({k}) on a set of {len}")]
    NthOutOfRange { k: usize, len: usize },
    #[error("relation anchor resolves to {found} events")]
    AnchorUnresolved { found: usize },
    #[error("query received {found} events")]
    NotSingleton { found: usize },
    #[error("event is outside its context set")]
    NotInContext,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("ill-posed: {0}")]
    IllPosed(#[from] IllPosed),
    #[error("invalid program: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
enum Value {
    Set(Vec<usize>),
    Event(usize),
    Int(usize),
    Answer(String),
}

fn parse<T: std::str::FromStr>(node: &Node) -> Result<T, ExecError>
where
    T::Err: std::fmt::Display,
{
    let arg = node.arg.as_deref().ok_or_else(|| ExecError::Invalid(format!("{} needs an argument", node.op)))?;
    arg.parse::<T>().map_err(|e| ExecError::Invalid(format!("{}: {e}", node.op)))
}

fn single(v: &Value, err: fn(usize) -> IllPosed) -> Result<usize, ExecError> {
    match v {
        Value::Event(e) => Ok(*e),
        Value::Set(s) if s.len() == 1 => Ok(s[0]),
        Value::Set(s) => Err(err(s.len()).into()),
        _ => Err(ExecError::Invalid("expected an event".into())),
    }
}

fn set(v: &Value) -> Result<&[usize], ExecError> {
    match v {
        Value::Set(s) => Ok(s),
        _ => Err(ExecError::Invalid("expected a set".into())),
    }
}

fn int(v: &Value) -> Result<usize, ExecError> {
    match v {
        Value::Int(n) => Ok(*n),
        _ => Err(ExecError::Invalid("expected a count".into())),
    }
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

fn position_label(k: usize) -> Result<String, ExecError> {
    ordinal(k).map(str::to_string).ok_or_else(|| ExecError::Invalid(format!("position {k} has no label")))
}

/// Runs `program` against the scene and returns the answer label.
pub fn execute(program: &[Node], scene: &SceneSpec) -> Result<String, ExecError> {
    validate(program).map_err(|e| ExecError::Invalid(e.to_string()))?;
    let events = &scene.events;
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| events[a].onset_s.total_cmp(&events[b].onset_s));
    // rank[i] is the onset rank of event i.
    let mut rank = vec![0usize; events.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let keep = |input: &[usize], pred: &dyn Fn(&SoundEvent) -> bool| -> Vec<usize> {
        input.iter().copied().filter(|&i| pred(&events[i])).collect()
    };

    let mut values: Vec<Value> = Vec::with_capacity(program.len());
    for node in program {
        let arg0 = node.inputs.first().map(|&i| &values[i]);
        let value = match node.op {
            Op::Scene => Value::Set(order.clone()),
            Op::FilterInstrument => {
                let want: Instrument = parse(node)?;
                Value::Set(keep(set(arg0.unwrap())?, &|e| e.instrument == want))
            }
            Op::FilterNote => {
                let want: Note = parse(node)?;
                Value::Set(keep(set(arg0.unwrap())?, &|e| e.note == want))
            }
            Op::FilterBrightness => {
                let want: Brightness = parse(node)?;
                Value::Set(keep(set(arg0.unwrap())?, &|e| e.brightness_label == want))
            }
            Op::FilterLoudness => {
                let want: Loudness = parse(node)?;
                Value::Set(keep(set(arg0.unwrap())?, &|e| e.loudness_label == want))
            }
            Op::FilterGlobalPosition => {
                let want: GlobalPosition = parse(node)?;
                Value::Set(keep(set(arg0.unwrap())?, &|e| e.global_position == want))
            }
            Op::RelateBefore | Op::RelateAfter => {
                let anchor = single(arg0.unwrap(), |found| IllPosed::AnchorUnresolved { found })?;
                let r = rank[anchor];
                let out = if node.op == Op::RelateBefore { order[..r].to_vec() } else { order[r + 1..].to_vec() };
                Value::Set(out)
            }
            Op::Nth => {
                let k: usize = parse(node)?;
                let s = set(arg0.unwrap())?;
                if k == 0 || k > s.len() {
                    return Err(IllPosed::NthOutOfRange { k, len: s.len() }.into());
                }
                Value::Event(s[k - 1])
            }
            Op::Unique => {
                let s = set(arg0.unwrap())?;
                if s.len() != 1 {
                    return Err(IllPosed::NotUnique { found: s.len() }.into());
                }
                Value::Event(s[0])
            }
            Op::QueryInstrument
            | Op::QueryNote
            | Op::QueryBrightness
            | Op::QueryLoudness
            | Op::QueryAbsolutePosition
            | Op::QueryGlobalPosition => {
                let e = single(arg0.unwrap(), |found| IllPosed::NotSingleton { found })?;
                let ev = &events[e];
                Value::Answer(match node.op {
                    Op::QueryInstrument => ev.instrument.to_string(),
                    Op::QueryNote => ev.note.to_string(),
                    Op::QueryBrightness => ev.brightness_label.to_string(),
                    Op::QueryLoudness => ev.loudness_label.to_string(),
                    Op::QueryAbsolutePosition => position_label(rank[e] + 1)?,
                    _ => ev.global_position.to_string(),
                })
            }
            Op::QueryRelativePosition => {
                let e = single(arg0.unwrap(), |found| IllPosed::NotSingleton { found })?;
                let ctx = set(&values[node.inputs[1]])?;
                let k = ctx.iter().position(|&i| i == e).ok_or(IllPosed::NotInContext)?;
                Value::Answer(position_label(k + 1)?)
            }
            Op::Count => Value::Int(set(arg0.unwrap())?.len()),
            Op::CountDistinctInstruments => {
                let s = set(arg0.unwrap())?;
                Value::Int(s.iter().map(|&i| events[i].instrument).collect::<BTreeSet<_>>().len())
            }
            Op::Exist => Value::Answer(yes_no(!set(arg0.unwrap())?.is_empty())),
            Op::CompareEqual | Op::CompareMore | Op::CompareFewer => {
                let a = int(&values[node.inputs[0]])?;
                let b = int(&values[node.inputs[1]])?;
                Value::Answer(yes_no(match node.op {
                    Op::CompareEqual => a == b,
                    Op::CompareMore => a > b,
                    _ => a < b,
                }))
            }
        };
        values.push(value);
    }
    match values.pop() {
        Some(Value::Answer(a)) => Ok(a),
        Some(Value::Int(n)) => Ok(n.to_string()),
        _ => Err(ExecError::Invalid("terminal node does not produce an answer".into())),
    }
}
