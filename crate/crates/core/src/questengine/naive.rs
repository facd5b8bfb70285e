//! Brute-force evaluator used to cross-check [`super::execute`].
//!
//! Sets are membership masks over the scene's events and every ordering
//! question is answered by comparing onsets pairwise, so nothing here relies on
//! the sorted index lists the main evaluator keeps.

use super::{ExecError, IllPosed, Node, Op};
use crate::attributes::{Brightness, GlobalPosition, Instrument, Loudness, Note};
use crate::scenegen::{SceneSpec, SoundEvent};

#[derive(Clone)]
enum V {
    Mask(Vec<bool>),
    One(usize),
    Num(usize),
    Word(String),
}

const POSITION_WORDS: [&str; 15] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
];

fn invalid(msg: impl Into<String>) -> ExecError {
    ExecError::Invalid(msg.into())
}

fn arity(op: Op) -> usize {
    match op {
        Op::Scene => 0,
        Op::QueryRelativePosition | Op::CompareEqual | Op::CompareMore | Op::CompareFewer => 2,
        _ => 1,
    }
}

fn takes_arg(op: Op) -> bool {
    matches!(
        op,
        Op::FilterInstrument
            | Op::FilterNote
            | Op::FilterBrightness
            | Op::FilterLoudness
            | Op::FilterGlobalPosition
            | Op::Nth
    )
}

// 0 = set, 1 = event, 2 = number, 3 = word
fn produces(op: Op) -> u8 {
    match op {
        Op::Scene
        | Op::FilterInstrument
        | Op::FilterNote
        | Op::FilterBrightness
        | Op::FilterLoudness
        | Op::FilterGlobalPosition
        | Op::RelateBefore
        | Op::RelateAfter => 0,
        Op::Nth | Op::Unique => 1,
        Op::Count | Op::CountDistinctInstruments => 2,
        _ => 3,
    }
}

fn accepts(op: Op, slot: usize, kind: u8) -> bool {
    match op {
        Op::RelateBefore | Op::RelateAfter => kind <= 1,
        Op::QueryRelativePosition => kind == if slot == 0 { 1 } else { 0 },
        Op::QueryInstrument
        | Op::QueryNote
        | Op::QueryBrightness
        | Op::QueryLoudness
        | Op::QueryAbsolutePosition
        | Op::QueryGlobalPosition => kind == 1,
        Op::CompareEqual | Op::CompareMore | Op::CompareFewer => kind == 2,
        _ => kind == 0,
    }
}

fn check_shape(program: &[Node]) -> Result<(), ExecError> {
    if program.is_empty() {
        return Err(invalid("empty program"));
    }
    let mut kinds: Vec<u8> = Vec::new();
    for (i, n) in program.iter().enumerate() {
        if n.inputs.len() != arity(n.op) || takes_arg(n.op) != n.arg.is_some() {
            return Err(invalid(format!("node {i} is malformed")));
        }
        for (slot, &src) in n.inputs.iter().enumerate() {
            if src >= i || !accepts(n.op, slot, kinds[src]) {
                return Err(invalid(format!("node {i} has a bad input")));
            }
        }
        kinds.push(produces(n.op));
    }
    if kinds[kinds.len() - 1] < 2 {
        return Err(invalid("no answer at the end"));
    }
    Ok(())
}

fn label_matches<T: Copy>(all: &[T], label: impl Fn(T) -> &'static str, arg: &str) -> Result<(), ExecError> {
    if all.iter().any(|&x| label(x) == arg) {
        Ok(())
    } else {
        Err(invalid(format!("unknown value `{arg}`")))
    }
}

fn attribute_of(op: Op, e: &SoundEvent) -> &'static str {
    match op {
        Op::FilterInstrument | Op::QueryInstrument => e.instrument.label(),
        Op::FilterNote | Op::QueryNote => e.note.label(),
        Op::FilterBrightness | Op::QueryBrightness => e.brightness_label.label(),
        Op::FilterLoudness | Op::QueryLoudness => e.loudness_label.label(),
        _ => e.global_position.label(),
    }
}

/// Same contract as [`super::execute`].
pub fn execute_naive(program: &[Node], scene: &SceneSpec) -> Result<String, ExecError> {
    check_shape(program)?;
    let ev = &scene.events;
    let n = ev.len();
    let earlier = |a: usize, b: usize| ev[a].onset_s < ev[b].onset_s;
    // Number of members of `mask` strictly earlier than `e`.
    let members_before = |mask: &[bool], e: usize| (0..n).filter(|&j| mask[j] && earlier(j, e)).count();

    let mut vals: Vec<V> = Vec::new();
    for node in program {
        let input = |k: usize| vals[node.inputs[k]].clone();
        let out = match node.op {
            Op::Scene => V::Mask(vec![true; n]),
            Op::FilterInstrument
            | Op::FilterNote
            | Op::FilterBrightness
            | Op::FilterLoudness
            | Op::FilterGlobalPosition => {
                let arg = node.arg.as_deref().unwrap_or_default();
                match node.op {
                    Op::FilterInstrument => label_matches(Instrument::ALL, |x| x.label(), arg)?,
                    Op::FilterNote => label_matches(Note::ALL, |x| x.label(), arg)?,
                    Op::FilterBrightness => label_matches(Brightness::ALL, |x| x.label(), arg)?,
                    Op::FilterLoudness => label_matches(Loudness::ALL, |x| x.label(), arg)?,
                    _ => label_matches(GlobalPosition::ALL, |x| x.label(), arg)?,
                }
                let V::Mask(m) = input(0) else { unreachable!() };
                V::Mask((0..n).map(|j| m[j] && attribute_of(node.op, &ev[j]) == arg).collect())
            }
            Op::RelateBefore | Op::RelateAfter => {
                let anchor = match input(0) {
                    V::One(e) => e,
                    V::Mask(m) => {
                        let hits: Vec<usize> = (0..n).filter(|&j| m[j]).collect();
                        if hits.len() != 1 {
                            return Err(IllPosed::AnchorUnresolved { found: hits.len() }.into());
                        }
                        hits[0]
                    }
                    _ => unreachable!(),
                };
                let before = node.op == Op::RelateBefore;
                V::Mask((0..n).map(|j| if before { earlier(j, anchor) } else { earlier(anchor, j) }).collect())
            }
            Op::Nth => {
                let k: usize =
                    node.arg.as_deref().unwrap_or_default().parse().map_err(|_| invalid("nth needs a number"))?;
                let V::Mask(m) = input(0) else { unreachable!() };
                let size = m.iter().filter(|&&b| b).count();
                match (0..n).find(|&j| m[j] && k >= 1 && members_before(&m, j) == k - 1) {
                    Some(j) => V::One(j),
                    None => return Err(IllPosed::NthOutOfRange { k, len: size }.into()),
                }
            }
            Op::Unique => {
                let V::Mask(m) = input(0) else { unreachable!() };
                let hits: Vec<usize> = (0..n).filter(|&j| m[j]).collect();
                if hits.len() != 1 {
                    return Err(IllPosed::NotUnique { found: hits.len() }.into());
                }
                V::One(hits[0])
            }
            Op::QueryInstrument | Op::QueryNote | Op::QueryBrightness | Op::QueryLoudness | Op::QueryGlobalPosition => {
                let V::One(e) = input(0) else { unreachable!() };
                V::Word(attribute_of(node.op, &ev[e]).to_string())
            }
            Op::QueryAbsolutePosition => {
                let V::One(e) = input(0) else { unreachable!() };
                let before = (0..n).filter(|&j| earlier(j, e)).count();
                V::Word(POSITION_WORDS.get(before).ok_or_else(|| invalid("position overflow"))?.to_string())
            }
            Op::QueryRelativePosition => {
                let V::One(e) = input(0) else { unreachable!() };
                let V::Mask(ctx) = input(1) else { unreachable!() };
                if !ctx[e] {
                    return Err(IllPosed::NotInContext.into());
                }
                let before = members_before(&ctx, e);
                V::Word(POSITION_WORDS.get(before).ok_or_else(|| invalid("position overflow"))?.to_string())
            }
            Op::Count => {
                let V::Mask(m) = input(0) else { unreachable!() };
                V::Num(m.iter().filter(|&&b| b).count())
            }
            Op::CountDistinctInstruments => {
                let V::Mask(m) = input(0) else { unreachable!() };
                // An event counts if no other member with the same instrument precedes it in index order.
                let firsts =
                    (0..n).filter(|&j| m[j] && !(0..j).any(|i| m[i] && ev[i].instrument == ev[j].instrument)).count();
                V::Num(firsts)
            }
            Op::Exist => {
                let V::Mask(m) = input(0) else { unreachable!() };
                V::Word(if m.contains(&true) { "yes" } else { "no" }.into())
            }
            Op::CompareEqual | Op::CompareMore | Op::CompareFewer => {
                let (V::Num(a), V::Num(b)) = (input(0), input(1)) else { unreachable!() };
                let truth = match node.op {
                    Op::CompareEqual => a == b,
                    Op::CompareMore => a > b,
                    _ => a < b,
                };
                V::Word(if truth { "yes" } else { "no" }.into())
            }
        };
        vals.push(out);
    }
    match vals.pop() {
        Some(V::Word(w)) => Ok(w),
        Some(V::Num(k)) => Ok(k.to_string()),
        _ => Err(invalid("no answer at the end")),
    }
}
