use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::QuestionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Scene,
    FilterInstrument,
    FilterNote,
    FilterBrightness,
    FilterLoudness,
    FilterGlobalPosition,
    RelateBefore,
    RelateAfter,
    Nth,
    Unique,
    QueryInstrument,
    QueryNote,
    QueryBrightness,
    QueryLoudness,
    QueryAbsolutePosition,
    QueryRelativePosition,
    QueryGlobalPosition,
    Count,
    CountDistinctInstruments,
    Exist,
    CompareEqual,
    CompareMore,
    CompareFewer,
}

/// Static type of a node's output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Set,
    Event,
    Int,
    Answer,
}

impl Op {
    pub const ALL: &'static [Op] = &[
        Op::Scene,
        Op::FilterInstrument,
        Op::FilterNote,
        Op::FilterBrightness,
        Op::FilterLoudness,
        Op::FilterGlobalPosition,
        Op::RelateBefore,
        Op::RelateAfter,
        Op::Nth,
        Op::Unique,
        Op::QueryInstrument,
        Op::QueryNote,
        Op::QueryBrightness,
        Op::QueryLoudness,
        Op::QueryAbsolutePosition,
        Op::QueryRelativePosition,
        Op::QueryGlobalPosition,
        Op::Count,
        Op::CountDistinctInstruments,
        Op::Exist,
        Op::CompareEqual,
        Op::CompareMore,
        Op::CompareFewer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Scene => "scene",
            Op::FilterInstrument => "filter_instrument",
            Op::FilterNote => "filter_note",
            Op::FilterBrightness => "filter_brightness",
            Op::FilterLoudness => "filter_loudness",
            Op::FilterGlobalPosition => "filter_global_position",
            Op::RelateBefore => "relate_before",
            Op::RelateAfter => "relate_after",
            Op::Nth => "nth",
            Op::Unique => "unique",
            Op::QueryInstrument => "query_instrument",
            Op::QueryNote => "query_note",
            Op::QueryBrightness => "query_brightness",
            Op::QueryLoudness => "query_loudness",
            Op::QueryAbsolutePosition => "query_absolute_position",
            Op::QueryRelativePosition => "query_relative_position",
            Op::QueryGlobalPosition => "query_global_position",
            Op::Count => "count",
            Op::CountDistinctInstruments => "count_distinct_instruments",
            Op::Exist => "exist",
            Op::CompareEqual => "compare_equal",
            Op::CompareMore => "compare_more",
            Op::CompareFewer => "compare_fewer",
        }
    }

    /// Argument requirement, input kinds and output kind.
    pub fn signature(self) -> (bool, &'static [Kind], Kind) {
        use Kind::*;
        match self {
            Op::Scene => (false, &[], Set),
            Op::FilterInstrument
            | Op::FilterNote
            | Op::FilterBrightness
            | Op::FilterLoudness
            | Op::FilterGlobalPosition => (true, &[Set], Set),
            // The anchor may also be a singleton set; checked at run time.
            Op::RelateBefore | Op::RelateAfter => (false, &[Event], Set),
            Op::Nth => (true, &[Set], Event),
            Op::Unique => (false, &[Set], Event),
            Op::QueryInstrument
            | Op::QueryNote
            | Op::QueryBrightness
            | Op::QueryLoudness
            | Op::QueryAbsolutePosition
            | Op::QueryGlobalPosition => (false, &[Event], Answer),
            Op::QueryRelativePosition => (false, &[Event, Set], Answer),
            Op::Count | Op::CountDistinctInstruments => (false, &[Set], Int),
            Op::Exist => (false, &[Set], Answer),
            Op::CompareEqual | Op::CompareMore | Op::CompareFewer => (false, &[Int, Int], Answer),
        }
    }

    pub fn is_relation(self) -> bool {
        matches!(self, Op::RelateBefore | Op::RelateAfter)
    }

    /// Terminals whose answers do not depend on event order by design.
    pub fn is_order_free_terminal(self) -> bool {
        matches!(
            self,
            Op::Count
                | Op::CountDistinctInstruments
                | Op::Exist
                | Op::CompareEqual
                | Op::CompareMore
                | Op::CompareFewer
        )
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Op {
    type Err = QuestionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .iter()
            .copied()
            .find(|o| o.name() == s)
            .ok_or_else(|| QuestionError::InvalidProgram(format!("unknown op `{s}`")))
    }
}

/// One step of a functional program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<String>,
    #[serde(default)]
    pub inputs: Vec<usize>,
}

impl Node {
    pub fn new(op: Op, arg: Option<&str>, inputs: &[usize]) -> Self {
        Self { op, arg: arg.map(str::to_string), inputs: inputs.to_vec() }
    }
}

pub type Program = Vec<Node>;

/// Structural checks: inputs point backwards, kinds line up, arguments are
/// present where required, and the last node produces an answer.
pub fn validate(program: &[Node]) -> Result<(), QuestionError> {
    let bad = |msg: String| Err(QuestionError::InvalidProgram(msg));
    if program.is_empty() {
        return bad("empty program".into());
    }
    let mut kinds = Vec::with_capacity(program.len());
    for (i, node) in program.iter().enumerate() {
        let (needs_arg, ins, out) = node.op.signature();
        if needs_arg != node.arg.is_some() {
            return bad(format!("node {i} ({}) argument mismatch", node.op));
        }
        if ins.len() != node.inputs.len() {
            return bad(format!("node {i} ({}) expects {} inputs", node.op, ins.len()));
        }
        for (&src, &want) in node.inputs.iter().zip(ins) {
            if src >= i {
                return bad(format!("node {i} reads node {src}, which is not earlier"));
            }
            let got = kinds[src];
            let ok = got == want || (want == Kind::Event && got == Kind::Set && node.op.is_relation());
            if !ok {
                return bad(format!("node {i} ({}) got {got:?}, wants {want:?}", node.op));
            }
        }
        kinds.push(out);
    }
    let last = kinds[kinds.len() - 1];
    if !matches!(last, Kind::Answer | Kind::Int) {
        return bad("terminal node does not produce an answer".into());
    }
    Ok(())
}

pub fn has_temporal_relation(program: &[Node]) -> bool {
    program.iter().any(|n| n.op.is_relation())
}
