use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Op, QuestionError};
use crate::attributes::{Brightness, GlobalPosition, Instrument, Loudness, Note, ORDINALS};

/// The eleven question families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Note,
    Instrument,
    Brightness,
    Loudness,
    AbsolutePosition,
    RelativePosition,
    GlobalPosition,
    Count,
    CountInstruments,
    Exist,
    CountComparison,
}

const MAX_COUNT: usize = 15;

impl QuestionType {
    pub const ALL: [QuestionType; 11] = [
        QuestionType::Note,
        QuestionType::Instrument,
        QuestionType::Brightness,
        QuestionType::Loudness,
        QuestionType::AbsolutePosition,
        QuestionType::RelativePosition,
        QuestionType::GlobalPosition,
        QuestionType::Count,
        QuestionType::CountInstruments,
        QuestionType::Exist,
        QuestionType::CountComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Note => "note",
            QuestionType::Instrument => "instrument",
            QuestionType::Brightness => "brightness",
            QuestionType::Loudness => "loudness",
            QuestionType::AbsolutePosition => "absolute_position",
            QuestionType::RelativePosition => "relative_position",
            QuestionType::GlobalPosition => "global_position",
            QuestionType::Count => "count",
            QuestionType::CountInstruments => "count_instruments",
            QuestionType::Exist => "exist",
            QuestionType::CountComparison => "count_comparison",
        }
    }

    /// Labels a question of this type may be answered with.
    pub fn answers(self) -> Vec<String> {
        fn owned(xs: impl IntoIterator<Item = &'static str>) -> Vec<String> {
            xs.into_iter().map(str::to_string).collect()
        }
        match self {
            QuestionType::Note => owned(Note::ALL.iter().map(|n| n.label())),
            QuestionType::Instrument => owned(Instrument::ALL.iter().map(|n| n.label())),
            QuestionType::Brightness => owned(Brightness::ALL.iter().map(|n| n.label())),
            QuestionType::Loudness => owned(Loudness::ALL.iter().map(|n| n.label())),
            QuestionType::AbsolutePosition | QuestionType::RelativePosition => owned(ORDINALS),
            QuestionType::GlobalPosition => owned(GlobalPosition::ALL.iter().map(|n| n.label())),
            QuestionType::Count | QuestionType::CountInstruments => (0..=MAX_COUNT).map(|n| n.to_string()).collect(),
            QuestionType::Exist | QuestionType::CountComparison => owned(["yes", "no"]),
        }
    }

    /// Terminal ops allowed for this family.
    pub fn terminals(self) -> &'static [Op] {
        match self {
            QuestionType::Note => &[Op::QueryNote],
            QuestionType::Instrument => &[Op::QueryInstrument],
            QuestionType::Brightness => &[Op::QueryBrightness],
            QuestionType::Loudness => &[Op::QueryLoudness],
            QuestionType::AbsolutePosition => &[Op::QueryAbsolutePosition],
            QuestionType::RelativePosition => &[Op::QueryRelativePosition],
            QuestionType::GlobalPosition => &[Op::QueryGlobalPosition],
            QuestionType::Count => &[Op::Count],
            QuestionType::CountInstruments => &[Op::CountDistinctInstruments],
            QuestionType::Exist => &[Op::Exist],
            QuestionType::CountComparison => &[Op::CompareEqual, Op::CompareMore, Op::CompareFewer],
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuestionType {
    type Err = QuestionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuestionType::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| QuestionError::Format(format!("unknown question type `{s}`")))
    }
}

/// Answer labels in model output order.
pub fn label_set() -> &'static [String] {
    static LABELS: OnceLock<Vec<String>> = OnceLock::new();
    LABELS.get_or_init(|| {
        let mut out: Vec<String> = Vec::new();
        for t in QuestionType::ALL {
            for a in t.answers() {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
        }
        out
    })
}

pub const LABEL_COUNT: usize = 58;

pub fn label_index(label: &str) -> Option<usize> {
    label_set().iter().position(|l| l == label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_set_is_union_of_domains() {
        assert_eq!(label_set().len(), LABEL_COUNT);
        assert_eq!(label_index("A"), Some(0));
        assert_eq!(label_index("no"), Some(LABEL_COUNT - 1));
        let domain_total: usize = [12, 6, 2, 2, 15, 3, 16, 2].iter().sum();
        assert_eq!(domain_total, LABEL_COUNT);
    }
}
