//! Categorical attributes shared by banks, scenes and questions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown {kind} `{value}`")]
pub struct ParseAttributeError {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! attribute {
    ($(#[$meta:meta])* $name:ident, $kind:literal, [$($variant:ident => $label:literal),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = ParseAttributeError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    _ => Err(ParseAttributeError { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

attribute!(Instrument, "instrument", [
    Bass => "bass",
    Cello => "cello",
    Clarinet => "clarinet",
    Flute => "flute",
    Trumpet => "trumpet",
    Violin => "violin",
]);

attribute!(
    /// Chromatic note labels in the order used for answers.
    Note, "note", [
    A => "A",
    ASharp => "A#",
    B => "B",
    C => "C",
    CSharp => "C#",
    D => "D",
    DSharp => "D#",
    E => "E",
    F => "F",
    FSharp => "F#",
    G => "G",
    GSharp => "G#",
]);

attribute!(Brightness, "brightness", [Bright => "bright", Dark => "dark"]);

attribute!(Loudness, "loudness", [Quiet => "quiet", Loud => "loud"]);

attribute!(GlobalPosition, "global position", [
    Beginning => "beginning",
    Middle => "middle",
    End => "end",
]);

impl Note {
    /// Semitones above C in the same octave.
    pub fn semitone_from_c(self) -> i32 {
        match self {
            Note::C => 0,
            Note::CSharp => 1,
            Note::D => 2,
            Note::DSharp => 3,
            Note::E => 4,
            Note::F => 5,
            Note::FSharp => 6,
            Note::G => 7,
            Note::GSharp => 8,
            Note::A => 9,
            Note::ASharp => 10,
            Note::B => 11,
        }
    }
}

/// Ordinal words used for positions, 1-based.
pub const ORDINALS: [&str; 15] = [
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

pub fn ordinal(k: usize) -> Option<&'static str> {
    k.checked_sub(1).and_then(|i| ORDINALS.get(i)).copied()
}

pub fn parse_ordinal(word: &str) -> Option<usize> {
    ORDINALS.iter().position(|&w| w == word).map(|i| i + 1)
}
