use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::QaRecord;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

/// Lowercases and splits on anything that is not alphanumeric or `#`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '#'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// `<pad>`, `<unk>`, then the sorted unique tokens of every question.
pub fn vocabulary(records: &[QaRecord]) -> Vec<String> {
    let words: BTreeSet<String> = records.iter().flat_map(|r| tokenize(&r.text)).collect();
    [PAD.to_string(), UNK.to_string()].into_iter().chain(words).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    pub tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Self::new(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn from_records(records: &[QaRecord]) -> Self {
        Self::new(vocabulary(records))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad_id(&self) -> usize {
        self.index.get(PAD).copied().unwrap_or(0)
    }

    pub fn unk_id(&self) -> usize {
        self.index.get(UNK).copied().unwrap_or(1)
    }

    /// Token ids; words outside the vocabulary map to `<unk>`.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let unk = self.unk_id();
        tokenize(text).iter().map(|t| self.index.get(t).copied().unwrap_or(unk)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_sharp_and_drops_question_mark() {
        assert_eq!(tokenize("Is there a C# note?"), ["is", "there", "a", "c#", "note"]);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocabulary::new(vec![PAD.into(), UNK.into(), "note".into()]);
        assert_eq!(v.encode("note banana"), [2, 1]);
    }
}
