use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{label_set, QaRecord, QuestionError};

/// First line of a question file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaHeader {
    pub split: String,
    pub labels: Vec<String>,
}

impl QaHeader {
    pub fn new(split: &str) -> Self {
        Self { split: split.to_string(), labels: label_set().to_vec() }
    }
}

pub fn write_qa_jsonl(path: &Path, header: &QaHeader, records: &[QaRecord]) -> Result<(), QuestionError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_qa_jsonl(path: &Path) -> Result<(QaHeader, Vec<QaRecord>), QuestionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| QuestionError::Format(format!("{}: empty file", path.display())))??;
    let header: QaHeader = serde_json::from_str(&first)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}
