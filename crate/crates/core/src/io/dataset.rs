use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation unit: a candidate caption for an image plus its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionSample {
    pub id: String,
    pub image_ref: String,
    pub candidate: String,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_score: Option<f64>,
}

impl CaptionSample {
    pub fn validate(&self) -> Result<()> {
        if self.candidate.is_empty() {
            return Err(Error::Validation(format!("sample {:?}: empty candidate", self.id)));
        }
        if self.references.is_empty() {
            return Err(Error::Validation(format!("sample {:?}: no references", self.id)));
        }
        if let Some(y) = self.human_score {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::Validation(format!(
                    "sample {:?}: human_score {y} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Maps a 1–5 Likert judgment linearly onto [0, 1].
pub fn normalize_judgment(raw: i64) -> Result<f64> {
    if !(1..=5).contains(&raw) {
        return Err(Error::Domain(format!("judgment {raw} outside 1..=5")));
    }
    Ok((raw - 1) as f64 / 4.0)
}

/// Reads a JSON Lines file of arbitrary records. Blank lines are skipped;
/// parse errors carry the 1-based line number.
pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), &path.display().to_string())
}

pub(crate) fn parse_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, origin: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: format!("{origin}:{}", idx + 1),
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Serializes one record per line and writes the file atomically.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).map_err(|e| Error::Validation(e.to_string()))?);
        buf.push('\n');
    }
    super::write_atomic(path.as_ref(), buf.as_bytes())
}

/// Parses and validates a dataset from any line reader.
pub fn parse_dataset<R: BufRead>(reader: R, origin: &str) -> Result<Vec<CaptionSample>> {
    let samples: Vec<CaptionSample> = parse_jsonl(reader, origin)?;
    let mut seen = HashSet::with_capacity(samples.len());
    for sample in &samples {
        sample.validate()?;
        if !seen.insert(sample.id.as_str()) {
            return Err(Error::Validation(format!("duplicate sample id {:?}", sample.id)));
        }
    }
    Ok(samples)
}

/// Loads a JSON Lines dataset, preserving file order.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<CaptionSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file), &path.display().to_string())
}
