//! Extraction dump files: JSON-lines, one scored extraction per line.
//!
//! ```text
//! {"sentence_id": "s1", "predicate_index": 2, "predicate": {...}, "args": [...],
//!  "confidence": -0.12, "label_sequence": ["B-A1", "I-A1", "B-P", ...]}
//! ```
//!
//! A confidence of `-inf` is written as `null`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bio::LabelSequence;
use crate::corpus::{Extraction, Span};
use crate::decoder::Candidate;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn ser_conf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_conf<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub sentence_id: String,
    /// Candidate predicate position the sequence was decoded for. Older dumps
    /// may omit it; readers then fall back to the predicate head.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate_index: Option<usize>,
    pub predicate: Span,
    pub args: Vec<Span>,
    #[serde(serialize_with = "ser_conf", deserialize_with = "de_conf")]
    pub confidence: f64,
    #[serde(default)]
    pub label_sequence: LabelSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DumpRecord {
    pub fn from_candidate(c: &Candidate, config_hash: Option<&str>) -> Self {
        DumpRecord {
            sentence_id: c.extraction.sentence_id.clone(),
            predicate_index: Some(c.predicate_index),
            predicate: c.extraction.predicate,
            args: c.extraction.args.clone(),
            confidence: c.scored.confidence,
            label_sequence: c.scored.labels.clone(),
            config_hash: config_hash.map(str::to_string),
        }
    }

    pub fn predicate_position(&self) -> usize {
        self.predicate_index.unwrap_or(self.predicate.head)
    }

    pub fn extraction(&self) -> Extraction {
        let mut x = Extraction::new(self.sentence_id.clone(), self.predicate, self.args.clone());
        x.confidence = Some(self.confidence);
        x
    }
}

pub fn write_dump<W: Write>(records: &[DumpRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dump(records: &[DumpRecord], path: impl AsRef<Path>) -> Result<(), DumpError> {
    let path = path.as_ref();
    let io = |source| DumpError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_dump(records, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn load_dump(path: impl AsRef<Path>) -> Result<Vec<DumpRecord>, DumpError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| DumpError::Io {
        path: name.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DumpError::Io {
            path: name.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DumpError::Parse {
            path: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_infinity_roundtrips_through_null() {
        let r = DumpRecord {
            sentence_id: "s".into(),
            predicate_index: Some(1),
            predicate: Span::unheaded(1, 1),
            args: vec![Span::unheaded(0, 0)],
            confidence: f64::NEG_INFINITY,
            label_sequence: "B-A1 B-P".parse().unwrap(),
            config_hash: None,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"confidence\":null"));
        assert!(text.contains("\"label_sequence\":[\"B-A1\",\"B-P\"]"));
        let back: DumpRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
