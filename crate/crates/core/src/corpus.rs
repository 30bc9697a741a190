//! Sentences, gold extractions, and the JSON-lines dataset format.
//!
//! A dataset file holds one JSON object per line:
//!
//! ```text
//! {"id": "s1", "tokens": ["Barack", "Obama", "was", "born", "in", "Hawaii"],
//!  "candidate_predicates": [2, 3],
//!  "extractions": [{"predicate": {"start": 2, "end": 4, "head": 3},
//!                   "args": [{"start": 0, "end": 1, "head": 1},
//!                            {"start": 5, "end": 5, "head": 5}]}]}
//! ```
//!
//! All indices are 0-based and inclusive. Missing `head` fields fall back to
//! the span start, with a warning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence}: {message}")]
    Invalid { sentence: String, message: String },
    #[error("duplicate sentence id {0}")]
    DuplicateId(String),
}

impl CorpusError {
    fn invalid(sentence: &str, message: impl Into<String>) -> Self {
        CorpusError::Invalid {
            sentence: sentence.to_string(),
            message: message.into(),
        }
    }
}

/// A contiguous token span with its syntactic head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub head: usize,
}

impl Span {
    pub fn new(start: usize, end: usize, head: usize) -> Self {
        Span { start, end, head }
    }

    /// Span whose head defaults to its first token.
    pub fn unheaded(start: usize, end: usize) -> Self {
        Span {
            start,
            end,
            head: start,
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Same token boundaries, ignoring heads.
    pub fn same_bounds(&self, other: &Span) -> bool {
        self.start == other.start && self.end == other.end
    }

    fn check(&self, n: usize) -> Result<(), String> {
        if self.start > self.end {
            return Err(format!("span {}-{} has start after end", self.start, self.end));
        }
        if self.end >= n {
            return Err(format!(
                "span {}-{} exceeds sentence length {}",
                self.start, self.end, n
            ));
        }
        if !self.contains(self.head) {
            return Err(format!(
                "head {} outside span {}-{}",
                self.head, self.start, self.end
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub candidate_predicates: Vec<usize>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Polarity of an annotated extraction: +1 if it matches gold, -1 otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

impl Serialize for Polarity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Polarity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(serde::de::Error::custom(format!(
                "polarity must be 1 or -1, got {other}"
            ))),
        }
    }
}

/// One tuple: a predicate span and its arguments, ordered by start index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub sentence_id: String,
    pub predicate: Span,
    pub args: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
}

impl Extraction {
    pub fn new(sentence_id: impl Into<String>, predicate: Span, mut args: Vec<Span>) -> Self {
        args.sort_by_key(|a| (a.start, a.end));
        Extraction {
            sentence_id: sentence_id.into(),
            predicate,
            args,
            confidence: None,
            polarity: None,
        }
    }

    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        std::iter::once(&self.predicate).chain(self.args.iter())
    }

    /// Returns the first pair of overlapping spans, if any.
    pub fn find_overlap(&self) -> Option<(Span, Span)> {
        let spans: Vec<&Span> = self.spans().collect();
        for (i, a) in spans.iter().enumerate() {
            for b in &spans[i + 1..] {
                if a.overlaps(b) {
                    return Some((**a, **b));
                }
            }
        }
        None
    }

    /// Span boundaries only, used to deduplicate decoded extractions.
    pub fn bounds_key(&self) -> Vec<(usize, usize)> {
        self.spans().map(|s| (s.start, s.end)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub gold: BTreeMap<String, Vec<Extraction>>,
    /// Sentences whose gold set became empty during cleaning.
    pub emptied: BTreeSet<String>,
}

impl Dataset {
    pub fn num_extractions(&self) -> usize {
        self.gold.values().map(Vec::len).sum()
    }

    pub fn gold_for(&self, sentence_id: &str) -> &[Extraction] {
        self.gold.get(sentence_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sentence_index(&self) -> HashMap<&str, &Sentence> {
        self.sentences.iter().map(|s| (s.id.as_str(), s)).collect()
    }

    /// Checks every invariant a loaded dataset must satisfy.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut lengths = HashMap::new();
        for s in &self.sentences {
            if lengths.insert(s.id.as_str(), s.len()).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
            if s.tokens.is_empty() {
                return Err(CorpusError::invalid(&s.id, "sentence has no tokens"));
            }
            if s.candidate_predicates.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CorpusError::invalid(
                    &s.id,
                    "candidate predicates not strictly increasing",
                ));
            }
            if let Some(&v) = s.candidate_predicates.iter().find(|&&v| v >= s.len()) {
                return Err(CorpusError::invalid(
                    &s.id,
                    format!("candidate predicate {v} out of bounds"),
                ));
            }
        }
        for (id, extractions) in &self.gold {
            let n = *lengths
                .get(id.as_str())
                .ok_or_else(|| CorpusError::invalid(id, "gold extraction for unknown sentence"))?;
            for x in extractions {
                if &x.sentence_id != id {
                    return Err(CorpusError::invalid(id, "extraction filed under wrong sentence"));
                }
                for span in x.spans() {
                    span.check(n).map_err(|m| CorpusError::invalid(id, m))?;
                }
                if let Some((a, b)) = x.find_overlap() {
                    return Err(CorpusError::invalid(
                        id,
                        format!(
                            "overlapping spans {}-{} and {}-{}",
                            a.start, a.end, b.start, b.end
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpan {
    start: usize,
    end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawExtraction {
    predicate: Option<RawSpan>,
    #[serde(default)]
    args: Vec<RawSpan>,
}

#[derive(Serialize, Deserialize)]
struct RawSentence {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    candidate_predicates: Vec<usize>,
    #[serde(default)]
    extractions: Vec<RawExtraction>,
}

fn resolve_span(raw: &RawSpan, headless: &mut usize) -> Span {
    match raw.head {
        Some(h) => Span::new(raw.start, raw.end, h),
        None => {
            *headless += 1;
            Span::unheaded(raw.start, raw.end)
        }
    }
}

/// Parses JSON-lines dataset text. Blank lines are skipped.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset, CorpusError> {
    let mut dataset = Dataset::default();
    let mut headless = 0usize;
    let mut predicate_less = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSentence = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut extractions = Vec::with_capacity(raw.extractions.len());
        for rx in &raw.extractions {
            let args: Vec<Span> = rx
                .args
                .iter()
                .map(|a| resolve_span(a, &mut headless))
                .collect();
            let predicate = match &rx.predicate {
                Some(p) => resolve_span(p, &mut headless),
                None => {
                    // Kept out of the dataset entirely: there is no span to hold.
                    predicate_less += 1;
                    continue;
                }
            };
            extractions.push(Extraction::new(raw.id.clone(), predicate, args));
        }
        if !extractions.is_empty() {
            dataset.gold.insert(raw.id.clone(), extractions);
        }
        dataset.sentences.push(Sentence {
            id: raw.id,
            tokens: raw.tokens,
            candidate_predicates: raw.candidate_predicates,
        });
    }
    if headless > 0 {
        warn!(
            "{headless} span(s) carry no head index; falling back to head = span start. \
             Head-inclusion matching against this data is only as good as that fallback."
        );
    }
    if predicate_less > 0 {
        warn!("dropped {predicate_less} extraction(s) without a predicate span");
    }
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(BufReader::new(file))
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let raw_span = |s: &Span| RawSpan {
        start: s.start,
        end: s.end,
        head: Some(s.head),
    };
    for s in &dataset.sentences {
        let raw = RawSentence {
            id: s.id.clone(),
            tokens: s.tokens.clone(),
            candidate_predicates: s.candidate_predicates.clone(),
            extractions: dataset
                .gold_for(&s.id)
                .iter()
                .map(|x| RawExtraction {
                    predicate: Some(raw_span(&x.predicate)),
                    args: x.args.iter().map(raw_span).collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_dataset(dataset, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Whether an extraction survives cleaning: at least two arguments and no
/// two arguments with identical boundaries. Predicate-less extractions never
/// reach a `Dataset`.
pub fn keeps(x: &Extraction) -> bool {
    if x.args.len() < 2 {
        return false;
    }
    for (i, a) in x.args.iter().enumerate() {
        if x.args[i + 1..].iter().any(|b| a.same_bounds(b)) {
            return false;
        }
    }
    true
}

/// Drops noisy gold extractions. Sentences are never removed; those whose
/// gold set empties are recorded in `emptied`.
pub fn clean(d: &Dataset) -> Dataset {
    let mut out = Dataset {
        sentences: d.sentences.clone(),
        gold: BTreeMap::new(),
        emptied: d.emptied.clone(),
    };
    for (id, extractions) in &d.gold {
        let kept: Vec<Extraction> = extractions.iter().filter(|x| keeps(x)).cloned().collect();
        if kept.is_empty() {
            out.emptied.insert(id.clone());
        } else {
            out.gold.insert(id.clone(), kept);
        }
    }
    out
}

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK_ID: usize = 0;
    pub const PAD_ID: usize = 1;

    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec![UNK.to_string(), PAD.to_string()];
        all.extend(words.into_iter().filter(|w| w != UNK && w != PAD));
        let mut v = Vocab {
            words: all,
            index: HashMap::new(),
        };
        v.reindex();
        v
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Builds a vocabulary of every token occurring at least `min_count` times,
/// ordered by descending frequency then lexicographically.
pub fn build_vocab(d: &Dataset, min_count: usize) -> Vocab {
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &d.sentences {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocab::from_words(entries.into_iter().map(|(w, _)| w.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, n: usize, extractions: &str) -> String {
        let tokens: Vec<String> = (0..n).map(|i| format!("\"w{i}\"")).collect();
        format!(
            "{{\"id\":\"{id}\",\"tokens\":[{}],\"candidate_predicates\":[1],\"extractions\":[{extractions}]}}",
            tokens.join(",")
        )
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        let d = parse_dataset("".as_bytes()).unwrap();
        assert_eq!(d.sentences.len(), 0);
        assert_eq!(d.num_extractions(), 0);
    }

    #[test]
    fn out_of_bounds_arg_names_sentence() {
        let text = line(
            "bad-one",
            3,
            r#"{"predicate":{"start":1,"end":1,"head":1},"args":[{"start":0,"end":0,"head":0},{"start":2,"end":3,"head":2}]}"#,
        );
        let err = parse_dataset(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("bad-one"), "{err}");
    }

    #[test]
    fn parse_error_reports_line_number() {
        let text = format!("{}\n{{not json\n", line("a", 2, ""));
        match parse_dataset(text.as_bytes()).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{}\n{}\n", line("a", 2, ""), line("a", 2, ""));
        assert!(matches!(
            parse_dataset(text.as_bytes()),
            Err(CorpusError::DuplicateId(id)) if id == "a"
        ));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let text = line(
            "ov",
            4,
            r#"{"predicate":{"start":1,"end":2,"head":1},"args":[{"start":0,"end":1,"head":0},{"start":3,"end":3,"head":3}]}"#,
        );
        let err = parse_dataset(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ov") && err.to_string().contains("overlapping"));
    }

    #[test]
    fn missing_head_falls_back_to_start() {
        let text = line(
            "h",
            4,
            r#"{"predicate":{"start":1,"end":2},"args":[{"start":0,"end":0},{"start":3,"end":3}]}"#,
        );
        let d = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(d.gold_for("h")[0].predicate.head, 1);
    }

    fn x(pred: (usize, usize), args: &[(usize, usize)]) -> Extraction {
        Extraction::new(
            "s",
            Span::unheaded(pred.0, pred.1),
            args.iter().map(|&(a, b)| Span::unheaded(a, b)).collect(),
        )
    }

    #[test]
    fn clean_filters() {
        assert!(!keeps(&x((1, 1), &[(0, 0)])));
        let dup = Extraction {
            args: vec![Span::unheaded(0, 0), Span::unheaded(0, 0)],
            ..x((1, 1), &[])
        };
        assert!(!keeps(&dup));
        assert!(keeps(&x((1, 1), &[(0, 0), (2, 3)])));
    }

    #[test]
    fn clean_keeps_emptied_sentences_and_flags_them() {
        let mut d = Dataset::default();
        d.sentences.push(Sentence {
            id: "s".into(),
            tokens: vec!["a".into(), "b".into()],
            candidate_predicates: vec![1],
        });
        d.gold.insert("s".into(), vec![x((1, 1), &[(0, 0)])]);
        let c = clean(&d);
        assert_eq!(c.sentences.len(), 1);
        assert!(c.gold_for("s").is_empty());
        assert!(c.emptied.contains("s"));
        assert_eq!(clean(&c), c);
    }

    #[test]
    fn vocab_threshold_and_order() {
        let mut d = Dataset::default();
        d.sentences.push(Sentence {
            id: "s".into(),
            tokens: ["a", "b", "a", "a", "c", "c"].iter().map(|s| s.to_string()).collect(),
            candidate_predicates: vec![],
        });
        let v = build_vocab(&d, 2);
        assert_eq!(v.words(), &[UNK, PAD, "a", "c"]);
        let v1 = build_vocab(&d, 1);
        assert_eq!(v1.words(), &[UNK, PAD, "a", "c", "b"]);
        assert_eq!(v1, build_vocab(&d, 1));
        assert_eq!(v.id("b"), Vocab::UNK_ID);
    }
}
