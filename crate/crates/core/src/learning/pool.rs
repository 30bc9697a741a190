use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::bio::LabelSequence;
use crate::corpus::{Dataset, Polarity};
use crate::dump::DumpRecord;
use crate::evaluation::matches;

/// A generated label sequence annotated against gold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sentence_id: String,
    pub predicate: usize,
    pub labels: LabelSequence,
    pub polarity: Polarity,
    pub source_iteration: usize,
}

impl LabeledSample {
    pub fn key(&self) -> PoolKey {
        PoolKey {
            sentence_id: self.sentence_id.clone(),
            predicate: self.predicate,
            labels: self.labels.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoolKey {
    pub sentence_id: String,
    pub predicate: usize,
    pub labels: LabelSequence,
}

/// Marks each candidate positive iff it matches any gold extraction of its
/// sentence under the evaluation matcher.
pub fn annotate(
    candidates: &[DumpRecord],
    gold: &Dataset,
    iteration: usize,
) -> Result<Vec<LabeledSample>, LearnError> {
    let known = gold.sentence_index();
    candidates
        .iter()
        .map(|c| {
            if !known.contains_key(c.sentence_id.as_str()) {
                return Err(LearnError::UnknownSentence(c.sentence_id.clone()));
            }
            let pred = c.extraction();
            let positive = gold
                .gold_for(&c.sentence_id)
                .iter()
                .any(|g| matches(&pred, g));
            Ok(LabeledSample {
                sentence_id: c.sentence_id.clone(),
                predicate: c.predicate_position(),
                labels: c.label_sequence.clone(),
                polarity: if positive {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
                source_iteration: iteration,
            })
        })
        .collect()
}

/// Union of every annotated candidate seen so far. The first polarity seen for
/// a key is kept.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionPool {
    samples: BTreeMap<PoolKey, LabeledSample>,
}

impl ExtractionPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Inserts unseen samples; returns how many were new.
    pub fn extend(&mut self, samples: impl IntoIterator<Item = LabeledSample>) -> usize {
        let before = self.samples.len();
        for s in samples {
            self.samples.entry(s.key()).or_insert(s);
        }
        self.samples.len() - before
    }

    /// Samples in key order.
    pub fn iter(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.values()
    }

    pub fn positives(&self) -> usize {
        self.iter()
            .filter(|s| s.polarity == Polarity::Positive)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Extraction, Sentence, Span};

    fn gold() -> Dataset {
        let mut d = Dataset::default();
        for (id, with_gold) in [("g", true), ("e", false)] {
            d.sentences.push(Sentence {
                id: id.into(),
                tokens: (0..5).map(|i| format!("w{i}")).collect(),
                candidate_predicates: vec![2],
            });
            if with_gold {
                d.gold.insert(
                    id.into(),
                    vec![Extraction::new(
                        id,
                        Span::new(2, 2, 2),
                        vec![Span::new(0, 1, 1), Span::new(3, 4, 3)],
                    )],
                );
            }
        }
        d
    }

    fn record(id: &str, labels: &str) -> DumpRecord {
        let labels: LabelSequence = labels.parse().unwrap();
        let x = crate::bio::decode(&labels, id).unwrap().unwrap();
        DumpRecord {
            sentence_id: id.into(),
            predicate_index: Some(2),
            predicate: x.predicate,
            args: x.args,
            confidence: -0.5,
            label_sequence: labels,
            config_hash: None,
        }
    }

    #[test]
    fn polarity_follows_matcher() {
        let d = gold();
        let samples = annotate(
            &[
                record("g", "B-A1 I-A1 B-P B-A2 I-A2"),
                record("e", "B-A1 I-A1 B-P B-A2 I-A2"),
                record("g", "O B-A1 B-P O O"),
            ],
            &d,
            1,
        )
        .unwrap();
        assert_eq!(samples[0].polarity, Polarity::Positive);
        assert_eq!(samples[1].polarity, Polarity::Negative);
        // Contains gold arg1's head but drops arg2.
        assert_eq!(samples[2].polarity, Polarity::Negative);
        assert_eq!(annotate(&[record("g", "B-A1 I-A1 B-P B-A2 I-A2")], &d, 1).unwrap()[0], samples[0]);
    }

    #[test]
    fn unknown_sentence_is_an_error() {
        assert!(annotate(&[record("zz", "B-P O O O O")], &gold(), 1).is_err());
    }

    #[test]
    fn pool_keeps_first_seen_and_grows_monotonically() {
        let d = gold();
        let mut pool = ExtractionPool::new();
        let first = annotate(&[record("g", "B-A1 I-A1 B-P B-A2 I-A2")], &d, 1).unwrap();
        assert_eq!(pool.extend(first), 1);
        let mut again = annotate(&[record("g", "B-A1 I-A1 B-P B-A2 I-A2")], &d, 2).unwrap();
        again[0].polarity = Polarity::Negative;
        assert_eq!(pool.extend(again), 0);
        let kept = pool.iter().next().unwrap();
        assert_eq!((kept.polarity, kept.source_iteration), (Polarity::Positive, 1));
        assert_eq!(pool.extend(annotate(&[record("e", "B-P O O O O")], &d, 2).unwrap()), 1);
        assert_eq!(pool.len(), 2);
    }
}
