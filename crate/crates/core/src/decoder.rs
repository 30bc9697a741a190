//! Transition-constrained decoding over independent per-position label
//! distributions.
//!
//! Emissions do not depend on neighbouring labels, so the exact k best valid
//! sequences fall out of a per-state k-best Viterbi in `O(n · L² · k)`.
//! Ordering is by total log-probability, descending, with exact ties broken
//! by the lexicographically smallest label-id sequence.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::bio::{self, LabelSequence, LabelSet};
use crate::corpus::{Extraction, Sentence};
use crate::tagger::{LabelDistributions, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSequence {
    pub labels: LabelSequence,
    /// Length-normalized log-probability; `-inf` if any label has probability 0.
    pub confidence: f64,
}

/// Average per-token log-probability of `labels`, summed left to right.
pub fn confidence(dists: &LabelDistributions, labels: &LabelSequence) -> f64 {
    assert_eq!(dists.len(), labels.len(), "label sequence length mismatch");
    let n = labels.len();
    let mut sum = 0.0;
    for (t, l) in labels.0.iter().enumerate() {
        sum += dists.log_prob(t, l.id());
    }
    sum / n as f64
}

const START: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
struct Entry {
    score: f64,
    prev_label: usize,
    prev_rank: usize,
}

struct Lattice {
    /// `cells[t][label]` holds up to k entries, best first.
    cells: Vec<Vec<Vec<Entry>>>,
}

impl Lattice {
    fn path(&self, t: usize, label: usize, rank: usize) -> Vec<usize> {
        let mut out = vec![0; t + 1];
        let (mut l, mut r) = (label, rank);
        for pos in (0..=t).rev() {
            out[pos] = l;
            let e = self.cells[pos][l][r];
            l = e.prev_label;
            r = e.prev_rank;
        }
        out
    }

    /// Orders two candidates ending in the same position: better score first,
    /// then lexicographically smaller prefix (`a_prefix` / `b_prefix` are the
    /// entries they extend at `t - 1`, `last_*` their final labels).
    fn compare(
        &self,
        t: usize,
        a: (f64, usize, usize, usize),
        b: (f64, usize, usize, usize),
    ) -> Ordering {
        match b.0.partial_cmp(&a.0).expect("scores are never NaN") {
            Ordering::Equal => {}
            other => return other,
        }
        let path = |(_, last, pl, pr): (f64, usize, usize, usize)| {
            let mut p = if pl == START { Vec::new() } else { self.path(t - 1, pl, pr) };
            p.push(last);
            p
        };
        path(a).cmp(&path(b))
    }
}

/// The exact `k` best transition-valid label sequences, best first.
pub fn kbest(dists: &LabelDistributions, k: usize) -> Vec<ScoredSequence> {
    assert!(k >= 1, "k must be at least 1");
    let n = dists.len();
    let num = dists.num_labels();
    if n == 0 {
        return Vec::new();
    }
    let allowed = bio::transition_table(LabelSet::with_size(num));
    let opens: Vec<bool> = (0..num)
        .map(|l| bio::is_valid_transition(None, bio::Label::from_id(l)))
        .collect();

    let mut lattice = Lattice {
        cells: Vec::with_capacity(n),
    };
    lattice.cells.push(
        (0..num)
            .map(|l| {
                if opens[l] {
                    vec![Entry {
                        score: dists.log_prob(0, l),
                        prev_label: START,
                        prev_rank: 0,
                    }]
                } else {
                    Vec::new()
                }
            })
            .collect(),
    );
    for t in 1..n {
        let mut row = Vec::with_capacity(num);
        for l in 0..num {
            let emit = dists.log_prob(t, l);
            let mut cands: Vec<(f64, usize, usize, usize)> = Vec::new();
            for (pl, prev) in lattice.cells[t - 1].iter().enumerate() {
                if !allowed[pl][l] {
                    continue;
                }
                for (pr, e) in prev.iter().enumerate() {
                    cands.push((e.score + emit, l, pl, pr));
                }
            }
            cands.sort_by(|a, b| lattice.compare(t, *a, *b));
            cands.truncate(k);
            row.push(
                cands
                    .into_iter()
                    .map(|(score, _, pl, pr)| Entry {
                        score,
                        prev_label: pl,
                        prev_rank: pr,
                    })
                    .collect(),
            );
        }
        lattice.cells.push(row);
    }

    let last = n - 1;
    let mut finals: Vec<(f64, usize, usize)> = lattice.cells[last]
        .iter()
        .enumerate()
        .flat_map(|(l, es)| es.iter().enumerate().map(move |(r, e)| (e.score, l, r)))
        .collect();
    finals.sort_by(|a, b| match b.0.partial_cmp(&a.0).expect("scores are never NaN") {
        Ordering::Equal => lattice.path(last, a.1, a.2).cmp(&lattice.path(last, b.1, b.2)),
        other => other,
    });
    if finals.iter().any(|f| f.0.is_finite()) {
        finals.retain(|f| f.0.is_finite());
    }
    finals.truncate(k);
    finals
        .into_iter()
        .map(|(score, l, r)| ScoredSequence {
            labels: LabelSequence::from_ids(&lattice.path(last, l, r)),
            confidence: score / n as f64,
        })
        .collect()
}

/// The single best transition-valid label sequence.
pub fn viterbi(dists: &LabelDistributions) -> ScoredSequence {
    kbest(dists, 1)
        .into_iter()
        .next()
        .unwrap_or(ScoredSequence {
            labels: LabelSequence(Vec::new()),
            confidence: 0.0,
        })
}

/// One decoded candidate for a `(sentence, predicate)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub predicate_index: usize,
    pub scored: ScoredSequence,
    pub extraction: Extraction,
}

/// Decodes the k best sequences for every candidate predicate of `sentence`.
/// Sequences without a predicate are dropped; among sequences decoding to the
/// same span tuple only the most confident survives.
pub fn extract(model: &Model, sentence: &Sentence, k: usize) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &v in &sentence.candidate_predicates {
        let dists = model.forward(sentence, v, None);
        let mut seen = HashSet::new();
        for scored in kbest(&dists, k) {
            let decoded = bio::decode(&scored.labels, &sentence.id)
                .expect("decoder output is always transition-valid");
            let Some(mut extraction) = decoded else {
                continue;
            };
            if !seen.insert(extraction.bounds_key()) {
                continue;
            }
            extraction.confidence = Some(scored.confidence);
            out.push(Candidate {
                predicate_index: v,
                scored,
                extraction,
            });
        }
    }
    out
}

/// [`extract`] over many sentences, in parallel, results in input order.
pub fn extract_all(model: &Model, sentences: &[Sentence], k: usize) -> Vec<Candidate> {
    sentences
        .par_iter()
        .map(|s| extract(model, s, k))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
