//! Head-inclusion matching, precision-recall sweeps, AUC and best F1.
//!
//! Conventions, recorded in every [`EvalReport`]:
//! - AUC: trapezoid over the sweep, anchored at recall 0 with the first
//!   point's precision.
//! - F1: maximum over the sweep.
//! - Credit: greedy in confidence order; a prediction claims the first
//!   unclaimed gold extraction (gold file order) it matches.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::ser::SerializeTuple;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{Dataset, Extraction};
use crate::decoder::confidence;
use crate::dump::DumpRecord;
use crate::tagger::Model;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("prediction refers to unknown sentence {0}")]
    UnknownSentence(String),
    #[error("sentence {sentence}: label sequence has length {labels}, sentence has {tokens} tokens")]
    LengthMismatch {
        sentence: String,
        labels: usize,
        tokens: usize,
    },
}

/// Whether `pred` counts as a correct rendering of `gold`: same argument
/// count, and every predicted span (in order) contains the head of its gold
/// counterpart.
pub fn matches(pred: &Extraction, gold: &Extraction) -> bool {
    pred.args.len() == gold.args.len()
        && pred.predicate.contains(gold.predicate.head)
        && pred
            .args
            .iter()
            .zip(&gold.args)
            .all(|(p, g)| p.contains(g.head))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Credit {
    /// Each gold extraction is claimed by at most one prediction.
    #[default]
    Greedy,
    /// A prediction is correct if it matches any gold extraction; recall still
    /// counts distinct gold extractions.
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Serialize for PrPoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        let thr = self.threshold.is_finite().then_some(self.threshold);
        t.serialize_element(&thr)?;
        t.serialize_element(&self.precision)?;
        t.serialize_element(&self.recall)?;
        t.end()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub predicted: usize,
    pub gold: usize,
    pub matched: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conventions {
    pub auc: &'static str,
    pub f1: &'static str,
    pub credit: &'static str,
}

impl Conventions {
    fn new(credit: Credit) -> Self {
        Conventions {
            auc: "trapezoid+anchor",
            f1: "sweep-max",
            credit: match credit {
                Credit::Greedy => "greedy",
                Credit::Any => "any",
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub best_f1: f64,
    pub points: Vec<PrPoint>,
    pub counts: Counts,
    pub conventions: Conventions,
}

fn order(a: &Extraction, b: &Extraction) -> Ordering {
    let ca = a.confidence.unwrap_or(f64::NEG_INFINITY);
    let cb = b.confidence.unwrap_or(f64::NEG_INFINITY);
    cb.partial_cmp(&ca)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.sentence_id.cmp(&b.sentence_id))
        .then_with(|| a.bounds_key().cmp(&b.bounds_key()))
}

/// Sweeps predictions in descending confidence, emitting one point per prefix.
pub fn pr_curve(
    predictions: &[Extraction],
    gold: &Dataset,
    credit: Credit,
) -> Result<(Vec<PrPoint>, Counts), EvalError> {
    let total_gold = gold.num_extractions();
    if total_gold == 0 {
        return Err(EvalError::EmptyGold);
    }
    let mut sorted: Vec<&Extraction> = predictions.iter().collect();
    sorted.sort_by(|a, b| order(a, b));

    let mut claimed: HashMap<&str, Vec<bool>> = gold
        .gold
        .iter()
        .map(|(id, xs)| (id.as_str(), vec![false; xs.len()]))
        .collect();
    let mut correct = 0usize;
    let mut credited = 0usize;
    let mut points = Vec::with_capacity(sorted.len());
    for (i, pred) in sorted.iter().enumerate() {
        let golds = gold.gold_for(&pred.sentence_id);
        if let Some(flags) = claimed.get_mut(pred.sentence_id.as_str()) {
            match credit {
                Credit::Greedy => {
                    if let Some(j) = (0..golds.len()).find(|&j| !flags[j] && matches(pred, &golds[j])) {
                        flags[j] = true;
                        correct += 1;
                        credited += 1;
                    }
                }
                Credit::Any => {
                    let hits: Vec<usize> = (0..golds.len()).filter(|&j| matches(pred, &golds[j])).collect();
                    if !hits.is_empty() {
                        correct += 1;
                    }
                    for j in hits {
                        if !flags[j] {
                            flags[j] = true;
                            credited += 1;
                        }
                    }
                }
            }
        }
        points.push(PrPoint {
            threshold: pred.confidence.unwrap_or(f64::NEG_INFINITY),
            precision: correct as f64 / (i + 1) as f64,
            recall: credited as f64 / total_gold as f64,
        });
    }
    let counts = Counts {
        predicted: predictions.len(),
        gold: total_gold,
        matched: credited,
    };
    Ok((points, counts))
}

/// Trapezoidal area under precision-vs-recall, with an anchor at recall 0
/// carrying the first point's precision.
pub fn auc(points: &[PrPoint]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let (mut r0, mut p0) = (0.0, first.precision);
    for p in points {
        area += (p.recall - r0) * (p.precision + p0) / 2.0;
        r0 = p.recall;
        p0 = p.precision;
    }
    area.clamp(0.0, 1.0)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn best_f1(points: &[PrPoint]) -> f64 {
    points
        .iter()
        .map(|p| f1(p.precision, p.recall))
        .fold(0.0, f64::max)
}

pub fn evaluate(
    predictions: &[Extraction],
    gold: &Dataset,
    credit: Credit,
) -> Result<EvalReport, EvalError> {
    let (points, counts) = pr_curve(predictions, gold, credit)?;
    Ok(EvalReport {
        auc: auc(&points),
        best_f1: best_f1(&points),
        points,
        counts,
        conventions: Conventions::new(credit),
    })
}

pub fn evaluate_dump(
    records: &[DumpRecord],
    gold: &Dataset,
    credit: Credit,
) -> Result<EvalReport, EvalError> {
    let predictions: Vec<Extraction> = records.iter().map(DumpRecord::extraction).collect();
    evaluate(&predictions, gold, credit)
}

/// Rescores every record's label sequence under `model`, keeping spans fixed.
pub fn rescore_dump(
    records: &[DumpRecord],
    model: &Model,
    gold: &Dataset,
) -> Result<Vec<DumpRecord>, EvalError> {
    let sentences = gold.sentence_index();
    let mut cache: HashMap<(&str, usize), crate::tagger::LabelDistributions> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let s = sentences
            .get(r.sentence_id.as_str())
            .ok_or_else(|| EvalError::UnknownSentence(r.sentence_id.clone()))?;
        if r.label_sequence.len() != s.len() {
            return Err(EvalError::LengthMismatch {
                sentence: s.id.clone(),
                labels: r.label_sequence.len(),
                tokens: s.len(),
            });
        }
        let v = r.predicate_position();
        let dists = cache
            .entry((s.id.as_str(), v))
            .or_insert_with(|| model.forward(s, v, None));
        let mut rescored = r.clone();
        rescored.confidence = confidence(dists, &r.label_sequence);
        out.push(rescored);
    }
    Ok(out)
}

/// Reranks a fixed dump with `model`'s confidences and evaluates it.
pub fn rerank_eval(
    base_dump: &[DumpRecord],
    model: &Model,
    gold: &Dataset,
    credit: Credit,
) -> Result<EvalReport, EvalError> {
    let rescored = rescore_dump(base_dump, model, gold)?;
    evaluate_dump(&rescored, gold, credit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sentence, Span};

    fn x(id: &str, pred: (usize, usize, usize), args: &[(usize, usize, usize)]) -> Extraction {
        Extraction::new(
            id,
            Span::new(pred.0, pred.1, pred.2),
            args.iter().map(|&(a, b, h)| Span::new(a, b, h)).collect(),
        )
    }

    #[test]
    fn exact_spans_match() {
        let g = x("s", (2, 2, 2), &[(0, 1, 1), (3, 4, 4)]);
        assert!(matches(&g, &g));
    }

    #[test]
    fn containment_suffices() {
        let gold = x("s", (4, 4, 4), &[(2, 3, 2), (5, 5, 5)]);
        let pred = x("s", (4, 4, 4), &[(0, 3, 0), (5, 6, 5)]);
        assert!(matches(&pred, &gold));
    }

    #[test]
    fn argument_count_must_agree() {
        let gold = x("s", (1, 1, 1), &[(0, 0, 0), (2, 2, 2), (3, 3, 3)]);
        let pred = x("s", (1, 1, 1), &[(0, 0, 0), (2, 3, 2)]);
        assert!(!matches(&pred, &gold));
    }

    fn two_gold() -> Dataset {
        let mut d = Dataset::default();
        for id in ["a", "b"] {
            d.sentences.push(Sentence {
                id: id.into(),
                tokens: (0..4).map(|i| format!("w{i}")).collect(),
                candidate_predicates: vec![1],
            });
            d.gold.insert(id.into(), vec![x(id, (1, 1, 1), &[(0, 0, 0), (2, 3, 3)])]);
        }
        d
    }

    fn with_conf(mut e: Extraction, c: f64) -> Extraction {
        e.confidence = Some(c);
        e
    }

    #[test]
    fn empty_gold_is_an_error() {
        assert!(matches!(
            pr_curve(&[], &Dataset::default(), Credit::Greedy),
            Err(EvalError::EmptyGold)
        ));
    }

    #[test]
    fn gold_never_credited_twice() {
        let d = two_gold();
        let g = d.gold_for("a")[0].clone();
        let preds = vec![with_conf(g.clone(), -0.1), with_conf(g, -0.2)];
        let (points, counts) = pr_curve(&preds, &d, Credit::Greedy).unwrap();
        assert_eq!(counts.matched, 1);
        assert_eq!(points[1].precision, 0.5);
        assert_eq!(points[1].recall, 0.5);
        let (any, _) = pr_curve(&preds, &d, Credit::Any).unwrap();
        assert_eq!(any[1].precision, 1.0);
        assert_eq!(any[1].recall, 0.5);
    }

    #[test]
    fn all_wrong_is_zero() {
        let d = two_gold();
        let wrong = with_conf(x("a", (3, 3, 3), &[(0, 0, 0), (1, 1, 1)]), -1.0);
        let r = evaluate(&[wrong.clone(), with_conf(wrong, -2.0)], &d, Credit::Greedy).unwrap();
        assert!(r.points.iter().all(|p| p.precision == 0.0 && p.recall == 0.0));
        assert_eq!(r.auc, 0.0);
        assert_eq!(r.best_f1, 0.0);
    }

    #[test]
    fn single_perfect_point_is_unit_area() {
        let p = [PrPoint {
            threshold: 0.0,
            precision: 1.0,
            recall: 1.0,
        }];
        assert_eq!(auc(&p), 1.0);
        assert_eq!(best_f1(&p), 1.0);
    }

    #[test]
    fn report_json_shape() {
        let d = two_gold();
        let preds: Vec<Extraction> = d.gold.values().flatten().cloned().map(|e| with_conf(e, -0.5)).collect();
        let r = evaluate(&preds, &d, Credit::Greedy).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["conventions"]["auc"], "trapezoid+anchor");
        assert_eq!(v["conventions"]["credit"], "greedy");
        assert_eq!(v["points"][1], serde_json::json!([-0.5, 1.0, 1.0]));
        assert_eq!(v["counts"]["gold"], 2);
    }
}
