//! BIO labels for predicate/argument spans.
//!
//! Label ids are laid out as `O = 0`, `B-P = 1`, `I-P = 2`, `B-Ai = 2i + 1`,
//! `I-Ai = 2i + 2`, so an alphabet with `M` argument slots has `2(M + 1) + 1`
//! labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Extraction, Span};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("spans {0:?} and {1:?} overlap")]
    Overlap(Span, Span),
    #[error("{args} arguments exceed the configured maximum of {max}")]
    TooManyArgs { args: usize, max: usize },
    #[error("span {span:?} out of bounds for length {len}")]
    OutOfBounds { span: Span, len: usize },
    #[error("invalid transition into {label} at position {position}")]
    InvalidTransition { position: usize, label: Label },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label {label} outside alphabet with {max} argument slots")]
    OutsideAlphabet { label: Label, max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Predicate,
    /// 1-based argument slot.
    Arg(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    O,
    B(Role),
    I(Role),
}

impl Label {
    pub fn id(self) -> usize {
        match self {
            Label::O => 0,
            Label::B(Role::Predicate) => 1,
            Label::I(Role::Predicate) => 2,
            Label::B(Role::Arg(i)) => 2 * i as usize + 1,
            Label::I(Role::Arg(i)) => 2 * i as usize + 2,
        }
    }

    pub fn from_id(id: usize) -> Label {
        match id {
            0 => Label::O,
            1 => Label::B(Role::Predicate),
            2 => Label::I(Role::Predicate),
            _ => {
                let slot = ((id - 1) / 2) as u8;
                if id % 2 == 1 {
                    Label::B(Role::Arg(slot))
                } else {
                    Label::I(Role::Arg(slot))
                }
            }
        }
    }

    pub fn role(self) -> Option<Role> {
        match self {
            Label::O => None,
            Label::B(r) | Label::I(r) => Some(r),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = |r: &Role| match r {
            Role::Predicate => "P".to_string(),
            Role::Arg(i) => format!("A{i}"),
        };
        match self {
            Label::O => f.write_str("O"),
            Label::B(r) => write!(f, "B-{}", role(r)),
            Label::I(r) => write!(f, "I-{}", role(r)),
        }
    }
}

impl FromStr for Label {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::UnknownLabel(s.to_string());
        if s == "O" {
            return Ok(Label::O);
        }
        let (kind, role) = s.split_once('-').ok_or_else(bad)?;
        let role = match role {
            "P" => Role::Predicate,
            r => {
                let slot: u8 = r.strip_prefix('A').ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if slot == 0 {
                    return Err(bad());
                }
                Role::Arg(slot)
            }
        };
        match kind {
            "B" => Ok(Label::B(role)),
            "I" => Ok(Label::I(role)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The label alphabet for a fixed number of argument slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub max_args: usize,
}

impl LabelSet {
    pub fn new(max_args: usize) -> Self {
        LabelSet { max_args }
    }

    /// Alphabet of the given size; `size` must be odd and at least 3.
    pub fn with_size(size: usize) -> Self {
        assert!(size >= 3 && size % 2 == 1, "alphabet size {size} is not 2(M+1)+1");
        LabelSet {
            max_args: (size - 3) / 2,
        }
    }

    pub fn len(&self) -> usize {
        2 * (self.max_args + 1) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (0..self.len()).map(Label::from_id)
    }

    pub fn contains(&self, label: Label) -> bool {
        label.id() < self.len()
    }
}

/// Whether `next` may follow `prev` (`None` is the sequence start). An I label
/// must continue a B or I of the same role; everything else is allowed.
pub fn is_valid_transition(prev: Option<Label>, next: Label) -> bool {
    match next {
        Label::I(role) => matches!(prev, Some(Label::B(r)) | Some(Label::I(r)) if r == role),
        _ => true,
    }
}

/// Id-level transition table for the decoder: `allowed[prev][next]`.
pub fn transition_table(labels: LabelSet) -> Vec<Vec<bool>> {
    labels
        .labels()
        .map(|p| labels.labels().map(|n| is_valid_transition(Some(p), n)).collect())
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSequence(pub Vec<Label>);

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.0.iter().map(|l| l.id()).collect()
    }

    pub fn from_ids(ids: &[usize]) -> Self {
        LabelSequence(ids.iter().map(|&i| Label::from_id(i)).collect())
    }

    /// Position of the first invalid transition, if any.
    pub fn first_invalid(&self) -> Option<usize> {
        let mut prev = None;
        for (t, &label) in self.0.iter().enumerate() {
            if !is_valid_transition(prev, label) {
                return Some(t);
            }
            prev = Some(label);
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.first_invalid().is_none()
    }

    pub fn check_alphabet(&self, labels: LabelSet) -> Result<(), CodecError> {
        match self.0.iter().find(|l| !labels.contains(**l)) {
            Some(&label) => Err(CodecError::OutsideAlphabet {
                label,
                max: labels.max_args,
            }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for LabelSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for LabelSequence {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map(LabelSequence)
    }
}

fn paint(labels: &mut [Label], span: &Span, role: Role) {
    labels[span.start] = Label::B(role);
    for l in &mut labels[span.start + 1..=span.end] {
        *l = Label::I(role);
    }
}

/// Maps an extraction onto a label sequence of length `n`. The i-th argument
/// (in start order) gets role `Ai`.
pub fn encode(n: usize, x: &Extraction, max_args: usize) -> Result<LabelSequence, CodecError> {
    if x.args.len() > max_args {
        return Err(CodecError::TooManyArgs {
            args: x.args.len(),
            max: max_args,
        });
    }
    if let Some(span) = x.spans().find(|s| s.start > s.end || s.end >= n) {
        return Err(CodecError::OutOfBounds { span: *span, len: n });
    }
    if let Some((a, b)) = x.find_overlap() {
        return Err(CodecError::Overlap(a, b));
    }
    let mut labels = vec![Label::O; n];
    paint(&mut labels, &x.predicate, Role::Predicate);
    for (i, arg) in x.args.iter().enumerate() {
        paint(&mut labels, arg, Role::Arg(i as u8 + 1));
    }
    Ok(LabelSequence(labels))
}

/// Recovers an extraction, keeping only the first run of every role. Returns
/// `None` when no predicate run exists. Argument slots may be gapped; the
/// surviving runs are ordered by slot, then re-sorted by start.
pub fn decode(y: &LabelSequence, sentence_id: &str) -> Result<Option<Extraction>, CodecError> {
    if let Some(position) = y.first_invalid() {
        return Err(CodecError::InvalidTransition {
            position,
            label: y.0[position],
        });
    }
    let mut predicate: Option<Span> = None;
    let mut args: Vec<(u8, Span)> = Vec::new();
    let mut t = 0;
    let labels = &y.0;
    while t < labels.len() {
        let Label::B(role) = labels[t] else {
            t += 1;
            continue;
        };
        let start = t;
        t += 1;
        while t < labels.len() && labels[t] == Label::I(role) {
            t += 1;
        }
        let span = Span::unheaded(start, t - 1);
        match role {
            Role::Predicate => {
                predicate.get_or_insert(span);
            }
            Role::Arg(slot) => {
                if !args.iter().any(|(s, _)| *s == slot) {
                    args.push((slot, span));
                }
            }
        }
    }
    let Some(predicate) = predicate else {
        return Ok(None);
    };
    args.sort_by_key(|(slot, _)| *slot);
    Ok(Some(Extraction::new(
        sentence_id,
        predicate,
        args.into_iter().map(|(_, s)| s).collect(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> LabelSequence {
        s.parse().unwrap()
    }

    #[test]
    fn encodes_obama_example() {
        let x = Extraction::new(
            "s",
            Span::new(2, 4, 3),
            vec![Span::new(0, 1, 1), Span::new(5, 5, 5)],
        );
        let y = encode(6, &x, 4).unwrap();
        assert_eq!(y, seq("B-A1 I-A1 B-P I-P I-P B-A2"));
        let back = decode(&y, "s").unwrap().unwrap();
        assert_eq!(back.predicate, Span::unheaded(2, 4));
        assert_eq!(back.args, vec![Span::unheaded(0, 1), Span::unheaded(5, 5)]);
    }

    #[test]
    fn encodes_minimal_predicate_only() {
        let x = Extraction::new("s", Span::unheaded(0, 0), vec![]);
        assert_eq!(encode(1, &x, 4).unwrap(), seq("B-P"));
    }

    #[test]
    fn encode_rejects_overlap_and_too_many_args() {
        let x = Extraction {
            args: vec![Span::unheaded(0, 1), Span::unheaded(1, 2)],
            ..Extraction::new("s", Span::unheaded(3, 3), vec![])
        };
        assert!(matches!(encode(4, &x, 4), Err(CodecError::Overlap(..))));
        let x = Extraction::new(
            "s",
            Span::unheaded(0, 0),
            (1..4).map(|i| Span::unheaded(i, i)).collect(),
        );
        assert_eq!(
            encode(4, &x, 2),
            Err(CodecError::TooManyArgs { args: 3, max: 2 })
        );
    }

    #[test]
    fn all_o_decodes_to_none() {
        assert_eq!(decode(&seq("O O O"), "s").unwrap(), None);
    }

    #[test]
    fn keeps_first_instance_of_each_argument() {
        let x = decode(&seq("B-A1 O B-A1 B-P"), "s").unwrap().unwrap();
        assert_eq!(x.args, vec![Span::unheaded(0, 0)]);
        assert_eq!(x.predicate, Span::unheaded(3, 3));
    }

    #[test]
    fn gapped_argument_slots_are_compacted() {
        let x = decode(&seq("B-A3 B-P B-A1 I-A1"), "s").unwrap().unwrap();
        assert_eq!(x.args, vec![Span::unheaded(0, 0), Span::unheaded(2, 3)]);
    }

    #[test]
    fn decode_reports_invalid_position() {
        assert_eq!(
            decode(&seq("B-A2 I-A1"), "s"),
            Err(CodecError::InvalidTransition {
                position: 1,
                label: Label::I(Role::Arg(1))
            })
        );
    }

    #[test]
    fn transition_rules() {
        let a1 = Role::Arg(1);
        let a2 = Role::Arg(2);
        assert!(!is_valid_transition(Some(Label::B(a2)), Label::I(a1)));
        assert!(is_valid_transition(
            Some(Label::B(Role::Predicate)),
            Label::I(Role::Predicate)
        ));
        assert!(!is_valid_transition(None, Label::I(a1)));
        assert!(!is_valid_transition(Some(Label::O), Label::I(a1)));
        assert!(is_valid_transition(Some(Label::B(a1)), Label::B(a1)));
    }

    #[test]
    fn ids_and_strings_roundtrip() {
        let set = LabelSet::new(4);
        assert_eq!(set.len(), 11);
        for (i, l) in set.labels().enumerate() {
            assert_eq!(l.id(), i);
            assert_eq!(l.to_string().parse::<Label>().unwrap(), l);
        }
        assert_eq!(Label::from_id(3).to_string(), "B-A1");
        assert_eq!(Label::from_id(10).to_string(), "I-A4");
        assert!("I-A0".parse::<Label>().is_err());
        assert!("X".parse::<Label>().is_err());
    }
}
