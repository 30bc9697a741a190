//! Template-grammar corpora for smoke tests and directional experiments.
//!
//! Sentences are drawn from a small set of clause templates over a fixed
//! lexicon. Every verb position is a candidate predicate, including belief
//! verbs ("thinks") that never carry a gold extraction even though report
//! verbs in the same construction ("says") do. Control verbs ("wants to")
//! are treated like auxiliaries and are not candidates. A quarter of the
//! sentences also offer one common noun as a candidate, mimicking
//! part-of-speech errors.
//! Prepositional phrases after an object attach either to the verb (as an
//! extra argument) or to the object noun phrase, depending on the
//! preposition.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Extraction, Sentence, Span};
use crate::seed::{self, Stream};

const NAMES: &[&str] = &[
    "Alice", "Bruno", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hana", "Ivan", "Jonas", "Kira",
    "Luis", "Mona", "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq",
];
const NOUNS: &[&str] = &[
    "company", "doctor", "teacher", "river", "city", "report", "book", "car", "farmer", "senator",
    "court", "bank", "letter", "museum", "painting", "student", "team", "coach", "village",
    "factory", "bridge", "minister", "song", "engineer", "market", "garden", "law", "ship",
    "captain", "bakery", "hospital", "nurse", "school", "contract", "film", "actor", "island",
    "train", "station", "mayor", "festival", "journal", "scientist", "farm", "castle", "king",
    "queen", "soldier", "tower", "library",
];
const ADJECTIVES: &[&str] = &[
    "old", "new", "small", "large", "famous", "local", "young", "quiet", "busy", "ancient",
    "modern", "rich", "poor", "red", "green", "northern", "southern", "private", "public",
    "strange", "brave", "clever", "distant", "early", "final",
];
const DETERMINERS: &[&str] = &["the", "a", "this", "every"];
const TRANSITIVE: &[&str] = &[
    "visited", "bought", "sold", "built", "painted", "wrote", "closed", "opened", "praised",
    "hired", "fired", "repaired", "designed", "destroyed", "studied", "funded", "owned",
    "managed", "crossed", "watched", "signed", "found", "lost", "helped", "met", "defended",
    "attacked", "approved", "rejected", "founded",
];
const DITRANSITIVE: &[&str] = &["gave", "sent", "lent", "offered", "showed", "handed"];
/// Verb plus its particle/preposition, forming a two-token predicate.
const PHRASAL: &[(&str, &str)] = &[
    ("lives", "in"),
    ("works", "for"),
    ("relies", "on"),
    ("belongs", "to"),
    ("looked", "at"),
    ("talked", "about"),
    ("waited", "for"),
    ("depends", "on"),
    ("arrived", "at"),
    ("voted", "against"),
];
/// Report verbs whose clause is annotated as an argument.
const REPORT: &[&str] = &["says", "claims", "reports", "argues", "notes"];
/// Belief verbs: same syntax as report verbs, never annotated.
const BELIEF: &[&str] = &["thinks", "believes", "hopes", "suspects", "fears"];
const CONTROL: &[&str] = &["wants", "plans", "tried", "refused", "decided", "agreed"];
const BARE: &[&str] = &[
    "visit", "buy", "sell", "build", "paint", "write", "close", "open", "hire", "repair", "fund",
    "sign",
];
/// Prepositional phrases introduced by these attach to the verb.
const VERB_PREPS: &[&str] = &["in", "during", "near", "before"];
/// Prepositional phrases introduced by these attach to the object.
const NOUN_PREPS: &[&str] = &["of", "with", "from", "without"];

const NOISE_CANDIDATE_RATE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train_sentences: 500,
            dev_sentences: 100,
            seed: 0,
        }
    }
}

/// Sentence under construction.
struct Builder {
    tokens: Vec<String>,
    candidates: Vec<usize>,
    gold: Vec<(Span, Vec<Span>)>,
    nouns: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            tokens: Vec::new(),
            candidates: Vec::new(),
            gold: Vec::new(),
            nouns: Vec::new(),
        }
    }

    fn push(&mut self, word: &str) -> usize {
        self.tokens.push(word.to_string());
        self.tokens.len() - 1
    }

    fn verb(&mut self, word: &str) -> usize {
        let i = self.push(word);
        self.candidates.push(i);
        i
    }

    fn noun_phrase(&mut self, rng: &mut ChaCha8Rng) -> Span {
        let start = self.tokens.len();
        if rng.gen_bool(0.3) {
            self.push(pick(rng, NAMES));
        } else {
            self.push(pick(rng, DETERMINERS));
            let adjectives = [0, 0, 1, 1, 2][rng.gen_range(0..5)];
            for _ in 0..adjectives {
                self.push(pick(rng, ADJECTIVES));
            }
            let n = self.push(pick(rng, NOUNS));
            self.nouns.push(n);
        }
        let head = self.tokens.len() - 1;
        Span::new(start, head, head)
    }

    /// Object noun phrase, optionally followed by a prepositional phrase.
    /// Returns the object span and, for verb-attached phrases, the extra
    /// argument span.
    fn object(&mut self, rng: &mut ChaCha8Rng, pp: bool) -> (Span, Option<Span>) {
        let object = self.noun_phrase(rng);
        if !pp {
            return (object, None);
        }
        let verbal = rng.gen_bool(0.5);
        let start = self.push(pick(rng, if verbal { VERB_PREPS } else { NOUN_PREPS }));
        let inner = self.noun_phrase(rng);
        if verbal {
            (object, Some(Span::new(start, inner.end, inner.head)))
        } else {
            (Span::new(object.start, inner.end, object.head), None)
        }
    }

    fn finish(mut self, id: String) -> (Sentence, Vec<Extraction>) {
        self.push(".");
        self.candidates.sort_unstable();
        let gold = self
            .gold
            .into_iter()
            .map(|(p, args)| Extraction::new(id.clone(), p, args))
            .collect();
        (
            Sentence {
                id,
                tokens: self.tokens,
                candidate_predicates: self.candidates,
            },
            gold,
        )
    }
}

/// Whether `word` is one of the grammar's common nouns.
pub fn is_noun(word: &str) -> bool {
    NOUNS.contains(&word)
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap_or("x")
}

fn with_extra(mut args: Vec<Span>, extra: Option<Span>) -> Vec<Span> {
    args.extend(extra);
    args
}

fn sentence(rng: &mut ChaCha8Rng, id: String) -> (Sentence, Vec<Extraction>) {
    let mut b = Builder::new();
    let pp = rng.gen_bool(0.35);
    match rng.gen_range(0..100) {
        // NP V NP [PP]
        0..=24 => {
            let subject = b.noun_phrase(rng);
            let v = b.verb(pick(rng, TRANSITIVE));
            let (object, extra) = b.object(rng, pp);
            b.gold.push((Span::new(v, v, v), with_extra(vec![subject, object], extra)));
        }
        // NP V NP to NP
        25..=34 => {
            let subject = b.noun_phrase(rng);
            let v = b.verb(pick(rng, DITRANSITIVE));
            let object = b.noun_phrase(rng);
            b.push("to");
            let recipient = b.noun_phrase(rng);
            b.gold.push((Span::new(v, v, v), vec![subject, object, recipient]));
        }
        // NP V PREP NP
        35..=46 => {
            let subject = b.noun_phrase(rng);
            let (verb, prep) = *PHRASAL.choose(rng).unwrap_or(&PHRASAL[0]);
            let v = b.verb(verb);
            b.push(prep);
            let object = b.noun_phrase(rng);
            b.gold.push((Span::new(v, v + 1, v), vec![subject, object]));
        }
        // NP REPORT|BELIEF [that] NP V NP [PP]
        47..=76 => {
            let speaker = b.noun_phrase(rng);
            let report = rng.gen_bool(0.5);
            let r = b.verb(pick(rng, if report { REPORT } else { BELIEF }));
            let clause_start = b.tokens.len();
            if rng.gen_bool(0.7) {
                b.push("that");
            }
            let subject = b.noun_phrase(rng);
            let v = b.verb(pick(rng, TRANSITIVE));
            let (object, extra) = b.object(rng, pp);
            b.gold.push((Span::new(v, v, v), with_extra(vec![subject, object], extra)));
            if report {
                let clause = Span::new(clause_start, b.tokens.len() - 1, v);
                b.gold.push((Span::new(r, r, r), vec![speaker, clause]));
            }
        }
        // NP CONTROL to V NP
        77..=86 => {
            let subject = b.noun_phrase(rng);
            b.push(pick(rng, CONTROL));
            b.push("to");
            let v = b.verb(pick(rng, BARE));
            let object = b.noun_phrase(rng);
            b.gold.push((Span::new(v, v, v), vec![subject, object]));
        }
        // NP V NP and V NP
        _ => {
            let subject = b.noun_phrase(rng);
            let v1 = b.verb(pick(rng, TRANSITIVE));
            let o1 = b.noun_phrase(rng);
            b.push("and");
            let v2 = b.verb(pick(rng, TRANSITIVE));
            let o2 = b.noun_phrase(rng);
            b.gold.push((Span::new(v1, v1, v1), vec![subject, o1]));
            b.gold.push((Span::new(v2, v2, v2), vec![subject, o2]));
        }
    }
    // Tagger-style noise: a common noun occasionally offered as a predicate.
    if !b.nouns.is_empty() && rng.gen_bool(NOISE_CANDIDATE_RATE) {
        let n = b.nouns[rng.gen_range(0..b.nouns.len())];
        b.candidates.push(n);
    }
    b.finish(id)
}

fn split(prefix: &str, count: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let mut d = Dataset::default();
    for i in 0..count {
        let (s, gold) = sentence(rng, format!("{prefix}-{i:04}"));
        d.gold.insert(s.id.clone(), gold);
        d.sentences.push(s);
    }
    d
}

/// Train and dev splits drawn from independent streams of the same grammar.
pub fn generate(cfg: &SyntheticConfig) -> (Dataset, Dataset) {
    let train = split("train", cfg.train_sentences, &mut seed::rng(cfg.seed, Stream::Corpus, 0));
    let dev = split("dev", cfg.dev_sentences, &mut seed::rng(cfg.seed, Stream::Corpus, 1));
    (train, dev)
}

/// Five short hand-written sentences with one or two gold extractions each.
pub fn toy() -> Dataset {
    let rows: &[(&str, &[usize], &[((usize, usize, usize), &[(usize, usize, usize)])])] = &[
        (
            "Barack Obama was born in Hawaii .",
            &[2, 3],
            &[((2, 4, 3), &[(0, 1, 1), (5, 5, 5)])],
        ),
        (
            "the old farmer sold a red car .",
            &[3],
            &[((3, 3, 3), &[(0, 2, 2), (4, 6, 6)])],
        ),
        (
            "Alice says Bruno visited the museum .",
            &[1, 3],
            &[((3, 3, 3), &[(2, 2, 2), (4, 5, 5)])],
        ),
        (
            "the senator gave a letter to the mayor .",
            &[2],
            &[((2, 2, 2), &[(0, 1, 1), (3, 4, 4), (6, 7, 7)])],
        ),
        (
            "Mona bought a book and wrote a song .",
            &[1, 5],
            &[
                ((1, 1, 1), &[(0, 0, 0), (2, 3, 3)]),
                ((5, 5, 5), &[(0, 0, 0), (6, 7, 7)]),
            ],
        ),
    ];
    let mut d = Dataset::default();
    for (i, (text, candidates, gold)) in rows.iter().enumerate() {
        let id = format!("toy-{i}");
        let span = |(s, e, h): (usize, usize, usize)| Span::new(s, e, h);
        let xs = gold
            .iter()
            .map(|(p, args)| Extraction::new(id.clone(), span(*p), args.iter().copied().map(span).collect()))
            .collect();
        d.sentences.push(Sentence {
            id: id.clone(),
            tokens: text.split(' ').map(str::to_string).collect(),
            candidate_predicates: candidates.to_vec(),
        });
        d.gold.insert(id, xs);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, clean};

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let cfg = SyntheticConfig::default();
        let (train, dev) = generate(&cfg);
        train.validate().unwrap();
        dev.validate().unwrap();
        assert_eq!((train.sentences.len(), dev.sentences.len()), (500, 100));
        assert_eq!(clean(&train).num_extractions(), train.num_extractions());
        assert_eq!(generate(&cfg), (train.clone(), dev));
        let other = generate(&SyntheticConfig { seed: 1, ..cfg }).0;
        assert_ne!(other, train);
    }

    #[test]
    fn vocabulary_size_and_distractors() {
        let (train, _) = generate(&SyntheticConfig::default());
        let v = build_vocab(&train, 1).len();
        assert!((150..=260).contains(&v), "vocabulary {v}");
        let distractors: usize = train
            .sentences
            .iter()
            .map(|s| {
                let gold: Vec<usize> = train.gold_for(&s.id).iter().map(|x| x.predicate.head).collect();
                s.candidate_predicates.iter().filter(|v| !gold.contains(v)).count()
            })
            .sum();
        assert!(distractors > 30, "{distractors}");
        assert!(train.gold.values().flatten().any(|x| x.args.len() == 3));
    }

    #[test]
    fn toy_corpus_validates() {
        let d = toy();
        d.validate().unwrap();
        assert_eq!(d.sentences.len(), 5);
        assert_eq!(d.num_extractions(), 6);
    }
}
