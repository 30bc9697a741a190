use proptest::prelude::*;

use oiecal::bio::{decode, encode};
use oiecal::corpus::{clean, parse_dataset, write_dataset, Dataset, Extraction, Sentence, Span};

/// Non-overlapping spans laid out left to right with random gaps; the
/// predicate takes a random slot among them.
fn extraction_in(n_args: usize) -> impl Strategy<Value = (usize, Extraction)> {
    (
        prop::collection::vec((0usize..3, 1usize..4), n_args + 1),
        0..=n_args,
        0usize..3,
    )
        .prop_map(move |(layout, pred_slot, tail)| {
            let mut spans = Vec::new();
            let mut t = 0;
            for (gap, len) in layout {
                t += gap;
                spans.push(Span::new(t, t + len - 1, t + len - 1));
                t += len;
            }
            let n = t + tail;
            let predicate = spans.remove(pred_slot);
            (n, Extraction::new("s", predicate, spans))
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((1usize..4).prop_flat_map(extraction_in), 1..6).prop_map(|xs| {
        let mut d = Dataset::default();
        for (i, (n, mut x)) in xs.into_iter().enumerate() {
            let id = format!("s{i}");
            x.sentence_id = id.clone();
            d.sentences.push(Sentence {
                id: id.clone(),
                tokens: (0..n).map(|t| format!("w{}", t % 5)).collect(),
                candidate_predicates: vec![x.predicate.head],
            });
            d.gold.insert(id, vec![x]);
        }
        d
    })
}

proptest! {
    #[test]
    fn encode_decode_is_identity((n, x) in (0usize..5).prop_flat_map(extraction_in)) {
        let y = encode(n, &x, 4).unwrap();
        prop_assert!(y.is_valid());
        let back = decode(&y, "s").unwrap().unwrap();
        prop_assert_eq!(back.bounds_key(), x.bounds_key());
    }

    #[test]
    fn save_then_load_is_identity(d in dataset()) {
        let mut bytes = Vec::new();
        write_dataset(&d, &mut bytes).unwrap();
        let back = parse_dataset(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back.sentences, &d.sentences);
        prop_assert_eq!(&back.gold, &d.gold);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn clean_is_idempotent(d in dataset()) {
        let once = clean(&d);
        prop_assert_eq!(clean(&once), once.clone());
        prop_assert!(once.gold.values().flatten().all(|x| x.args.len() >= 2));
        prop_assert_eq!(once.sentences.len(), d.sentences.len());
    }
}
