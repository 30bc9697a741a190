//! Converter from the tab-separated OIE2016 benchmark release.
//!
//! Each file starts with a header naming at least the columns `word_id`,
//! `word`, `pred_id`, `sent_id`, `run_id` and `label`. Rows sharing
//! `(sent_id, run_id)` form one extraction; blank lines separate extractions.
//! Labels are `O`, `P-B`/`P-I` for the predicate and `A<i>-B`/`A<i>-I` for
//! argument `i`. Heads are not recorded: the predicate head is `pred_id` when
//! it falls inside the predicate span, every other head is the span start.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::warn;

use super::CliError;
use crate::corpus::{clean, Dataset, Extraction, Sentence, Span};

const REQUIRED: &[&str] = &["word_id", "word", "pred_id", "sent_id", "run_id", "label"];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConvertStats {
    pub sentences: usize,
    pub raw_extractions: usize,
    pub clean_extractions: usize,
    pub skipped_rows: usize,
    pub skipped_extractions: usize,
}

#[derive(Default)]
struct Block {
    words: Vec<(usize, String)>,
    labels: Vec<String>,
    pred_id: Option<usize>,
}

/// Collapses a label column into per-role token spans. Returns `None` when
/// the roles are not contiguous runs.
fn spans(labels: &[String]) -> Option<(Span, Vec<Span>)> {
    let mut roles: BTreeMap<(u8, usize), (usize, usize)> = BTreeMap::new();
    let mut prev: Option<(u8, usize)> = None;
    for (t, label) in labels.iter().enumerate() {
        if label == "O" {
            prev = None;
            continue;
        }
        let (role, part) = label.rsplit_once('-')?;
        let key = match role {
            "P" | "V" => (0, 0),
            a if a.starts_with('A') => (1, a[1..].parse().ok()?),
            _ => return None,
        };
        match part {
            "B" => {
                if roles.insert(key, (t, t)).is_some() {
                    return None;
                }
            }
            "I" => {
                if prev != Some(key) {
                    return None;
                }
                roles.get_mut(&key)?.1 = t;
            }
            _ => return None,
        }
        prev = Some(key);
    }
    let (&(s, e), _) = (roles.get(&(0, 0))?, ());
    let predicate = Span::new(s, e, s);
    let args = roles
        .iter()
        .filter(|(k, _)| k.0 == 1)
        .map(|(_, &(s, e))| Span::new(s, e, s))
        .collect();
    Some((predicate, args))
}

/// Parses one benchmark file into a dataset named by `prefix`.
pub fn parse_benchmark(text: &str, prefix: &str, stats: &mut ConvertStats) -> Result<Dataset, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{prefix}: empty file")))?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let col = |name: &str| columns.iter().position(|c| *c == name);
    let mut idx = BTreeMap::new();
    for name in REQUIRED {
        let i = col(name).ok_or_else(|| CliError::Data(format!("{prefix}: header lacks column {name:?}")))?;
        idx.insert(*name, i);
    }

    // (sent_id, run_id) -> rows, in file order of first appearance.
    let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |name: &str| fields.get(idx[name]).map(|f| f.trim());
        let parsed = (|| {
            let word_id: usize = get("word_id")?.parse().ok()?;
            let sent_id: usize = get("sent_id")?.parse().ok()?;
            let run_id: usize = get("run_id")?.parse().ok()?;
            let pred_id: Option<usize> = get("pred_id")?.parse().ok();
            Some((word_id, get("word")?.to_string(), sent_id, run_id, pred_id, get("label")?.to_string()))
        })();
        let Some((word_id, word, sent_id, run_id, pred_id, label)) = parsed else {
            warn!("{prefix} line {}: malformed row skipped", line_no + 1);
            stats.skipped_rows += 1;
            continue;
        };
        let block = blocks.entry((sent_id, run_id)).or_default();
        block.words.push((word_id, word));
        block.labels.push(label);
        block.pred_id = block.pred_id.or(pred_id);
    }

    let mut tokens: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut candidates: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut gold: BTreeMap<usize, Vec<(Span, Vec<Span>)>> = BTreeMap::new();
    for ((sent_id, run_id), mut block) in blocks {
        let mut order: Vec<usize> = (0..block.words.len()).collect();
        order.sort_by_key(|&i| block.words[i].0);
        let words: Vec<String> = order.iter().map(|&i| block.words[i].1.clone()).collect();
        let labels: Vec<String> = order.iter().map(|&i| std::mem::take(&mut block.labels[i])).collect();
        if order.iter().enumerate().any(|(k, &i)| block.words[i].0 != k) {
            warn!("{prefix} sentence {sent_id} run {run_id}: word ids are not 0..n, extraction skipped");
            stats.skipped_extractions += 1;
            continue;
        }
        match tokens.get(&sent_id) {
            Some(existing) if *existing != words => {
                warn!("{prefix} sentence {sent_id} run {run_id}: tokens disagree with earlier runs, extraction skipped");
                stats.skipped_extractions += 1;
                continue;
            }
            Some(_) => {}
            None => {
                tokens.insert(sent_id, words.clone());
            }
        }
        if let Some(p) = block.pred_id.filter(|&p| p < words.len()) {
            candidates.entry(sent_id).or_default().insert(p);
        }
        let Some((mut predicate, args)) = spans(&labels) else {
            warn!("{prefix} sentence {sent_id} run {run_id}: label column is not a valid span layout, extraction skipped");
            stats.skipped_extractions += 1;
            continue;
        };
        if let Some(p) = block.pred_id.filter(|&p| predicate.contains(p)) {
            predicate.head = p;
        }
        gold.entry(sent_id).or_default().push((predicate, args));
    }

    let mut d = Dataset::default();
    for (sent_id, words) in tokens {
        let id = format!("{prefix}-{sent_id}");
        let extractions: Vec<Extraction> = gold
            .remove(&sent_id)
            .unwrap_or_default()
            .into_iter()
            .map(|(p, args)| Extraction::new(id.clone(), p, args))
            .collect();
        stats.raw_extractions += extractions.len();
        if !extractions.is_empty() {
            d.gold.insert(id.clone(), extractions);
        }
        d.sentences.push(Sentence {
            id,
            tokens: words,
            candidate_predicates: candidates.remove(&sent_id).unwrap_or_default().into_iter().collect(),
        });
    }
    stats.sentences += d.sentences.len();
    d.validate().map_err(|e| CliError::Data(format!("{prefix}: {e}")))?;
    Ok(d)
}

/// Benchmark files under `input` (a file, or every `*.conll` in a directory
/// in name order).
pub fn benchmark_files(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "conll"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no .conll files in {}", input.display())));
    }
    Ok(files)
}

/// Converts one benchmark file, optionally cleaning it.
pub fn convert_file(path: &Path, apply_clean: bool) -> Result<(Dataset, ConvertStats), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())))?;
    let prefix = path
        .file_stem()
        .map(|s| s.to_string_lossy().split('.').next().unwrap_or("").to_string())
        .unwrap_or_default();
    let mut stats = ConvertStats::default();
    let raw = parse_benchmark(&text, &prefix, &mut stats)?;
    let d = if apply_clean { clean(&raw) } else { raw };
    stats.clean_extractions = d.num_extractions();
    Ok((d, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "word_id\tword\tpred\tpred_id\thead_pred_id\tsent_id\trun_id\tlabel
0\tObama\tborn\t3\t3\t0\t0\tA0-B
1\twas\tborn\t3\t3\t0\t0\tP-B
2\tindeed\tborn\t3\t3\t0\t0\tO
3\tborn\tborn\t3\t3\t0\t0\tP-I
4\tin\tborn\t3\t3\t0\t0\tO
5\tHawaii\tborn\t3\t3\t0\t0\tA1-B

0\tObama\tborn\t3\t3\t0\t1\tA0-B
1\twas\tborn\t3\t3\t0\t1\tO
2\tindeed\tborn\t3\t3\t0\t1\tO
3\tborn\tborn\t3\t3\t0\t1\tP-B
4\tin\tborn\t3\t3\t0\t1\tP-I
5\tHawaii\tborn\t3\t3\t0\t1\tA1-B

0\tIt\trains\t1\t1\t1\t2\tA0-B
1\trains\trains\t1\t1\t1\t2\tP-B
2\t.\trains\t1\t1\t1\t2\tO
";

    #[test]
    fn converts_runs_into_extractions() {
        let mut stats = ConvertStats::default();
        let d = parse_benchmark(SAMPLE, "train", &mut stats).unwrap();
        assert_eq!(d.sentences.len(), 2);
        assert_eq!(d.sentences[0].id, "train-0");
        assert_eq!(d.sentences[0].candidate_predicates, vec![3]);
        let g = d.gold_for("train-0");
        // Run 0 has a gapped predicate, which is not a contiguous span.
        assert_eq!(stats.skipped_extractions, 1);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].predicate, Span::new(3, 4, 3));
        assert_eq!(g[0].args, vec![Span::new(0, 0, 0), Span::new(5, 5, 5)]);
        let cleaned = clean(&d);
        assert_eq!(cleaned.num_extractions(), 1);
        assert!(cleaned.emptied.contains("train-1"));
    }

    #[test]
    fn malformed_rows_are_counted() {
        let mut stats = ConvertStats::default();
        let text = format!("{SAMPLE}x\ty\n");
        parse_benchmark(&text, "t", &mut stats).unwrap();
        assert_eq!(stats.skipped_rows, 1);
        assert!(parse_benchmark("word\tlabel\n", "t", &mut stats).is_err());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(benchmark_files(dir.path()), Err(CliError::Data(_))));
    }
}
