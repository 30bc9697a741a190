use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::artifacts::{
    append_log, check_hash, load_model, load_pool, load_records, read_json, require, save_model,
    save_pool, save_records, write_json,
};
use super::convert::{benchmark_files, convert_file};
use super::{CliError, Command, RunConfig, Split};
use crate::corpus::{build_vocab, clean, load_dataset, save_dataset, Dataset};
use crate::evaluation::{evaluate_dump, rescore_dump, Counts, EvalReport};
use crate::learning::{
    annotate, calibrate, generate, generate_eval, resume, train_mle, CalibrationEpoch, EpochLog,
    ExtractionPool, IterationRecord, IterationState, LearnConfig, LearnError, MetricSummary,
};
use crate::synthetic::{self, SyntheticConfig};
use crate::tagger::{Model, ModelConfig};

pub struct Context {
    pub cfg: RunConfig,
    pub force: bool,
}

#[derive(Serialize)]
struct Scores {
    auc: f64,
    best_f1: f64,
    counts: Counts,
}

impl From<&EvalReport> for Scores {
    fn from(r: &EvalReport) -> Self {
        Scores {
            auc: r.auc,
            best_f1: r.best_f1,
            counts: r.counts,
        }
    }
}

impl Context {
    fn hash(&self) -> String {
        self.cfg.hash()
    }

    fn in_run(&self, name: &str) -> PathBuf {
        self.cfg.run_dir.join(name)
    }

    fn log(&self, lines: &[String]) -> Result<(), CliError> {
        append_log(&self.in_run("metrics.log"), lines)
    }

    fn split_path(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => self.cfg.train.as_deref(),
            Split::Dev => self.cfg.dev.as_deref(),
            Split::Test => self.cfg.test.as_deref(),
        }
    }

    fn has_split(&self, split: Split) -> bool {
        self.split_path(split).is_some()
    }

    /// Loads a split, cleaned unless disabled for that split.
    fn load_split(&self, split: Split) -> Result<Dataset, CliError> {
        let name = split.name();
        let path = self.split_path(split).ok_or_else(|| {
            CliError::Config(format!("no {name} corpus configured (pass --{name} or set {name} = PATH)"))
        })?;
        require(path, &format!("{name} corpus"))?;
        let raw = load_dataset(path)?;
        let apply = match split {
            Split::Train => self.cfg.clean_train,
            Split::Dev => self.cfg.clean_dev,
            Split::Test => self.cfg.clean_test,
        };
        if !apply {
            return Ok(raw);
        }
        let d = clean(&raw);
        info!(
            "{name}: {} sentences, {} of {} extractions kept after cleaning, {} sentences left without gold",
            d.sentences.len(),
            d.num_extractions(),
            raw.num_extractions(),
            d.emptied.len()
        );
        Ok(d)
    }

    fn optional_split(&self, split: Split) -> Result<Option<Dataset>, CliError> {
        if self.has_split(split) {
            self.load_split(split).map(Some)
        } else {
            Ok(None)
        }
    }
}

pub fn dispatch(ctx: &Context, command: Command) -> Result<(), CliError> {
    match command {
        Command::Convert { input, out, no_clean } => cmd_convert(&input, &out, !no_clean),
        Command::Synth {
            out,
            train_sentences,
            dev_sentences,
        } => cmd_synth(ctx, &out, train_sentences, dev_sentences),
        Command::Train { out } => cmd_train(ctx, out),
        Command::Generate { checkpoint, split, out } => cmd_generate(ctx, checkpoint, split, out),
        Command::Calibrate {
            checkpoint,
            dump,
            pool,
            round,
            out,
        } => cmd_calibrate(ctx, checkpoint, dump, pool, round, out),
        Command::Rerank {
            checkpoint,
            dump,
            split,
            out,
        } => cmd_rerank(ctx, checkpoint, dump, split, out),
        Command::Evaluate { dump, split } => cmd_evaluate(ctx, &dump, split),
        Command::Iterate { checkpoint, resume } => cmd_iterate(ctx, checkpoint, resume),
    }
}

fn cmd_convert(input: &Path, out: &Path, apply_clean: bool) -> Result<(), CliError> {
    let files = benchmark_files(input)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    for file in files {
        let (d, stats) = convert_file(&file, apply_clean)?;
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().split('.').next().unwrap_or("").to_string())
            .unwrap_or_default();
        let target = out.join(format!("{stem}.jsonl"));
        save_dataset(&d, &target)?;
        println!(
            "{stem}: {} sentences, {} raw extractions, {} after cleaning, {} rows and {} extractions skipped -> {}",
            stats.sentences,
            stats.raw_extractions,
            stats.clean_extractions,
            stats.skipped_rows,
            stats.skipped_extractions,
            target.display()
        );
    }
    Ok(())
}

fn cmd_synth(ctx: &Context, out: &Path, train_sentences: usize, dev_sentences: usize) -> Result<(), CliError> {
    let (train, dev) = synthetic::generate(&SyntheticConfig {
        train_sentences,
        dev_sentences,
        seed: ctx.cfg.model.seed,
    });
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    for (name, d) in [("train", &train), ("dev", &dev)] {
        let path = out.join(format!("{name}.jsonl"));
        save_dataset(d, &path)?;
        println!(
            "{name}: {} sentences, {} extractions -> {}",
            d.sentences.len(),
            d.num_extractions(),
            path.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    command: &'static str,
    config_hash: String,
    model: &'a ModelConfig,
    learn: &'a LearnConfig,
    vocab_size: usize,
    train_sentences: usize,
    train_extractions: usize,
    best_epoch: usize,
    epochs: &'a [EpochLog],
    dev: Option<Scores>,
}

fn cmd_train(ctx: &Context, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let train = ctx.load_split(Split::Train)?;
    let dev = ctx.optional_split(Split::Dev)?;
    let vocab = build_vocab(&train, cfg.min_count);
    let model = Model::new(cfg.model.clone(), vocab)?;
    let outcome = train_mle(model, &train, dev.as_ref(), &cfg.learn)?;
    let hash = ctx.hash();
    let out = out.unwrap_or_else(|| ctx.in_run("base.ckpt"));
    save_model(&out, &outcome.model, &hash)?;

    let dev_report = match &dev {
        Some(d) => Some(generate_eval(&outcome.model, d, cfg.learn.beam_k, cfg.learn.credit)?.1),
        None => None,
    };
    write_json(
        &ctx.in_run("train_metrics.json"),
        &TrainMetrics {
            command: "train",
            config_hash: hash,
            model: &cfg.model,
            learn: &cfg.learn,
            vocab_size: outcome.model.vocab.len(),
            train_sentences: train.sentences.len(),
            train_extractions: train.num_extractions(),
            best_epoch: outcome.best_epoch,
            epochs: &outcome.history,
            dev: dev_report.as_ref().map(Scores::from),
        },
    )?;
    let mut lines: Vec<String> = outcome
        .history
        .iter()
        .map(|e| format!("train epoch={} train_loss={:.6} select_loss={:.6}", e.epoch, e.train_loss, e.select_loss))
        .collect();
    let summary = match &dev_report {
        Some(r) => format!("dev auc {:.4} f1 {:.4}", r.auc, r.best_f1),
        None => "no dev set".to_string(),
    };
    if let Some(r) = &dev_report {
        lines.push(format!("train dev_auc={:.6} dev_f1={:.6}", r.auc, r.best_f1));
    }
    ctx.log(&lines)?;
    println!("train: best epoch {}, {summary} -> {}", outcome.best_epoch, out.display());
    Ok(())
}

#[derive(Serialize)]
struct GenerateMetrics {
    command: &'static str,
    split: &'static str,
    config_hash: String,
    sentences: usize,
    candidates: usize,
    scores: Option<Scores>,
}

fn cmd_generate(ctx: &Context, checkpoint: Option<PathBuf>, split: Split, out: Option<PathBuf>) -> Result<(), CliError> {
    let hash = ctx.hash();
    let checkpoint = checkpoint.unwrap_or_else(|| ctx.in_run("base.ckpt"));
    let model = load_model(&checkpoint, &hash, ctx.force)?;
    let data = ctx.load_split(split)?;
    let dump = generate(&model, &data, ctx.cfg.learn.beam_k, Some(&hash));
    let out = out.unwrap_or_else(|| ctx.in_run(&format!("{}_dump.jsonl", split.name())));
    save_records(&out, &dump, &hash)?;
    let report = if data.num_extractions() > 0 {
        Some(evaluate_dump(&dump, &data, ctx.cfg.learn.credit)?)
    } else {
        None
    };
    write_json(
        &ctx.in_run(&format!("generate_{}_metrics.json", split.name())),
        &GenerateMetrics {
            command: "generate",
            split: split.name(),
            config_hash: hash,
            sentences: data.sentences.len(),
            candidates: dump.len(),
            scores: report.as_ref().map(Scores::from),
        },
    )?;
    let summary = match &report {
        Some(r) => {
            ctx.log(&[format!("generate split={} auc={:.6} f1={:.6}", split.name(), r.auc, r.best_f1)])?;
            format!(", auc {:.4} f1 {:.4}", r.auc, r.best_f1)
        }
        None => String::new(),
    };
    println!("generate {}: {} candidates{summary} -> {}", split.name(), dump.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct CalibrateMetrics<'a> {
    command: &'static str,
    config_hash: String,
    learn: &'a LearnConfig,
    round: usize,
    pool_size: usize,
    positives: usize,
    negatives: usize,
    selected_epoch: usize,
    epochs: &'a [CalibrationEpoch],
    dev: Option<Scores>,
}

fn cmd_calibrate(
    ctx: &Context,
    checkpoint: Option<PathBuf>,
    dump: Option<PathBuf>,
    pool_path: Option<PathBuf>,
    round: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let hash = ctx.hash();
    let model = load_model(&checkpoint.unwrap_or_else(|| ctx.in_run("base.ckpt")), &hash, ctx.force)?;
    let records = load_records(&dump.unwrap_or_else(|| ctx.in_run("train_dump.jsonl")), &hash, ctx.force)?;
    let train = ctx.load_split(Split::Train)?;
    let dev = ctx.optional_split(Split::Dev)?;

    let mut pool = match &pool_path {
        Some(p) => load_pool(p, &hash, ctx.force)?,
        None => ExtractionPool::new(),
    };
    let added = pool.extend(annotate(&records, &train, round)?);
    info!("pool: {} samples ({added} new, {} positive)", pool.len(), pool.positives());
    let outcome = calibrate(&model, &pool, &train, dev.as_ref(), &cfg.learn, round)?;

    let out = out.unwrap_or_else(|| ctx.in_run("calibrated.ckpt"));
    save_model(&out, &outcome.model, &hash)?;
    save_pool(&ctx.in_run("pool.jsonl"), &pool, &hash)?;
    let dev_report = match &dev {
        Some(d) => Some(generate_eval(&outcome.model, d, cfg.learn.beam_k, cfg.learn.credit)?.1),
        None => None,
    };
    write_json(
        &ctx.in_run("calibrate_metrics.json"),
        &CalibrateMetrics {
            command: "calibrate",
            config_hash: hash,
            learn: &cfg.learn,
            round,
            pool_size: pool.len(),
            positives: pool.positives(),
            negatives: pool.len() - pool.positives(),
            selected_epoch: outcome.selected_epoch,
            epochs: &outcome.epochs,
            dev: dev_report.as_ref().map(Scores::from),
        },
    )?;
    let mut lines: Vec<String> = outcome
        .epochs
        .iter()
        .map(|e| {
            let auc = e.dev_auc.map(|a| format!(" dev_auc={a:.6}")).unwrap_or_default();
            format!(
                "calibrate round={round} epoch={} hinge_loss={:.6} active={:.4}{auc}",
                e.epoch, e.hinge_loss, e.active_fraction
            )
        })
        .collect();
    let summary = match &dev_report {
        Some(r) => {
            lines.push(format!("calibrate round={round} dev_auc={:.6} dev_f1={:.6}", r.auc, r.best_f1));
            format!(", dev auc {:.4} f1 {:.4}", r.auc, r.best_f1)
        }
        None => String::new(),
    };
    ctx.log(&lines)?;
    println!(
        "calibrate: pool {} ({} positive), epoch {} selected{summary} -> {}",
        pool.len(),
        pool.positives(),
        outcome.selected_epoch,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RerankMetrics {
    command: &'static str,
    split: &'static str,
    config_hash: String,
    records: usize,
    scores: Scores,
}

fn cmd_rerank(
    ctx: &Context,
    checkpoint: Option<PathBuf>,
    dump: Option<PathBuf>,
    split: Split,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let hash = ctx.hash();
    let model = load_model(&checkpoint.unwrap_or_else(|| ctx.in_run("calibrated.ckpt")), &hash, ctx.force)?;
    let dump = dump.unwrap_or_else(|| ctx.in_run(&format!("{}_dump.jsonl", split.name())));
    let records = load_records(&dump, &hash, ctx.force)?;
    let data = ctx.load_split(split)?;
    let rescored = rescore_dump(&records, &model, &data)?;
    let report = evaluate_dump(&rescored, &data, ctx.cfg.learn.credit)?;
    let out = out.unwrap_or_else(|| ctx.in_run(&format!("rerank_{}_dump.jsonl", split.name())));
    save_records(&out, &rescored, &hash)?;
    write_json(
        &ctx.in_run(&format!("rerank_{}_metrics.json", split.name())),
        &RerankMetrics {
            command: "rerank",
            split: split.name(),
            config_hash: hash,
            records: rescored.len(),
            scores: Scores::from(&report),
        },
    )?;
    ctx.log(&[format!("rerank split={} auc={:.6} f1={:.6}", split.name(), report.auc, report.best_f1)])?;
    println!(
        "rerank {}: {} records, auc {:.4} f1 {:.4} -> {}",
        split.name(),
        rescored.len(),
        report.auc,
        report.best_f1,
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(ctx: &Context, dump: &Path, split: Split) -> Result<(), CliError> {
    let records = load_records(dump, &ctx.hash(), ctx.force)?;
    let data = ctx.load_split(split)?;
    let report = evaluate_dump(&records, &data, ctx.cfg.learn.credit)?;
    let stem = dump
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dump".into());
    write_json(&ctx.in_run(&format!("eval_{stem}.json")), &report)?;
    ctx.log(&[format!("evaluate dump={stem} split={} auc={:.6} f1={:.6}", split.name(), report.auc, report.best_f1)])?;
    println!(
        "evaluate {stem} on {}: auc {:.4} f1 {:.4} ({} of {} gold matched by {} predictions)",
        split.name(),
        report.auc,
        report.best_f1,
        report.counts.matched,
        report.counts.gold,
        report.counts.predicted
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    learn: LearnConfig,
    base_checkpoint: PathBuf,
    base: MetricSummary,
    completed: usize,
}

#[derive(Serialize, Deserialize)]
struct IterMetrics {
    config_hash: String,
    #[serde(flatten)]
    record: IterationRecord,
}

#[derive(Serialize)]
struct IterateMetrics<'a> {
    command: &'static str,
    config_hash: String,
    learn: &'a LearnConfig,
    base: MetricSummary,
    iterations: &'a [IterationRecord],
    best_iteration: usize,
    best_auc: f64,
}

fn iter_dir(ctx: &Context, t: usize) -> PathBuf {
    ctx.in_run(&format!("iter_{t:03}"))
}

/// Rebuilds loop state from the artifacts of completed iterations.
fn restore_state(ctx: &Context, manifest: &Manifest, base: Model) -> Result<IterationState, CliError> {
    let hash = ctx.hash();
    let mut history = Vec::with_capacity(manifest.completed);
    for t in 1..=manifest.completed {
        let m: IterMetrics = read_json(&iter_dir(ctx, t).join("metrics.json"))?;
        check_hash(Some(&m.config_hash), &hash, &iter_dir(ctx, t), ctx.force)?;
        history.push(m.record);
    }
    let (mut best_auc, mut best_iteration, mut since_best) = (manifest.base.auc, 0, 0);
    for r in &history {
        if r.generate.auc > best_auc {
            best_auc = r.generate.auc;
            best_iteration = r.iteration;
            since_best = 0;
        } else {
            since_best += 1;
        }
    }
    let base_dev_dump = load_records(&ctx.in_run("base_dev_dump.jsonl"), &hash, ctx.force)?;
    let load_iter_model = |t: usize| load_model(&iter_dir(ctx, t).join("model.ckpt"), &hash, ctx.force);
    let (model, pool, prev_dev_dump) = match manifest.completed {
        0 => (base.clone(), ExtractionPool::new(), base_dev_dump.clone()),
        t => (
            load_iter_model(t)?,
            load_pool(&iter_dir(ctx, t).join("pool.jsonl"), &hash, ctx.force)?,
            load_records(&iter_dir(ctx, t).join("dev_dump.jsonl"), &hash, ctx.force)?,
        ),
    };
    let best_model = match best_iteration {
        0 => base,
        t => load_iter_model(t)?,
    };
    Ok(IterationState {
        iteration: manifest.completed,
        model,
        best_model,
        best_iteration,
        best_auc,
        since_best,
        pool,
        history,
        base: manifest.base,
        base_dev_dump,
        prev_dev_dump,
    })
}

fn cmd_iterate(ctx: &Context, checkpoint: Option<PathBuf>, resume_run: bool) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let hash = ctx.hash();
    let checkpoint = checkpoint.unwrap_or_else(|| ctx.in_run("base.ckpt"));
    let base = load_model(&checkpoint, &hash, ctx.force)?;
    let train = ctx.load_split(Split::Train)?;
    let dev = ctx.load_split(Split::Dev)?;
    let manifest_path = ctx.in_run("manifest.json");

    let state = if resume_run {
        let manifest: Manifest = read_json(&manifest_path)?;
        check_hash(Some(&manifest.config_hash), &hash, &manifest_path, ctx.force)?;
        if manifest.learn != cfg.learn {
            warn!("learning settings differ from the interrupted run; continuing with the current ones");
        }
        info!("resuming after iteration {}", manifest.completed);
        restore_state(ctx, &manifest, base)?
    } else {
        if manifest_path.exists() && !ctx.force {
            return Err(CliError::Config(format!(
                "{} already exists (pass --resume to continue it or --force to start over)",
                manifest_path.display()
            )));
        }
        let state = IterationState::start(base, &dev, &cfg.learn)?;
        save_records(&ctx.in_run("base_dev_dump.jsonl"), &state.base_dev_dump, &hash)?;
        write_json(
            &manifest_path,
            &Manifest {
                config_hash: hash.clone(),
                learn: cfg.learn.clone(),
                base_checkpoint: checkpoint.clone(),
                base: state.base,
                completed: 0,
            },
        )?;
        ctx.log(&[format!("iterate iteration=0 auc={:.6} f1={:.6}", state.base.auc, state.base.best_f1)])?;
        state
    };

    let base_summary = state.base;
    let mut failure: Option<CliError> = None;
    let result = resume(state, &train, &dev, &cfg.learn, |a| {
        let t = a.record.iteration;
        let dir = iter_dir(ctx, t);
        let saved = (|| {
            save_model(&dir.join("model.ckpt"), a.model, &hash)?;
            save_pool(&dir.join("pool.jsonl"), a.pool, &hash)?;
            save_records(&dir.join("train_dump.jsonl"), a.train_dump, &hash)?;
            save_records(&dir.join("dev_dump.jsonl"), a.dev_dump, &hash)?;
            write_json(
                &dir.join("metrics.json"),
                &IterMetrics {
                    config_hash: hash.clone(),
                    record: a.record.clone(),
                },
            )?;
            write_json(
                &manifest_path,
                &Manifest {
                    config_hash: hash.clone(),
                    learn: cfg.learn.clone(),
                    base_checkpoint: checkpoint.clone(),
                    base: base_summary,
                    completed: t,
                },
            )?;
            let r = a.record;
            let mut lines: Vec<String> = r
                .hinge_losses
                .iter()
                .enumerate()
                .map(|(e, l)| format!("iterate iteration={t} epoch={e} hinge_loss={l:.6}"))
                .collect();
            lines.push(format!(
                "iterate iteration={t} auc={:.6} f1={:.6} rerank_auc={:.6} rerank_f1={:.6} pool={} positives={}",
                r.generate.auc, r.generate.best_f1, r.rerank.auc, r.rerank.best_f1, r.pool_size, r.positives
            ));
            ctx.log(&lines)
        })();
        saved.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            LearnError::Artifact(msg)
        })
    });
    let state = match (result, failure) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?,
    };

    save_model(&ctx.in_run("best.ckpt"), &state.best_model, &hash)?;
    write_json(
        &ctx.in_run("iterate_metrics.json"),
        &IterateMetrics {
            command: "iterate",
            config_hash: hash,
            learn: &cfg.learn,
            base: state.base,
            iterations: &state.history,
            best_iteration: state.best_iteration,
            best_auc: state.best_auc,
        },
    )?;
    let last = state.history.last().map(|r| r.generate).unwrap_or(state.base);
    println!(
        "iterate: {} iterations, base auc {:.4}, last auc {:.4} f1 {:.4}, best auc {:.4} at iteration {}",
        state.iteration, state.base.auc, last.auc, last.best_f1, state.best_auc, state.best_iteration
    );
    Ok(())
}
