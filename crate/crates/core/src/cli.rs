//! Command-line surface. Argument definitions and command bodies live here
//! so they can be driven in-process; `src/bin/simvec.rs` only maps the
//! result to an exit code.
//!
//! Settings resolve as flags, then the `--config` JSON file, then defaults.
//! One `--seed` drives every random choice of an invocation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    bench_inference, foil_accuracy, foil_pairs_from, kendall_tau_b, kendall_tau_c, pascal50s_accuracy,
    pascal_items_from, score_all, EvalReport, FoilRecord, PascalRecord, Scorer,
};
use crate::io::{
    load_dataset, load_jsonl, read_cache, split_dataset, write_atomic, write_cache, write_jsonl, CaptionSample,
    EmbeddingCache, EmbeddingSet,
};
use crate::model::{load_checkpoint, save_checkpoint, MetricConfig, MetricMode, MetricScorer, Profile};
use crate::synth::{generate, SynthConfig};
use crate::train::{train, EpochRecord, Example, TrainConfig};

/// Lower bound on the reference capacity recorded in trained checkpoints.
pub const DEFAULT_MAX_REFS: usize = 16;
pub const SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Debug, Parser)]
#[command(name = "simvec", version, about = "Learned hallucination-robust caption scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset, FOIL pairs, PASCAL items and their cache into --out.
    GenSynth,
    /// Train on --dataset/--cache and write --checkpoint plus a history file.
    Train,
    /// Score every sample of --dataset; writes JSONL {id, score} to --out.
    Score,
    /// Pairwise hallucination accuracy on a FOIL pair file given as --dataset.
    EvalFoil,
    /// Kendall tau-b and tau-c against human judgments.
    EvalCorr,
    /// PASCAL-50S majority agreement on a pair file given as --dataset.
    EvalPascal,
    /// Time per-sample inference.
    Bench,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Training history output; defaults next to the checkpoint.
    #[arg(long, global = true)]
    pub history: Option<PathBuf>,
    /// JSON file with any subset of the run settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// full | raw_features | mlp_ablation | aggregate:max | aggregate:mean
    #[arg(long, global = true)]
    pub mode: Option<MetricMode>,
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, global = true)]
    pub refs_per_item: Option<usize>,
    /// FOIL reference count; both 1 and 4 when omitted.
    #[arg(long, global = true)]
    pub n_refs: Option<usize>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Use embeddings exactly as stored instead of L2-normalizing them.
    #[arg(long, global = true)]
    pub no_normalize: bool,
}

/// Every tunable of a run after precedence has been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(with = "mode_string")]
    pub mode: MetricMode,
    pub profile: Profile,
    pub refs_per_item: usize,
    pub n_refs: Option<usize>,
    pub count: usize,
    pub threads: usize,
    pub repetitions: usize,
    pub normalize: bool,
    /// `train.seed` is always replaced by the run seed.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: MetricMode::Full,
            profile: Profile::Desk,
            refs_per_item: 5,
            n_refs: None,
            count: 1000,
            threads: 1,
            repetitions: 1,
            normalize: true,
            train: TrainConfig::default(),
        }
    }
}

mod mode_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::MetricMode;

    pub fn serialize<S: Serializer>(m: &MetricMode, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MetricMode, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    /// Defaults, overlaid by the `--config` file, overlaid by flags.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
                    message: e.to_string(),
                })?
            }
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = flags.$flag { cfg.$($field).+ = v.into(); })*
            };
        }
        overlay!(
            seed => seed,
            mode => mode,
            profile => profile,
            refs_per_item => refs_per_item,
            count => count,
            threads => threads,
            repetitions => repetitions,
            lr => train.learning_rate,
            epochs => train.max_epochs,
            patience => train.patience_epochs,
            batch_size => train.batch_size,
        );
        if flags.n_refs.is_some() {
            cfg.n_refs = flags.n_refs;
        }
        if flags.no_normalize {
            cfg.normalize = false;
        }
        cfg.train.seed = cfg.seed;
        cfg.train.validate()?;
        Ok(cfg)
    }

    fn foil_refs(&self) -> Vec<usize> {
        self.n_refs.map_or_else(|| vec![1, 4], |n| vec![n])
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Validation(format!("{command} requires --{flag}")))
}

/// Reads a cache and optionally L2-normalizes every vector.
pub fn load_cache(path: impl AsRef<Path>, normalize: bool) -> Result<EmbeddingCache> {
    let mut cache = read_cache(path)?;
    if normalize {
        cache.normalize();
    }
    Ok(cache)
}

/// Rejects caches whose widths differ from what a checkpoint was trained on.
pub fn check_dims(cfg: &MetricConfig, cache: &EmbeddingCache) -> Result<()> {
    if (cfg.simvec.d_clip, cfg.simvec.d_text) != (cache.d_clip(), cache.d_text()) {
        return Err(Error::Config(format!(
            "checkpoint expects widths ({}, {}), cache has ({}, {})",
            cfg.simvec.d_clip,
            cfg.simvec.d_text,
            cache.d_clip(),
            cache.d_text()
        )));
    }
    Ok(())
}

/// Embeddings for `samples` in order; names the first id missing from the cache.
pub fn lookup(samples: &[CaptionSample], cache: &EmbeddingCache) -> Result<Vec<EmbeddingSet>> {
    samples
        .iter()
        .map(|s| {
            let e = cache.require(&s.id)?;
            if e.n_refs() != s.references.len() {
                return Err(Error::Validation(format!(
                    "sample {:?} lists {} references but the cache holds {}",
                    s.id,
                    s.references.len(),
                    e.n_refs()
                )));
            }
            Ok(e.clone())
        })
        .collect()
}

/// Loads a checkpoint into a scorer. Parameters are stored as `f32` and
/// evaluated in `f64`.
pub fn load_scorer(path: impl AsRef<Path>) -> Result<MetricScorer<f64>> {
    let (params, cfg) = load_checkpoint(path)?;
    MetricScorer::new(params, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub id: String,
    pub score: f64,
}

pub fn score_lines<S: Scorer + Sync + ?Sized>(
    scorer: &S,
    samples: &[CaptionSample],
    cache: &EmbeddingCache,
    threads: usize,
) -> Result<Vec<ScoreLine>> {
    let sets = lookup(samples, cache)?;
    let scores = score_all(&|e: &EmbeddingSet| scorer.score(e), &sets, threads)?;
    Ok(samples
        .iter()
        .zip(scores)
        .map(|(s, score)| ScoreLine {
            id: s.id.clone(),
            score,
        })
        .collect())
}

pub fn corr_report<S: Scorer + Sync + ?Sized>(
    scorer: &S,
    samples: &[CaptionSample],
    cache: &EmbeddingCache,
    threads: usize,
) -> Result<EvalReport> {
    let truth = samples
        .iter()
        .map(|s| {
            s.human_score
                .ok_or_else(|| Error::Validation(format!("sample {:?} has no human_score", s.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lines = score_lines(scorer, samples, cache, threads)?;
    let scores: Vec<f64> = lines.iter().map(|l| l.score).collect();
    Ok(EvalReport::new("corr", samples.len())
        .with_metric("tau_b", kendall_tau_b(&scores, &truth)?)
        .with_metric("tau_c", kendall_tau_c(&scores, &truth)?))
}

pub fn foil_report<S: Scorer + ?Sized>(
    scorer: &S,
    records: &[FoilRecord],
    cache: &EmbeddingCache,
    n_refs: &[usize],
) -> Result<EvalReport> {
    let pairs = foil_pairs_from(records, cache)?;
    let mut report = EvalReport::new("foil", pairs.len());
    for &n in n_refs {
        let outcome = foil_accuracy(scorer, &pairs, n)?;
        report = report.with_metric(format!("accuracy_{n}ref"), outcome.accuracy);
    }
    Ok(report)
}

pub fn pascal_report<S: Scorer + ?Sized>(
    scorer: &S,
    records: &[PascalRecord],
    cache: &EmbeddingCache,
    refs_per_item: usize,
    seed: u64,
) -> Result<EvalReport> {
    let items = pascal_items_from(records, cache)?;
    let outcome = pascal50s_accuracy(scorer, &items, refs_per_item, seed)?;
    let mut report = EvalReport::new("pascal50s", items.len()).with_metric("mean", outcome.mean);
    for (cat, acc) in outcome.per_category {
        report = report.with_metric(cat.to_string(), acc);
    }
    Ok(report)
}

pub fn bench_report<S: Scorer + ?Sized>(scorer: &S, sets: &[EmbeddingSet], repetitions: usize) -> Result<EvalReport> {
    let timing = bench_inference(scorer, sets, repetitions)?;
    let mut report = EvalReport::new("bench", sets.len())
        .with_metric("samples_per_second", 1e3 * timing.count as f64 / timing.total_ms);
    report.timing = Some(timing);
    Ok(report)
}

/// Output files of `gen-synth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub dataset: PathBuf,
    pub cache: PathBuf,
    pub foil: PathBuf,
    pub pascal: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            dataset: dir.join("dataset.jsonl"),
            cache: dir.join("embeddings.svec"),
            foil: dir.join("foil.jsonl"),
            pascal: dir.join("pascal.jsonl"),
        }
    }
}

pub fn gen_synth(count: usize, seed: u64, out_dir: impl AsRef<Path>) -> Result<SynthPaths> {
    let suite = generate(SynthConfig::new(count, seed))?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = SynthPaths::in_dir(out_dir);
    write_cache(&paths.cache, &suite.cache)?;
    write_jsonl(&paths.foil, &suite.foil)?;
    write_jsonl(&paths.pascal, &suite.pascal)?;
    write_jsonl(&paths.dataset, &suite.samples)?;
    Ok(paths)
}

/// Sample ids of each partition used by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Contents of the history file written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_tau_c: Option<f64>,
    /// Validation scores of the returned parameters, before storage rounding.
    pub validation_scores: Vec<ScoreLine>,
    pub split: SplitIds,
    pub run: RunConfig,
}

/// Trains on the 80% partition, early-stops on the 10% validation partition
/// and keeps the remaining 10% untouched.
pub fn train_command(
    dataset: &Path,
    cache_path: &Path,
    checkpoint: &Path,
    history_path: &Path,
    run: &RunConfig,
) -> Result<TrainHistory> {
    let samples = load_dataset(dataset)?;
    let cache = load_cache(cache_path, run.normalize)?;
    let sets = lookup(&samples, &cache)?;
    let max_refs = sets
        .iter()
        .map(EmbeddingSet::n_refs)
        .max()
        .unwrap_or(1)
        .max(DEFAULT_MAX_REFS);
    let examples: Vec<Example> = samples
        .into_iter()
        .zip(sets)
        .map(|(s, embeddings)| Example {
            id: s.id,
            embeddings,
            human_score: s.human_score,
        })
        .collect();
    let (tr, val, test) = split_dataset(examples, SPLIT_RATIOS, run.seed)?;
    let cfg = MetricConfig::new(run.profile, run.mode, cache.d_clip(), cache.d_text(), max_refs);
    let outcome = train(&tr, &val, &cfg, &run.train)?;
    save_checkpoint(&outcome.params, &cfg, checkpoint)?;

    let ids = |xs: &[Example]| xs.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    let best_val_tau_c = outcome
        .best_epoch
        .and_then(|b| outcome.history.iter().find(|h| h.epoch == b))
        .and_then(|h| h.val_tau_c);
    let history = TrainHistory {
        best_epoch: outcome.best_epoch,
        best_val_tau_c,
        validation_scores: val
            .iter()
            .zip(&outcome.best_val_scores)
            .map(|(e, &score)| ScoreLine {
                id: e.id.clone(),
                score,
            })
            .collect(),
        split: SplitIds {
            train: ids(&tr),
            validation: ids(&val),
            test: ids(&test),
        },
        epochs: outcome.history,
        run: run.clone(),
    };
    let json = serde_json::to_vec_pretty(&history).map_err(|e| Error::Validation(e.to_string()))?;
    write_atomic(history_path, &json)?;
    Ok(history)
}

fn write_report(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Validation(e.to_string()))?;
        write_atomic(path, &json)?;
    }
    Ok(())
}

fn default_history_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".history.json");
    checkpoint.with_file_name(name)
}

/// Loads the scorer and cache shared by the scoring and evaluation commands.
fn scoring_inputs(flags: &Flags, run: &RunConfig, command: &str) -> Result<(MetricScorer<f64>, EmbeddingCache)> {
    let scorer = load_scorer(required(&flags.checkpoint, "checkpoint", command)?)?;
    let cache = load_cache(required(&flags.cache, "cache", command)?, run.normalize)?;
    check_dims(&scorer.config, &cache)?;
    Ok((scorer, cache))
}

/// Runs one parsed invocation and returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let flags = &cli.flags;
    let run = RunConfig::resolve(flags)?;
    let mut echo = BTreeMap::new();
    echo.insert("seed", serde_json::json!(run.seed));
    echo.insert("normalize", serde_json::json!(run.normalize));

    match cli.command {
        Command::GenSynth => {
            let out = required(&flags.out, "out", "gen-synth")?;
            let paths = gen_synth(run.count, run.seed, out)?;
            Ok(format!(
                "wrote {} samples to {}\n",
                run.count,
                paths.dataset.parent().unwrap_or(out).display()
            ))
        }
        Command::Train => {
            let dataset = required(&flags.dataset, "dataset", "train")?;
            let cache = required(&flags.cache, "cache", "train")?;
            let checkpoint = required(&flags.checkpoint, "checkpoint", "train")?;
            let history_path = flags
                .history
                .clone()
                .unwrap_or_else(|| default_history_path(checkpoint));
            let h = train_command(dataset, cache, checkpoint, &history_path, &run)?;
            let mut out = String::new();
            for e in &h.epochs {
                let tau = e.val_tau_c.map_or_else(|| "n/a".to_string(), |t| format!("{t:.4}"));
                out.push_str(&format!(
                    "epoch {:>3}  loss {:.6}  val_tau_c {tau:>8}  {:>8.0} ms\n",
                    e.epoch, e.mean_loss, e.wall_ms
                ));
            }
            out.push_str(&format!(
                "best epoch {}  checkpoint {}\n",
                h.best_epoch.map_or_else(|| "none".to_string(), |b| b.to_string()),
                checkpoint.display()
            ));
            Ok(out)
        }
        Command::Score => {
            let samples = load_dataset(required(&flags.dataset, "dataset", "score")?)?;
            let out = required(&flags.out, "out", "score")?;
            let (scorer, cache) = scoring_inputs(flags, &run, "score")?;
            let lines = score_lines(&scorer, &samples, &cache, run.threads)?;
            write_jsonl(out, &lines)?;
            Ok(format!("scored {} samples into {}\n", lines.len(), out.display()))
        }
        Command::EvalFoil | Command::EvalCorr | Command::EvalPascal | Command::Bench => {
            let dataset = required(&flags.dataset, "dataset", "evaluation")?;
            let (scorer, cache) = scoring_inputs(flags, &run, "evaluation")?;
            echo.insert("mode", serde_json::json!(scorer.config.mode().to_string()));
            let mut report = match cli.command {
                Command::EvalFoil => {
                    let records: Vec<FoilRecord> = load_jsonl(dataset)?;
                    echo.insert("n_refs", serde_json::json!(run.foil_refs()));
                    foil_report(&scorer, &records, &cache, &run.foil_refs())?
                }
                Command::EvalCorr => corr_report(&scorer, &load_dataset(dataset)?, &cache, run.threads)?,
                Command::EvalPascal => {
                    let records: Vec<PascalRecord> = load_jsonl(dataset)?;
                    echo.insert("refs_per_item", serde_json::json!(run.refs_per_item));
                    pascal_report(&scorer, &records, &cache, run.refs_per_item, run.seed)?
                }
                _ => {
                    let sets = lookup(&load_dataset(dataset)?, &cache)?;
                    echo.insert("repetitions", serde_json::json!(run.repetitions));
                    bench_report(&scorer, &sets, run.repetitions)?
                }
            };
            report.config = serde_json::json!(echo);
            write_report(&report, flags.out.as_deref())?;
            Ok(report.summary_table())
        }
    }
}
