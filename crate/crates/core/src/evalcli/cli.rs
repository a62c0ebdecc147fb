//! `mrc` command-line front end.
//!
//! Every flag has a config-file key of the same name with `-` replaced by
//! `_`; command-line values override the file. Exit codes: 0 success,
//! 1 usage or configuration error, 2 data error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::config::{KvConfig, LrSchedule, TrainConfig};
use super::dump::dump_maps;
use super::eval::{check_compatible, evaluate, predict_sample, sample_maps};
use super::gradcheck::{model_grad_check, worst_norm_error};
use super::train::train;
use crate::data::{load_records, synth_generate, Manifest, SynthConfig};
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, AblationConfig, ModelParams};
use crate::numerics::{Precision, Scalar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mrc", version, about = "Clip-based video moment retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-moment synthetic dataset.
    Synth(SynthArgs),
    /// Train a model on the train split of a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split and write a report.
    Eval(EvalArgs),
    /// Retrieve the moment for one sample, optionally dumping score maps.
    Predict(PredictArgs),
    /// Finite-difference check of the full-model gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    val_samples: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d_v: Option<usize>,
    #[arg(long)]
    d_a: Option<usize>,
    #[arg(long)]
    d_q: Option<usize>,
    #[arg(long)]
    signal: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory for checkpoints and the training log.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    use_av_encoder: Option<bool>,
    #[arg(long)]
    use_pointer: Option<bool>,
    #[arg(long)]
    use_2dp: Option<bool>,
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    lr_schedule: Option<LrSchedule>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    /// Expected hidden size; a checkpoint with another size is rejected.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    precision: Option<Precision>,
    /// Report path (line-delimited JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    precision: Option<Precision>,
    /// Directory for CSV and PGM dumps of the score maps.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

/// Keys accepted in a config file by any subcommand. A file may carry keys
/// for other subcommands; anything outside this list is an error.
const KNOWN_KEYS: &[&str] = &[
    "out", "seed", "n_samples", "val_samples", "m", "d_v", "d_a", "d_q", "signal", "manifest",
    "lr", "weight_decay", "batch_size", "dropout", "lambda", "d", "max_steps", "eval_every",
    "use_av_encoder", "use_pointer", "use_2dp", "precision", "lr_schedule", "checkpoint",
    "split", "report", "id", "dump", "eps", "tol",
];

fn load_kv(path: Option<&Path>) -> Result<KvConfig> {
    let kv = match path {
        Some(p) => KvConfig::read(p)?,
        None => KvConfig::default(),
    };
    if let Some(k) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
        return Err(Error::Config(format!("unknown config key {k:?}")));
    }
    Ok(kv)
}

/// Command-line value, else config-file value, else `None`.
fn pick<T: std::str::FromStr>(cli: Option<T>, kv: &mut KvConfig, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    let from_file = kv.take(key)?;
    Ok(cli.or(from_file))
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required setting `{key}` (flag --{})", key.replace('_', "-"))))
}

/// Maps an error to the documented exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Io { .. } | Error::Format { .. } | Error::Data(_) | Error::ShapeMismatch { .. } => {
            EXIT_DATA
        }
        Error::NonFiniteLoss { .. } | Error::Numeric(_) => EXIT_NUMERIC,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
    }
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let mut kv = load_kv(a.config.as_deref())?;
    let d = SynthConfig::default();
    let out = required(pick(a.out, &mut kv, "out")?, "out")?;
    let config = SynthConfig {
        n_samples: pick(a.n_samples, &mut kv, "n_samples")?.unwrap_or(d.n_samples),
        val_samples: pick(a.val_samples, &mut kv, "val_samples")?.unwrap_or(d.val_samples),
        m: pick(a.m, &mut kv, "m")?.unwrap_or(d.m),
        d_v: pick(a.d_v, &mut kv, "d_v")?.unwrap_or(d.d_v),
        d_a: pick(a.d_a, &mut kv, "d_a")?.unwrap_or(d.d_a),
        d_q: pick(a.d_q, &mut kv, "d_q")?.unwrap_or(d.d_q),
        signal: pick(a.signal, &mut kv, "signal")?.unwrap_or(d.signal),
        seed: pick(a.seed, &mut kv, "seed")?.unwrap_or(d.seed),
    };
    let manifest = synth_generate(&config, &out)?;
    println!(
        "wrote {} samples ({} val) to {}",
        manifest.records.len(),
        config.val_samples,
        out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut kv = load_kv(a.config.as_deref())?;
    let manifest_path = required(pick(a.manifest, &mut kv, "manifest")?, "manifest")?;
    let out = required(pick(a.out, &mut kv, "out")?, "out")?;
    let mut config = TrainConfig::default();
    config.apply(&mut kv)?;
    macro_rules! set {
        ($($field:ident).+ <- $v:expr) => {
            if let Some(v) = $v {
                config.$($field).+ = v;
            }
        };
    }
    set!(lr <- a.lr);
    set!(weight_decay <- a.weight_decay);
    set!(batch_size <- a.batch_size);
    set!(dropout <- a.dropout);
    set!(lambda <- a.lambda);
    set!(d <- a.d);
    set!(m <- a.m);
    set!(max_steps <- a.max_steps);
    set!(seed <- a.seed);
    set!(eval_every <- a.eval_every);
    set!(ablation.use_av_encoder <- a.use_av_encoder);
    set!(ablation.use_pointer <- a.use_pointer);
    set!(ablation.use_2dp <- a.use_2dp);
    set!(precision <- a.precision);
    set!(lr_schedule <- a.lr_schedule);
    config.validate()?;

    let manifest = Manifest::read(&manifest_path)?;
    let (train_s, widths) = load_records(&manifest, &manifest.split("train"), config.m, None)?;
    let val_recs = manifest.split("val");
    let val_s = if val_recs.is_empty() {
        Vec::new()
    } else {
        load_records(&manifest, &val_recs, config.m, Some(widths.asr))?.0
    };
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    std::fs::write(out.join("config.txt"), config.to_kv()).map_err(|e| Error::io(&out, e))?;
    let t0 = Instant::now();
    match config.precision {
        Precision::F32 => run_train::<f32>(&config, &train_s, &val_s, widths, &out)?,
        Precision::F64 => run_train::<f64>(&config, &train_s, &val_s, widths, &out)?,
    }
    write_timing(&out.join("timing.json"), t0)
}

fn run_train<T: Scalar>(
    config: &TrainConfig,
    train_s: &[crate::data::Sample],
    val_s: &[crate::data::Sample],
    widths: crate::data::FeatureWidths,
    out: &Path,
) -> Result<()> {
    let outcome = train::<T>(config, train_s, val_s, widths)?;
    outcome.save(out)?;
    let first = outcome.log.first().map_or(f64::NAN, |l| l.loss);
    let last = outcome.log.last().map_or(f64::NAN, |l| l.loss);
    println!(
        "trained {} steps: loss {first:.6} -> {last:.6}; best step {}",
        config.max_steps, outcome.best_step
    );
    if let Some(r) = &outcome.last_eval {
        println!(
            "val R@1 IoU0.5 {:.4} IoU0.7 {:.4}",
            r.summary.recall_at_1_iou_0_5, r.summary.recall_at_1_iou_0_7
        );
    }
    Ok(())
}

fn write_timing(path: &Path, t0: Instant) -> Result<()> {
    let v = serde_json::json!({ "wall_clock_s": t0.elapsed().as_secs_f64() });
    std::fs::write(path, format!("{v}\n")).map_err(|e| Error::io(path, e))
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let mut kv = load_kv(a.config.as_deref())?;
    let ckpt = required(pick(a.checkpoint, &mut kv, "checkpoint")?, "checkpoint")?;
    let manifest_path = required(pick(a.manifest, &mut kv, "manifest")?, "manifest")?;
    let split = pick(a.split, &mut kv, "split")?.unwrap_or_else(|| "val".into());
    let m = pick(a.m, &mut kv, "m")?.unwrap_or(TrainConfig::default().m);
    let d = pick(a.d, &mut kv, "d")?;
    let precision = pick(a.precision, &mut kv, "precision")?.unwrap_or_default();
    let report_path = pick(a.report, &mut kv, "report")?;
    match precision {
        Precision::F32 => run_eval::<f32>(&ckpt, &manifest_path, &split, m, d, report_path),
        Precision::F64 => run_eval::<f64>(&ckpt, &manifest_path, &split, m, d, report_path),
    }
}

fn run_eval<T: Scalar>(
    ckpt: &Path,
    manifest_path: &Path,
    split: &str,
    m: usize,
    d: Option<usize>,
    report_path: Option<PathBuf>,
) -> Result<()> {
    let model: ModelParams<T> = load_checkpoint(ckpt)?;
    let manifest = Manifest::read(manifest_path)?;
    let recs = manifest.split(split);
    if recs.is_empty() {
        return Err(Error::Data(format!("split {split:?} is empty")));
    }
    let (samples, widths) = load_records(&manifest, &recs, m, Some(model.config.d_asr))?;
    check_compatible(&model, widths, d)?;
    let t0 = Instant::now();
    let report = evaluate(&model, &samples)?;
    let s = &report.summary;
    println!(
        "{} samples: R@1 IoU0.5 {:.4} IoU0.7 {:.4} mean IoU {:.4}",
        s.samples, s.recall_at_1_iou_0_5, s.recall_at_1_iou_0_7, s.mean_iou
    );
    if let Some(p) = report_path {
        report.write(&p)?;
        let mut timing = p.clone().into_os_string();
        timing.push(".timing.json");
        write_timing(Path::new(&timing), t0)?;
    }
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let mut kv = load_kv(a.config.as_deref())?;
    let ckpt = required(pick(a.checkpoint, &mut kv, "checkpoint")?, "checkpoint")?;
    let manifest_path = required(pick(a.manifest, &mut kv, "manifest")?, "manifest")?;
    let id = required(pick(a.id, &mut kv, "id")?, "id")?;
    let m = pick(a.m, &mut kv, "m")?.unwrap_or(TrainConfig::default().m);
    let precision = pick(a.precision, &mut kv, "precision")?.unwrap_or_default();
    let dump = pick(a.dump, &mut kv, "dump")?;
    match precision {
        Precision::F32 => run_predict::<f32>(&ckpt, &manifest_path, &id, m, dump),
        Precision::F64 => run_predict::<f64>(&ckpt, &manifest_path, &id, m, dump),
    }
}

fn run_predict<T: Scalar>(
    ckpt: &Path,
    manifest_path: &Path,
    id: &str,
    m: usize,
    dump: Option<PathBuf>,
) -> Result<()> {
    let model: ModelParams<T> = load_checkpoint(ckpt)?;
    let manifest = Manifest::read(manifest_path)?;
    let rec = manifest
        .find(id)
        .ok_or_else(|| Error::Data(format!("unknown sample id {id:?}")))?;
    let (samples, widths) = load_records(&manifest, &[rec], m, Some(model.config.d_asr))?;
    check_compatible(&model, widths, None)?;
    let s = &samples[0];
    let span = predict_sample(&model, s)?;
    let maps = sample_maps(&model, s)?;
    let score = maps.fused.at2(span.start_clip, span.end_clip).as_f64();
    println!(
        "{id}: clips {}..{} = [{:.3}, {:.3}] s, score {score:.6}",
        span.start_clip, span.end_clip, span.start_s, span.end_s
    );
    if let Some(dir) = dump {
        dump_maps(&dir, id, &maps)?;
    }
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs) -> Result<()> {
    let mut kv = load_kv(a.config.as_deref())?;
    let d = pick(a.d, &mut kv, "d")?.unwrap_or(8);
    let m = pick(a.m, &mut kv, "m")?.unwrap_or(6);
    let seed = pick(a.seed, &mut kv, "seed")?.unwrap_or(0);
    let eps = pick(a.eps, &mut kv, "eps")?.unwrap_or(1e-5);
    let tol = pick(a.tol, &mut kv, "tol")?.unwrap_or(1e-5);
    let lambda = pick(a.lambda, &mut kv, "lambda")?.unwrap_or(0.1);
    let checks = model_grad_check(d, m, AblationConfig::FULL, lambda, seed, eps)?;
    for c in &checks {
        println!(
            "{:<32} norm-rel {:.3e}  max elem-rel {:.3e}",
            c.name, c.check.norm_rel_error, c.check.max_rel_error
        );
    }
    let worst = worst_norm_error(&checks);
    if worst < tol {
        println!("gradcheck passed: worst {worst:.3e} < {tol:e}");
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradcheck failed: worst {worst:.3e} >= {tol:e}")))
    }
}
