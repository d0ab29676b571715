//! `tfad`: train, detect, eval, synth and augment from the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tfad::augment::build_augmented_set;
use tfad::detect::detect;
use tfad::eval::{adjusted_counts, Counts, EvalReport};
use tfad::io::{self, write_atomic};
use tfad::nn::Checkpoint;
use tfad::pipeline::{fit, training_pairs};
use tfad::synth::make_benchmark;
use tfad::{AnomalyKind, BenchmarkConfig, Error, PipelineConfig, RngSeed, Series};

#[derive(Parser)]
#[command(name = "tfad", version, about = "Time-frequency window-contrastive anomaly detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Root seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus its loss trace.
    Train {
        /// Training dataset (CSV or NDJSON); falls back to `paths.train`.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Labeled validation dataset used to pick the threshold.
        #[arg(long)]
        val: Option<PathBuf>,
        /// Output checkpoint; falls back to `paths.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Loss trace CSV; defaults to `<checkpoint>.loss.csv`.
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Score series and write `<id>.scores.csv` and `<id>.labels.csv`.
    Detect {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset to score; falls back to `paths.test`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory; falls back to `paths.output_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the checkpoint threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Point-adjusted report of predicted labels against ground truth.
    Eval {
        /// Predicted `timestamp,label` CSV files.
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        /// Ground truth: label CSVs or labeled datasets, matched to `--pred` in order.
        #[arg(long, required = true, num_args = 1..)]
        truth: Vec<PathBuf>,
        /// Threshold recorded in the report.
        #[arg(long)]
        threshold: Option<f64>,
        /// Dataset name recorded in the report.
        #[arg(long, default_value = "dataset")]
        name: String,
        /// Report path (one JSON record per line); printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a labeled synthetic benchmark (train/val/test NDJSON).
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_series: usize,
        #[arg(long, default_value_t = 2000)]
        len: usize,
        #[arg(long, default_value_t = 1)]
        dims: usize,
        /// Comma-separated anomaly kinds for val/test (and train unless `--train-kinds`).
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        train_kinds: Option<Vec<String>>,
        #[arg(long, default_value_t = 0.02)]
        anomaly_fraction: f64,
    },
    /// Cut training pairs and write the augmented set as NDJSON.
    Augment {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Process exit code per error category.
fn exit_code(category: &str) -> u8 {
    match category {
        "input" => 3,
        "data" => 4,
        "io" => 5,
        "checkpoint" => 6,
        "numeric" => 7,
        _ => 8,
    }
}

fn missing(what: &str) -> Error {
    Error::InvalidConfig(format!("no {what} given on the command line or in the config"))
}

fn pick(arg: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, Error> {
    arg.or_else(|| fallback.clone()).ok_or_else(|| missing(what))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Error> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn parse_kinds(names: &[String]) -> Result<Vec<AnomalyKind>, Error> {
    names.iter().map(|n| n.trim().parse()).collect()
}

fn loss_trace_csv(trace: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", i + 1);
    }
    s
}

/// Series id made safe for use as a file name.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn read_truth(path: &Path) -> Result<Vec<Vec<u8>>, Error> {
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("").replace(' ', "");
    if header.eq_ignore_ascii_case("timestamp,label") {
        return Ok(vec![io::parse_label_csv(&text)?]);
    }
    Ok(io::ingest_auto(path)?.iter().map(Series::labels_or_zero).collect())
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    report: EvalReport,
}

fn run(cli: Cli) -> Result<String, Error> {
    let cfg = load_config(cli.common.config.as_deref())?;
    let seed = RngSeed(cli.common.seed);
    match cli.command {
        Command::Train {
            train,
            val,
            checkpoint,
            loss_trace,
        } => {
            let train_path = pick(train, &cfg.paths.train, "training dataset")?;
            let ck_path = pick(checkpoint, &cfg.paths.checkpoint, "checkpoint path")?;
            let train_set = io::ingest_auto(&train_path)?;
            let val_set = match val.or_else(|| cfg.paths.val.clone()) {
                Some(p) => io::ingest_auto(&p)?,
                None => Vec::new(),
            };
            let ck = fit(&cfg, &train_set, &val_set, seed)?;
            ck.save(&ck_path)?;
            let trace_path = loss_trace.unwrap_or_else(|| {
                let mut p = ck_path.clone().into_os_string();
                p.push(".loss.csv");
                PathBuf::from(p)
            });
            write_atomic(&trace_path, loss_trace_csv(&ck.loss_trace).as_bytes())?;
            Ok(format!(
                "series={} epochs={} final_loss={} threshold={} params={} checkpoint={} loss_trace={}",
                train_set.len(),
                ck.loss_trace.len(),
                ck.loss_trace.last().copied().unwrap_or(f64::NAN),
                ck.threshold,
                ck.model.param_count(),
                ck_path.display(),
                trace_path.display()
            ))
        }
        Command::Detect {
            checkpoint,
            input,
            out_dir,
            threshold,
        } => {
            let ck = Checkpoint::load(&pick(checkpoint, &cfg.paths.checkpoint, "checkpoint")?)?;
            let input = pick(input, &cfg.paths.test, "input dataset")?;
            let out_dir = pick(out_dir, &cfg.paths.output_dir, "output directory")?;
            let threshold = threshold.unwrap_or(ck.threshold);
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidConfig(format!("threshold must lie in (0,1), got {threshold}")));
            }
            let series = io::ingest_auto(&input)?;
            let (mut windows, mut flagged) = (0usize, 0usize);
            for s in &series {
                let out = detect(&ck.model, s, &ck.window, threshold)?;
                let stem = file_stem(&s.id);
                write_atomic(&out_dir.join(format!("{stem}.scores.csv")), io::scores_to_csv(&out.window_scores).as_bytes())?;
                write_atomic(&out_dir.join(format!("{stem}.labels.csv")), io::labels_to_csv(&out.point_labels).as_bytes())?;
                windows += out.window_scores.len();
                flagged += out.point_labels.iter().filter(|&&l| l == 1).count();
            }
            Ok(format!(
                "series={} windows={windows} anomalous_points={flagged} threshold={threshold} out_dir={}",
                series.len(),
                out_dir.display()
            ))
        }
        Command::Eval {
            pred,
            truth,
            threshold,
            name,
            out,
        } => {
            let mut truths = Vec::new();
            for p in &truth {
                truths.extend(read_truth(p)?);
            }
            if truths.len() != pred.len() {
                return Err(Error::LengthMismatch {
                    a: pred.len(),
                    b: truths.len(),
                });
            }
            let mut total = Counts::default();
            for (p, t) in pred.iter().zip(&truths) {
                let labels = io::parse_label_csv(&std::fs::read_to_string(p)?)?;
                total += adjusted_counts(&labels, t)?;
            }
            let report = EvalReport::from_counts(total, threshold.unwrap_or(f64::NAN));
            let record = serde_json::to_string(&ReportRecord {
                dataset: &name,
                report,
            })
            .map_err(|e| Error::Io(e.to_string()))?;
            match &out {
                Some(path) => write_atomic(path, format!("{record}\n").as_bytes())?,
                None => println!("{record}"),
            }
            Ok(format!(
                "precision={} recall={} f1={} tp={} fp={} fn={}",
                report.precision, report.recall, report.f1, report.tp, report.fp, report.fn_
            ))
        }
        Command::Synth {
            out_dir,
            n_series,
            len,
            dims,
            kinds,
            train_kinds,
            anomaly_fraction,
        } => {
            let defaults = BenchmarkConfig::default();
            let bench_cfg = BenchmarkConfig {
                n_series,
                len,
                dims,
                kinds: kinds.as_deref().map(parse_kinds).transpose()?.unwrap_or(defaults.kinds.clone()),
                train_kinds: train_kinds.as_deref().map(parse_kinds).transpose()?,
                anomaly_fraction,
                ..defaults
            };
            let bench = make_benchmark(&bench_cfg, seed)?;
            for (split, series) in [("train", &bench.train), ("val", &bench.val), ("test", &bench.test)] {
                io::write_series(&out_dir.join(format!("{split}.ndjson")), series)?;
            }
            let injections: BTreeMap<_, _> = bench.injections.iter().collect();
            let text = serde_json::to_string_pretty(&injections).map_err(|e| Error::Io(e.to_string()))?;
            write_atomic(&out_dir.join("injections.json"), text.as_bytes())?;
            let labeled: usize = bench.all().map(Series::anomaly_count).sum();
            Ok(format!(
                "train={} val={} test={} anomalous_points={labeled} out_dir={}",
                bench.train.len(),
                bench.val.len(),
                bench.test.len(),
                out_dir.display()
            ))
        }
        Command::Augment { input, out } => {
            let input = pick(input, &cfg.paths.train, "input dataset")?;
            let series = io::ingest_auto(&input)?;
            let pairs = training_pairs(&cfg, &series)?;
            let augmented = build_augmented_set(&pairs, &cfg.augment, seed)?;
            let mut text = String::new();
            for p in &augmented {
                text.push_str(&serde_json::to_string(p).map_err(|e| Error::Io(e.to_string()))?);
                text.push('\n');
            }
            write_atomic(&out, text.as_bytes())?;
            let anomalies = augmented.iter().filter(|p| p.label == 1).count();
            Ok(format!(
                "original={} augmented={} anomalous={anomalies} out={}",
                pairs.len(),
                augmented.len(),
                out.display()
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Train { .. } => "train",
        Command::Detect { .. } => "detect",
        Command::Eval { .. } => "eval",
        Command::Synth { .. } => "synth",
        Command::Augment { .. } => "augment",
    };
    match run(cli) {
        Ok(summary) => {
            println!("tfad {name} status=ok {summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tfad {name} status=error category={} message={e}", e.category());
            ExitCode::from(exit_code(e.category()))
        }
    }
}
