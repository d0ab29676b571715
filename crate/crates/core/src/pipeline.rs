//! Train, calibrate and evaluate end to end.

use crate::augment::build_augmented_set;
use crate::config::PipelineConfig;
use crate::detect::{score_series, split_windows, vote_point_labels};
use crate::error::{Error, Result};
use crate::eval::{adjusted_counts, select_threshold, Counts, EvalReport};
use crate::nn::{train, Checkpoint, ModelParams, TrainConfig};
use crate::rng::RngSeed;
use crate::series::{Pair, Series};
use crate::synth::Benchmark;

/// Threshold used when no labeled validation data is available.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn common_dims(series: &[Series<f64>]) -> Result<usize> {
    let first = series.first().ok_or(Error::EmptyTrainingSet)?.dims();
    if let Some(s) = series.iter().find(|s| s.dims() != first) {
        return Err(Error::DimensionMismatch { a: first, b: s.dims() });
    }
    Ok(first)
}

/// Training pairs cut at the configured training stride.
pub fn training_pairs(cfg: &PipelineConfig, series: &[Series<f64>]) -> Result<Vec<Pair<f64>>> {
    let spec = cfg.window.with_stride(cfg.train_stride);
    let mut pairs = Vec::new();
    for s in series {
        pairs.extend(split_windows(s, &spec)?);
    }
    Ok(pairs)
}

/// Window scores for every series.
pub fn score_all(params: &ModelParams, cfg: &PipelineConfig, series: &[Series<f64>]) -> Result<Vec<Vec<(usize, f64)>>> {
    series.iter().map(|s| score_series(params, s, &cfg.window)).collect()
}

/// Trains on `train`, picks the threshold on `val` and packs a checkpoint.
pub fn fit(cfg: &PipelineConfig, train_set: &[Series<f64>], val: &[Series<f64>], seed: RngSeed) -> Result<Checkpoint> {
    cfg.validate()?;
    let dims = common_dims(train_set)?;
    let pairs = training_pairs(cfg, train_set)?;
    let pairs = build_augmented_set(&pairs, &cfg.augment, seed.derive(1))?;
    let init = ModelParams::init(cfg.model_config(dims), seed.derive(2))?;
    let train_cfg = TrainConfig {
        seed: seed.derive(3),
        ..cfg.train
    };
    let outcome = train(&pairs, init, &train_cfg)?;
    let labeled: Vec<&Series<f64>> = val.iter().filter(|s| s.anomaly_count() > 0).collect();
    let threshold = if labeled.is_empty() {
        DEFAULT_THRESHOLD
    } else {
        let owned: Vec<Series<f64>> = labeled.into_iter().cloned().collect();
        let scores = score_all(&outcome.params, cfg, &owned)?;
        let truths: Vec<Vec<u8>> = owned.iter().map(|s| s.labels_or_zero()).collect();
        select_threshold(&scores, &truths, &cfg.window)?.0
    };
    Ok(Checkpoint::new(outcome.params, cfg.window, threshold, outcome.loss_trace))
}

/// Pooled point-adjusted report of `checkpoint` on labeled `series`.
pub fn evaluate(checkpoint: &Checkpoint, series: &[Series<f64>]) -> Result<(EvalReport, Vec<Vec<(usize, f64)>>)> {
    let mut total = Counts::default();
    let mut all_scores = Vec::with_capacity(series.len());
    for s in series {
        let scores = score_series(&checkpoint.model, s, &checkpoint.window)?;
        let pred = vote_point_labels(&scores, checkpoint.threshold, &checkpoint.window, s.len());
        total += adjusted_counts(&pred, &s.labels_or_zero())?;
        all_scores.push(scores);
    }
    Ok((EvalReport::from_counts(total, checkpoint.threshold), all_scores))
}

/// Outcome of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub checkpoint: Checkpoint,
    pub report: EvalReport,
    pub test_scores: Vec<Vec<(usize, f64)>>,
}

/// Fits on the train split (threshold from val) and evaluates on test.
pub fn run_benchmark(cfg: &PipelineConfig, bench: &Benchmark, seed: RngSeed) -> Result<BenchmarkRun> {
    let checkpoint = fit(cfg, &bench.train, &bench.val, seed)?;
    let (report, test_scores) = evaluate(&checkpoint, &bench.test)?;
    Ok(BenchmarkRun {
        checkpoint,
        report,
        test_scores,
    })
}
