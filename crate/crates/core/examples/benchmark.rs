//! Runs one default synthetic benchmark and prints the pooled test report,
//! per-kind segment recall and the best threshold in hindsight.
//!
//! Usage: `cargo run --release -p tfad-core --example benchmark -- [seed] [epochs] [learning_rate]`

use std::time::Instant;

use tfad::pipeline::run_benchmark;
use tfad::{BenchmarkConfig, PipelineConfig, RngSeed};

fn main() -> tfad::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = PipelineConfig::default();
    if let Some(e) = args.next().and_then(|s| s.parse().ok()) {
        cfg.train.epochs = e;
    }
    if let Some(lr) = args.next().and_then(|s| s.parse().ok()) {
        cfg.train.learning_rate = lr;
    }
    let t0 = Instant::now();
    let bench = tfad::synth::make_benchmark(&BenchmarkConfig::default(), RngSeed(seed))?;
    let run = run_benchmark(&cfg, &bench, RngSeed(seed))?;
    println!("loss {:?}", run.checkpoint.loss_trace);
    let mut per_kind = std::collections::BTreeMap::new();
    for (s, scores) in bench.test.iter().zip(&run.test_scores) {
        let pred = tfad::detect::vote_point_labels(scores, run.checkpoint.threshold, &cfg.window, s.len());
        let truth = s.labels_or_zero();
        let adj = tfad::eval::point_adjust(&pred, &truth)?;
        for inj in &bench.injections[&s.id] {
            let e = per_kind.entry(inj.kind.name()).or_insert((0, 0));
            e.1 += 1;
            if adj[inj.start] == 1 {
                e.0 += 1;
            }
        }
    }
    println!("detected/total per kind {per_kind:?}");
    let truths: Vec<Vec<u8>> = bench.test.iter().map(|s| s.labels_or_zero()).collect();
    let (_, best) = tfad::eval::select_threshold(&run.test_scores, &truths, &cfg.window)?;
    let (mut near, mut far) = (0, 0);
    for (s, scores) in bench.test.iter().zip(&run.test_scores) {
        let pred = tfad::detect::vote_point_labels(scores, best.threshold, &cfg.window, s.len());
        let truth = s.labels_or_zero();
        for t in 0..s.len() {
            if pred[t] == 1 && truth[t] == 0 {
                let lo = t.saturating_sub(5);
                let hi = (t + 6).min(s.len());
                if truth[lo..hi].contains(&1) { near += 1 } else { far += 1 }
            }
        }
    }
    println!("fp near segments {near} elsewhere {far}");
    println!("test-tuned f1={:.4} p={:.4} r={:.4} threshold={:.4}", best.f1, best.precision, best.recall, best.threshold);
    println!(
        "seed={seed} f1={:.4} p={:.4} r={:.4} threshold={:.4} secs={:.1}",
        run.report.f1,
        run.report.precision,
        run.report.recall,
        run.report.threshold,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
