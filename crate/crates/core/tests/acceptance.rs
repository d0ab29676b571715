//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with `cargo test -p tfad-core --test acceptance`; pass criterion
//! numbers as arguments to run a subset (`-- 1 4`).

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use tfad::decompose::hp_trend;
use tfad::eval::{point_adjust, prf1};
use tfad::augment::AugmentConfig;
use tfad::nn::{BranchSet, ModelConfig, ModelParams, Tape, TcnConfig, Tensor, Var};
use tfad::pipeline::run_benchmark;
use tfad::spectral::{dft_interleaved, idft};
use tfad::synth::make_benchmark;
use tfad::{AnomalyKind, BenchmarkConfig, Pair, PipelineConfig, RngSeed};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, budget_s: f64, detail: String) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    check(secs < budget_s, format!("{detail}; {secs:.1}s of {budget_s}s"))
}

// ---------------------------------------------------------------- 1: HP

/// Dense Gaussian elimination with partial pivoting on `(I + λD₂ᵀD₂)τ = y`.
fn hp_dense(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
        row[n] = y[i];
    }
    for r in 0..n.saturating_sub(2) {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(i, di) in &d {
            for &(j, dj) in &d {
                a[i][j] += lambda * di * dj;
            }
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = RngSeed(1).rng();
    let (mut worst, mut worst_linear) = (0.0f64, 0.0f64);
    for len in 3..=64 {
        for _ in 0..100 {
            let y: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
            for lambda in [0.1, 10.0, 1600.0] {
                let got = hp_trend(&y, lambda).map_err(|e| e.to_string())?;
                let want = hp_dense(&y, lambda);
                worst = got.iter().zip(&want).fold(worst, |m, (a, b)| m.max((a - b).abs()));
            }
        }
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-1.0..1.0));
        let line: Vec<f64> = (0..len).map(|t| a + b * t as f64).collect();
        for lambda in [0.1, 10.0, 1600.0] {
            let trend = hp_trend(&line, lambda).map_err(|e| e.to_string())?;
            worst_linear = trend.iter().zip(&line).fold(worst_linear, |m, (t, y)| m.max((y - t).abs()));
        }
    }
    let detail = format!("max |banded - dense| = {worst:.2e} (tol 1e-8), linear residual = {worst_linear:.2e} (tol 1e-9)");
    check(worst <= 1e-8 && worst_linear <= 1e-9, detail.clone())?;
    within_time(start, 10.0, detail)
}

// ---------------------------------------------------------------- 2: DFT

fn naive_dft(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
            re += v * th.cos();
            im -= v * th.sin();
        }
        out.push(re);
        out.push(im);
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = RngSeed(2).rng();
    let (mut oracle, mut parseval, mut inverse) = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=64 {
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let s = dft_interleaved(&x).map_err(|e| e.to_string())?;
            oracle = s.data.iter().zip(naive_dft(&x)).fold(oracle, |m, (a, b)| m.max((a - b).abs()));
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = s.data.iter().map(|v| v * v).sum::<f64>() / n as f64;
            parseval = parseval.max((time - freq).abs() / time.max(f64::MIN_POSITIVE));
            let back = idft(&s).map_err(|e| e.to_string())?;
            inverse = back.iter().zip(&x).fold(inverse, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    let detail = format!("oracle {oracle:.2e}, Parseval rel {parseval:.2e}, inverse {inverse:.2e} (tol 1e-9 each)");
    check(oracle <= 1e-9 && parseval <= 1e-9 && inverse <= 1e-9, detail.clone())?;
    within_time(start, 10.0, detail)
}

// ---------------------------------------------------------------- 3: gradients

const FD_H: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const FD_FLOOR: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR)
}

/// Central differences of `build` over every coordinate of `leaves`.
fn fd_check(leaves: &[Tensor], build: &dyn Fn(&mut Tape, &[Var]) -> Var) -> Result<f64, String> {
    let eval = |ls: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ls.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (li, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(&tape, *v);
        for c in 0..leaves[li].len() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[c] += FD_H;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[c] -= FD_H;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_H);
            worst = worst.max(rel_err(analytic[c], numeric));
        }
    }
    Ok(worst)
}

fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = RngSeed(3).rng();
    let mut worst_op: (f64, &str) = (0.0, "");
    let mut r = |shape: Vec<usize>| random_tensor(shape, &mut rng);
    type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;
    let cases: Vec<(&str, Vec<Tensor>, Build)> = vec![
        ("conv1d", vec![r(vec![2, 9]), r(vec![3, 2, 3]), r(vec![3]), r(vec![3])], Box::new(|t, v| {
            let y = t.conv1d(v[0], v[1], v[2], 2).unwrap();
            let m = t.mean_time(y);
            t.cosine_distance(m, v[3])
        })),
        ("relu", vec![r(vec![2, 6]), r(vec![2])], Box::new(|t, v| {
            let y = t.relu(v[0]);
            let m = t.mean_time(y);
            t.cosine_distance(m, v[1])
        })),
        ("add+scale+sum", vec![r(vec![5]), r(vec![5]), r(vec![5])], Box::new(|t, v| {
            let a = t.add(v[0], v[1]);
            let s = t.scale(a, -1.7);
            let c = t.cosine_distance(s, v[2]);
            let total = t.sum(s);
            let st = t.stack(&[c, total]);
            t.sum(st)
        })),
        ("linear", vec![r(vec![4]), r(vec![3, 4]), r(vec![3]), r(vec![3])], Box::new(|t, v| {
            let y = t.linear(v[0], v[1], v[2]);
            t.cosine_distance(y, v[3])
        })),
        ("stack+sigmoid+bce", vec![r(vec![3]), r(vec![3]), r(vec![3]), r(vec![3])], Box::new(|t, v| {
            let a = t.cosine_distance(v[0], v[1]);
            let b = t.cosine_distance(v[2], v[3]);
            let s = t.stack(&[a, b]);
            let p = t.sigmoid(s);
            let z = t.sum(p);
            t.bce_with_logits(z, 1.0)
        })),
    ];
    for (name, leaves, build) in &cases {
        let e = fd_check(leaves, build.as_ref())?;
        if e > worst_op.0 {
            worst_op = (e, name);
        }
    }

    let config = ModelConfig {
        dims: 1,
        encoder: TcnConfig {
            in_channels: 1,
            hidden_channels: 2,
            num_blocks: 2,
            kernel_size: 2,
            embedding_dim: 3,
        },
        lambda: 50.0,
        ..ModelConfig::default()
    };
    let params = ModelParams::init(config, RngSeed(30)).map_err(|e| e.to_string())?;
    let count = params.param_count();
    let mut rng = RngSeed(31).rng();
    let full: Vec<f64> = (0..20).map(|t| (t as f64 * 0.6).sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();
    let pair = Pair {
        source_id: "fd".into(),
        start: 0,
        context_len: 16,
        label: 1,
        full: vec![full],
    };
    let input = params.prepare(&pair).map_err(|e| e.to_string())?;
    let (_, analytic) = params.loss_and_grad(&input).map_err(|e| e.to_string())?;
    let loss_of = |p: &ModelParams| p.loss_and_grad(&input).map(|r| r.0).map_err(|e| e.to_string());
    let mut worst_model = 0.0f64;
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in shapes.iter().enumerate() {
        for c in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data_mut()[c] += FD_H;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data_mut()[c] -= FD_H;
            let numeric = (loss_of(&plus)? - loss_of(&minus)?) / (2.0 * FD_H);
            worst_model = worst_model.max(rel_err(analytic[ti][c], numeric));
        }
    }
    let detail = format!(
        "worst op rel err {:.2e} ({}), four-branch model ({count} params) rel err {worst_model:.2e} (tol 1e-4)",
        worst_op.0, worst_op.1
    );
    check(count <= 500 && worst_op.0 < 1e-4 && worst_model < 1e-4, detail.clone())?;
    within_time(start, 60.0, detail)
}

// ---------------------------------------------------------------- 4: metrics

/// Segment-enumeration oracle: adjusted prediction and (tp, fp, fn).
fn metric_oracle(pred: &[u8], truth: &[u8]) -> (Vec<u8>, [u64; 3]) {
    let mut segments = Vec::new();
    let mut t = 0;
    while t < truth.len() {
        if truth[t] == 1 {
            let s = t;
            while t < truth.len() && truth[t] == 1 {
                t += 1;
            }
            segments.push(s..t);
        } else {
            t += 1;
        }
    }
    let mut adj = pred.to_vec();
    for seg in segments {
        if pred[seg.clone()].contains(&1) {
            adj[seg].fill(1);
        }
    }
    let mut c = [0u64; 3];
    for (a, t) in adj.iter().zip(truth) {
        match (a, t) {
            (1, 1) => c[0] += 1,
            (1, 0) => c[1] += 1,
            (0, 1) => c[2] += 1,
            _ => {}
        }
    }
    (adj, c)
}

fn oracle_rates([tp, fp, fn_]: [u64; 3]) -> (f64, f64, f64) {
    let p = match (tp + fp, tp + fn_) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (d, _) => tp as f64 / d as f64,
    };
    let r = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = RngSeed(4).rng();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..=32);
        let density = rng.random_range(0.0..1.0);
        let pred: Vec<u8> = (0..len).map(|_| u8::from(rng.random_bool(density))).collect();
        let truth: Vec<u8> = (0..len).map(|_| u8::from(rng.random_bool(density))).collect();
        let (want_adj, counts) = metric_oracle(&pred, &truth);
        let adj = point_adjust(&pred, &truth).map_err(|e| e.to_string())?;
        let rates = prf1(&adj, &truth).map_err(|e| e.to_string())?;
        if adj != want_adj || rates != oracle_rates(counts) {
            mismatches += 1;
        }
    }
    let detail = format!("{mismatches} mismatches in 10000 random pairs (exact)");
    check(mismatches == 0, detail.clone())?;
    within_time(start, 10.0, detail)
}

// ---------------------------------------------------------- 5-8: end to end

/// One seeded benchmark run.
struct Job {
    tag: String,
    cfg: PipelineConfig,
    bench: BenchmarkConfig,
    seed: u64,
}

/// Bit patterns of every test-split window score, keyed by job tag.
static SCORE_BITS: Mutex<BTreeMap<String, Vec<u64>>> = Mutex::new(BTreeMap::new());

fn run_job(job: &Job) -> Result<(f64, Vec<u64>), String> {
    let bench = make_benchmark(&job.bench, RngSeed(job.seed)).map_err(|e| e.to_string())?;
    let run = run_benchmark(&job.cfg, &bench, RngSeed(job.seed)).map_err(|e| e.to_string())?;
    let bits = run
        .test_scores
        .iter()
        .flatten()
        .flat_map(|&(start, score)| [start as u64, score.to_bits()])
        .collect();
    Ok((run.report.f1, bits))
}

/// Runs `job`, remembering its scores for the determinism check.
fn f1_of(job: &Job) -> Result<f64, String> {
    let (f1, bits) = run_job(job)?;
    SCORE_BITS.lock().unwrap().entry(job.tag.clone()).or_insert(bits);
    Ok(f1)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_f1s(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|f| format!("{f:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn job_5() -> Job {
    Job {
        tag: "e2e".into(),
        cfg: PipelineConfig::default(),
        bench: BenchmarkConfig::default(),
        seed: 0,
    }
}

fn time_only() -> BranchSet {
    BranchSet {
        time_trend: true,
        time_residual: true,
        freq_trend: false,
        freq_residual: false,
    }
}

fn seasonal_bench() -> BenchmarkConfig {
    BenchmarkConfig {
        n_series: 10,
        kinds: vec![AnomalyKind::Seasonal],
        ..BenchmarkConfig::default()
    }
}

/// Full model, decomposed time branches, raw single time branch.
fn jobs_6(seed: u64) -> [Job; 3] {
    let full = PipelineConfig::default();
    let time = PipelineConfig {
        branches: time_only(),
        ..PipelineConfig::default()
    };
    let base = PipelineConfig {
        decompose: false,
        branches: BranchSet {
            time_trend: false,
            time_residual: true,
            freq_trend: false,
            freq_residual: false,
        },
        ..PipelineConfig::default()
    };
    [("full", full), ("time", time), ("base", base)].map(|(name, cfg)| Job {
        tag: format!("ablation-{name}-{seed}"),
        cfg,
        bench: seasonal_bench(),
        seed,
    })
}

fn unseen_kinds_bench() -> BenchmarkConfig {
    BenchmarkConfig {
        n_series: 10,
        train_kinds: Some(vec![AnomalyKind::GlobalPoint, AnomalyKind::Trend]),
        ..BenchmarkConfig::default()
    }
}

/// Default augmentation versus none.
fn jobs_7(seed: u64) -> [Job; 2] {
    let aug = PipelineConfig::default();
    let plain = PipelineConfig {
        augment: AugmentConfig::disabled(),
        ..PipelineConfig::default()
    };
    [("aug", aug), ("plain", plain)].map(|(name, cfg)| Job {
        tag: format!("augment-{name}-{seed}"),
        cfg,
        bench: unseen_kinds_bench(),
        seed,
    })
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let job = job_5();
    let f1 = f1_of(&job)?;
    let detail = format!("test f1 {f1:.4} (need >= 0.85), {} epochs", job.cfg.train.epochs);
    let timed = within_time(start, 900.0, detail);
    let ok = f1 >= 0.85 && job.cfg.train.epochs <= 20;
    match timed {
        Ok(d) if !ok => Err(d),
        other => other,
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut f1s = [Vec::new(), Vec::new(), Vec::new()];
    for seed in SEEDS {
        for (acc, job) in f1s.iter_mut().zip(jobs_6(seed)) {
            acc.push(f1_of(&job)?);
        }
    }
    let [full, time, base] = f1s.each_ref().map(|v| mean(v));
    let detail = format!(
        "mean f1 full {full:.4} {} >= time {time:.4} {} >= raw single {base:.4} {}",
        fmt_f1s(&f1s[0]),
        fmt_f1s(&f1s[1]),
        fmt_f1s(&f1s[2])
    );
    check(full >= time && time >= base, detail.clone())?;
    within_time(start, 2700.0, detail)
}

fn criterion_7() -> Outcome {
    let mut f1s = [Vec::new(), Vec::new()];
    for seed in SEEDS {
        for (acc, job) in f1s.iter_mut().zip(jobs_7(seed)) {
            acc.push(f1_of(&job)?);
        }
    }
    let [aug, plain] = f1s.each_ref().map(|v| mean(v));
    let detail = format!(
        "mean f1 augmented {aug:.4} {} >= unaugmented {plain:.4} {}",
        fmt_f1s(&f1s[0]),
        fmt_f1s(&f1s[1])
    );
    check(aug >= plain, detail)
}

fn criterion_8() -> Outcome {
    let mut jobs = vec![job_5()];
    jobs.extend(jobs_6(0));
    jobs.extend(jobs_7(0));
    let mut differing = Vec::new();
    for job in &jobs {
        let earlier = SCORE_BITS.lock().unwrap().get(&job.tag).cloned();
        let first = match earlier {
            Some(bits) => bits,
            None => run_job(job)?.1,
        };
        let again = run_job(job)?.1;
        if first != again {
            differing.push(job.tag.clone());
        }
    }
    let tags: Vec<&str> = jobs.iter().map(|j| j.tag.as_str()).collect();
    check(
        differing.is_empty(),
        format!("reran {}; differing scores: {:?}", tags.join(", "), differing),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "HP filter oracle", criterion_1),
        (2, "DFT correctness", criterion_2),
        (3, "gradient check", criterion_3),
        (4, "metric oracle", criterion_4),
        (5, "end-to-end detection", criterion_5),
        (6, "ablation direction", criterion_6),
        (7, "augmentation direction", criterion_7),
        (8, "determinism", criterion_8),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        match run() {
            Ok(d) => println!("criterion {n} ({name}): PASS - {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL - {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
