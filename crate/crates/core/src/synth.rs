//! Structural-model synthetic series and taxonomy-faithful anomaly injection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::augment::{inject_freq_anomaly, inject_point_anomaly, inject_slow_slope, FreqMode, Span, NEAR_ZERO_REL};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::Series;

/// One sinusoidal component `A·sin(2πωt) + B·cos(2πωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub a: f64,
    pub b: f64,
    /// Cycles per sample.
    pub omega: f64,
}

/// From `start` on, the trend grows by `slope` per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendSegment {
    pub start: usize,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralConfig {
    pub components: Vec<Wave>,
    /// Continuous piecewise-linear trend starting at 0.
    pub trend: Vec<TrendSegment>,
    pub noise_std: f64,
    pub len: usize,
    pub dims: usize,
}

impl StructuralConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.components.iter().find(|w| !(w.omega > 0.0 && w.omega <= 0.5)) {
            return Err(Error::InvalidOmega(w.omega));
        }
        if self.len == 0 || self.dims == 0 {
            return Err(Error::EmptySeries {
                dims: self.dims,
                len: self.len,
            });
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_std must be nonnegative, got {}", self.noise_std)));
        }
        Ok(())
    }

    fn trend_at(&self, t: usize) -> f64 {
        let mut segs: Vec<&TrendSegment> = self.trend.iter().collect();
        segs.sort_by_key(|s| s.start);
        let mut value = 0.0;
        for (i, s) in segs.iter().enumerate() {
            if t <= s.start {
                break;
            }
            let end = segs.get(i + 1).map_or(t, |n| n.start.min(t));
            value += s.slope * (end - s.start) as f64;
        }
        value
    }
}

/// Noise-free part at `t`.
fn structural_value(cfg: &StructuralConfig, t: usize) -> f64 {
    let tf = t as f64;
    let waves: f64 = cfg
        .components
        .iter()
        .map(|w| {
            let (s, c) = (2.0 * std::f64::consts::PI * w.omega * tf).sin_cos();
            w.a * s + w.b * c
        })
        .sum();
    waves + cfg.trend_at(t)
}

/// Samples the structural model; every dimension shares the deterministic
/// part and draws its own noise. Labels are all 0.
pub fn generate_structural(cfg: &StructuralConfig, seed: RngSeed) -> Result<Series<f64>> {
    cfg.validate()?;
    let base: Vec<f64> = (0..cfg.len).map(|t| structural_value(cfg, t)).collect();
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let values = (0..cfg.dims)
        .map(|d| {
            let mut rng = seed.derive(d as u64).rng();
            base.iter()
                .map(|&v| if cfg.noise_std > 0.0 { v + noise.sample(&mut rng) } else { v })
                .collect()
        })
        .collect();
    Series::new("structural", values, Some(vec![0; cfg.len]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    GlobalPoint,
    ContextPoint,
    Shapelet,
    Seasonal,
    Trend,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 5] = [
        AnomalyKind::GlobalPoint,
        AnomalyKind::ContextPoint,
        AnomalyKind::Shapelet,
        AnomalyKind::Seasonal,
        AnomalyKind::Trend,
    ];

    pub fn is_point(self) -> bool {
        matches!(self, AnomalyKind::GlobalPoint | AnomalyKind::ContextPoint)
    }

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::GlobalPoint => "global_point",
            AnomalyKind::ContextPoint => "context_point",
            AnomalyKind::Shapelet => "shapelet",
            AnomalyKind::Seasonal => "seasonal",
            AnomalyKind::Trend => "trend",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Half-width of the neighbourhood used for context-point statistics.
pub const LOCAL_HALF_WIDTH: usize = 5;

/// Minimum deviation of a context point, in local standard deviations.
pub const CONTEXT_SIGMAS: f64 = 3.0;

/// Min/max of one dimension over unlabeled points (all points if none).
fn clean_range(series: &Series<f64>, dim: usize) -> (f64, f64) {
    let labels = series.labels_or_zero();
    let row = &series.values[dim];
    let mut it = row.iter().zip(&labels).filter(|(_, &l)| l == 0).map(|(&v, _)| v).peekable();
    let pick: Vec<f64> = if it.peek().is_some() { it.collect() } else { row.clone() };
    pick.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn point_dim(series: &Series<f64>, seed: RngSeed) -> usize {
    // Mirrors the dimension draw of `inject_point_anomaly`.
    if series.dims() > 1 {
        seed.rng().random_range(0..series.dims())
    } else {
        0
    }
}

fn global_point(series: &Series<f64>, index: usize, magnitude: f64, seed: RngSeed) -> Result<Series<f64>> {
    let dim = point_dim(series, seed);
    let row = &series.values[dim];
    let (lo, hi) = clean_range(series, dim);
    let peak = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
    let rms = if rms > 0.0 { rms } else { 1.0 };
    let x = row[index];
    // Lands at ±magnitude·max|x|, which exceeds the global range for magnitude > 1.
    let factor = if x.abs() < NEAR_ZERO_REL * rms {
        magnitude * peak / rms
    } else {
        magnitude * peak / x.abs()
    };
    inject_point_anomaly(series, index, factor, seed)
}

fn context_point(series: &Series<f64>, index: usize, magnitude: f64, seed: RngSeed) -> Result<Series<f64>> {
    let mut rng = seed.rng();
    let dim = point_dim(series, seed);
    let _ = rng.random_range(0..series.dims().max(1));
    let row = &series.values[dim];
    let lo_i = index.saturating_sub(LOCAL_HALF_WIDTH);
    let hi_i = (index + LOCAL_HALF_WIDTH + 1).min(row.len());
    let local: Vec<f64> = (lo_i..hi_i).filter(|&t| t != index).map(|t| row[t]).collect();
    let (mean, sd) = if local.is_empty() {
        (row[index], 0.0)
    } else {
        let m = local.iter().sum::<f64>() / local.len() as f64;
        let v = local.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / local.len() as f64;
        (m, v.sqrt())
    };
    let (g_lo, g_hi) = clean_range(series, dim);
    let want = magnitude.max(CONTEXT_SIGMAS) * sd;
    let (room_up, room_down) = ((g_hi - mean).max(0.0), (mean - g_lo).max(0.0));
    // Prefer a side with room for the full deviation, else the roomier side.
    let up = match (room_up >= want, room_down >= want) {
        (true, true) => rng.random::<bool>(),
        (true, false) => true,
        (false, true) => false,
        (false, false) => room_up >= room_down,
    };
    let value = if up { mean + want.min(room_up) } else { mean - want.min(room_down) };
    let mut out = series.clone();
    out.values[dim][index] = value;
    out.labels_mut()[index] = 1;
    Ok(out)
}

fn shapelet(series: &Series<f64>, span: Span, seed: RngSeed) -> Result<Series<f64>> {
    span.check(series.len())?;
    let mut rng = seed.rng();
    let flip = rng.random::<bool>();
    let half = (span.len / 4).max(1);
    let mut out = series.clone();
    for row in &mut out.values {
        let seg = &row[span.range()];
        let n = seg.len() as f64;
        let m = seg.iter().sum::<f64>() / n;
        let mut sd = (seg.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
        if sd < 1e-9 {
            let all = row.len() as f64;
            let gm = row.iter().sum::<f64>() / all;
            sd = (row.iter().map(|x| (x - gm) * (x - gm)).sum::<f64>() / all).sqrt().max(1.0);
        }
        let raw: Vec<f64> = (0..span.len)
            .map(|i| if (i / half).is_multiple_of(2) != flip { 1.0 } else { -1.0 })
            .collect();
        // Re-standardize so the first two moments match exactly.
        let rm = raw.iter().sum::<f64>() / n;
        let rs = (raw.iter().map(|x| (x - rm) * (x - rm)).sum::<f64>() / n).sqrt();
        for (dst, r) in row[span.range()].iter_mut().zip(&raw) {
            *dst = if rs > 0.0 { m + sd * (r - rm) / rs } else { m + sd * r };
        }
    }
    for l in &mut out.labels_mut()[span.range()] {
        *l = 1;
    }
    Ok(out)
}

/// Injects one anomaly of `kind`. Point kinds act on `span.start`;
/// `magnitude` is the factor over the global peak (global_point), the local
/// sigma multiple (context_point), the bin shift (seasonal) or the per-sample
/// slope (trend). Shapelets ignore it.
pub fn inject_taxonomy(
    series: &Series<f64>,
    kind: AnomalyKind,
    span: Span,
    magnitude: f64,
    seed: RngSeed,
) -> Result<Series<f64>> {
    span.check(series.len())?;
    if span.len == 0 {
        return Err(Error::SpanOutOfRange {
            start: span.start,
            len: 0,
            bound: series.len(),
        });
    }
    match kind {
        AnomalyKind::GlobalPoint => global_point(series, span.start, magnitude, seed),
        AnomalyKind::ContextPoint => context_point(series, span.start, magnitude, seed),
        AnomalyKind::Shapelet => shapelet(series, span, seed),
        AnomalyKind::Seasonal => inject_freq_anomaly(series, span, FreqMode::ShiftPeak, magnitude, seed),
        AnomalyKind::Trend => {
            let dims: Vec<usize> = (0..series.dims()).collect();
            inject_slow_slope(series, span, magnitude, &dims)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub n_series: usize,
    pub len: usize,
    pub dims: usize,
    /// Kinds injected into the validation and test splits.
    pub kinds: Vec<AnomalyKind>,
    /// Kinds for the train split; `None` reuses `kinds`.
    pub train_kinds: Option<Vec<AnomalyKind>>,
    pub anomaly_fraction: f64,
    pub noise_std: f64,
    /// No anomaly starts before this index.
    pub warmup: usize,
    /// Preferred minimum gap between injected regions.
    pub min_gap: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_series: 20,
            len: 2000,
            dims: 1,
            kinds: AnomalyKind::ALL.to_vec(),
            train_kinds: None,
            anomaly_fraction: 0.02,
            noise_std: 0.1,
            warmup: 200,
            min_gap: 40,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_series < 3 {
            return Err(Error::TooFewSeries {
                got: self.n_series,
                min: 3,
            });
        }
        if !(0.0..0.5).contains(&self.anomaly_fraction) {
            return Err(Error::InvalidConfig(format!(
                "anomaly_fraction must be in [0, 0.5), got {}",
                self.anomaly_fraction
            )));
        }
        let kinds_ok = !self.kinds.is_empty() && self.train_kinds.as_ref().is_none_or(|k| !k.is_empty());
        if self.anomaly_fraction > 0.0 && !kinds_ok {
            return Err(Error::InvalidConfig("benchmark needs at least one anomaly kind".into()));
        }
        if self.len == 0 || self.dims == 0 {
            return Err(Error::EmptySeries {
                dims: self.dims,
                len: self.len,
            });
        }
        Ok(())
    }

    /// Series counts per split (30/20/50, at least one each).
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.n_series;
        let train = ((n as f64 * 0.3).round() as usize).max(1);
        let val = ((n as f64 * 0.2).round() as usize).max(1);
        let train = train.min(n - 2);
        let val = val.min(n - train - 1);
        (train, val, n - train - val)
    }
}

/// One injected region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: AnomalyKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub train: Vec<Series<f64>>,
    pub val: Vec<Series<f64>>,
    pub test: Vec<Series<f64>>,
    /// Injected regions per series id.
    pub injections: BTreeMap<String, Vec<Injection>>,
}

impl Benchmark {
    pub fn all(&self) -> impl Iterator<Item = &Series<f64>> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

fn random_structure(cfg: &BenchmarkConfig, seed: RngSeed) -> StructuralConfig {
    let mut rng = seed.rng();
    let mut components = Vec::new();
    let mut wave = |rng: &mut rand_chacha::ChaCha8Rng, period: f64, amp: f64| {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        components.push(Wave {
            a: amp * phase.cos(),
            b: amp * phase.sin(),
            omega: 1.0 / period,
        });
    };
    let p = rng.random_range(24.0..64.0);
    let amp = rng.random_range(0.8..1.2);
    wave(&mut rng, p, amp);
    if rng.random::<bool>() {
        let p2 = rng.random_range(6.0..16.0);
        let amp2 = rng.random_range(0.15..0.35);
        wave(&mut rng, p2, amp2);
    }
    let segments = rng.random_range(1..=3);
    let trend = (0..segments)
        .map(|i| TrendSegment {
            start: i * cfg.len / segments,
            slope: rng.random_range(-1.0..1.0) / cfg.len as f64,
        })
        .collect();
    StructuralConfig {
        components,
        trend,
        noise_std: cfg.noise_std,
        len: cfg.len,
        dims: cfg.dims,
    }
}

/// Pattern anomaly length range; a leftover budget shorter than the minimum
/// is added to the last pattern planned.
const PATTERN_LEN: (usize, usize) = (16, 32);

/// Shortest pattern anomaly used to fill a leftover budget when no earlier
/// pattern can absorb it.
const MIN_PATTERN_LEN: usize = 8;

/// Kind and length of each anomaly for one series, filling `budget` points.
fn plan_anomalies(kinds: &[AnomalyKind], budget: usize, rng: &mut impl Rng) -> Vec<(AnomalyKind, usize)> {
    let mut order = kinds.to_vec();
    order.shuffle(rng);
    let point_kind = order.iter().copied().find(|k| k.is_point());
    let mut plan = Vec::new();
    let mut left = budget;
    let mut i = 0;
    while left > 0 {
        let kind = order[i % order.len()];
        i += 1;
        if kind.is_point() {
            plan.push((kind, 1));
            left -= 1;
            continue;
        }
        let len = rng.random_range(PATTERN_LEN.0..=PATTERN_LEN.1).min(left);
        if len < PATTERN_LEN.0 {
            // Short spans carry too little shape; lengthen the last pattern.
            if let Some(last) = plan.iter_mut().rev().find(|(k, _): &&mut (AnomalyKind, usize)| !k.is_point()) {
                last.1 += left;
                break;
            }
        }
        if len >= MIN_PATTERN_LEN {
            plan.push((kind, len));
            left -= len;
        } else if let Some(p) = point_kind {
            plan.push((p, 1));
            left -= 1;
        } else {
            break;
        }
    }
    plan.shuffle(rng);
    plan
}

fn kind_magnitude(kind: AnomalyKind, len: usize, series: &Series<f64>, rng: &mut impl Rng) -> f64 {
    match kind {
        AnomalyKind::GlobalPoint => rng.random_range(1.5..2.5),
        AnomalyKind::ContextPoint => rng.random_range(4.0..6.0),
        AnomalyKind::Shapelet => 0.0,
        AnomalyKind::Seasonal => rng.random_range(2..=3) as f64,
        AnomalyKind::Trend => {
            let row = &series.values[0];
            let n = row.len() as f64;
            let m = row.iter().sum::<f64>() / n;
            let sd = (row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt().max(1e-3);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * rng.random_range(2.5..4.0) * sd / len as f64
        }
    }
}

fn make_series(
    cfg: &BenchmarkConfig,
    kinds: &[AnomalyKind],
    index: usize,
    seed: RngSeed,
) -> Result<(Series<f64>, Vec<Injection>)> {
    let structure = random_structure(cfg, seed.derive(0));
    let mut series = generate_structural(&structure, seed.derive(1))?;
    series.id = format!("series-{index:03}");
    let budget = (cfg.anomaly_fraction * cfg.len as f64).round() as usize;
    if budget == 0 {
        return Ok((series, Vec::new()));
    }
    let mut rng = seed.derive(2).rng();
    let plan = plan_anomalies(kinds, budget, &mut rng);
    let warmup = cfg.warmup.min(cfg.len / 2);
    let region = cfg.len.saturating_sub(warmup + 1);
    let points: usize = plan.iter().map(|p| p.1).sum();
    if points > region {
        return Err(Error::InvalidConfig(format!("{budget} anomalous points do not fit in {region} samples")));
    }
    // Crowded plans shrink the gap rather than fail.
    let gap = cfg.min_gap.min((region - points) / plan.len());
    let used = points + gap * plan.len();
    // Spread the slack over the gaps with random weights.
    let slack = region - used;
    let weights: Vec<f64> = (0..=plan.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut t = warmup + (slack as f64 * weights[0] / total) as usize;
    let mut injections = Vec::with_capacity(plan.len());
    for (j, &(kind, len)) in plan.iter().enumerate() {
        let magnitude = kind_magnitude(kind, len, &series, &mut rng);
        series = inject_taxonomy(&series, kind, Span::new(t, len), magnitude, seed.derive(10 + j as u64))?;
        injections.push(Injection { kind, start: t, len });
        t += len + gap + (slack as f64 * weights[j + 1] / total) as usize;
    }
    Ok((series, injections))
}

/// Labeled train/val/test benchmark; series `i` draws from `seed.derive(i)`.
pub fn make_benchmark(cfg: &BenchmarkConfig, seed: RngSeed) -> Result<Benchmark> {
    cfg.validate()?;
    let (n_train, n_val, _) = cfg.split_sizes();
    let train_kinds = cfg.train_kinds.as_deref().unwrap_or(&cfg.kinds);
    let mut all = Vec::with_capacity(cfg.n_series);
    let mut injections = BTreeMap::new();
    for i in 0..cfg.n_series {
        let kinds = if i < n_train { train_kinds } else { &cfg.kinds };
        let (series, inj) = make_series(cfg, kinds, i, seed.derive(i as u64))?;
        injections.insert(series.id.clone(), inj);
        all.push(series);
    }
    let test = all.split_off(n_train + n_val);
    let val = all.split_off(n_train);
    Ok(Benchmark {
        train: all,
        val,
        test,
        injections,
    })
}
