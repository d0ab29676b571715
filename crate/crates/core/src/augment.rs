//! Normal and anomaly data augmentation in the time and frequency domains.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::decompose::hp_trend;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::scalar::Scalar;
use crate::series::{Pair, Series};
use crate::spectral::{dft_interleaved, idft, Spectrum};

/// Contiguous half-open range `[start, start + len)` of timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    pub(crate) fn check(&self, bound: usize) -> Result<()> {
        if self.len == 0 || self.end() > bound {
            return Err(Error::SpanOutOfRange {
                start: self.start,
                len: self.len,
                bound,
            });
        }
        Ok(())
    }
}

/// Anomaly injection kinds available to [`build_augmented_set`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMethod {
    PointScale,
    Exchange,
    Mixup,
    FreqAnomaly,
    SlowSlope,
}

impl InjectionMethod {
    pub const ALL: [InjectionMethod; 5] = [
        InjectionMethod::PointScale,
        InjectionMethod::Exchange,
        InjectionMethod::Mixup,
        InjectionMethod::FreqAnomaly,
        InjectionMethod::SlowSlope,
    ];
}

/// Spectral edit applied by [`inject_freq_anomaly`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqMode {
    /// Scales the dominant non-DC bin by `1 ± magnitude`.
    ScaleBin,
    /// Removes the dominant non-DC bin.
    ZeroBin,
    /// Moves the dominant non-DC bin by `⌈magnitude⌉` bins.
    ShiftPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Extra normal pairs, as a fraction of the originals.
    pub normal_ratio: f64,
    /// Extra anomaly-injected pairs, as a fraction of the originals.
    pub anomaly_ratio: f64,
    /// Spectral noise std relative to the spectrum RMS.
    pub freq_perturb_scale: f64,
    /// Multiplier used when smoothing windows into normal samples.
    pub smooth_lambda: f64,
    pub methods: Vec<InjectionMethod>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            normal_ratio: 0.5,
            anomaly_ratio: 0.4,
            freq_perturb_scale: 0.05,
            smooth_lambda: 1.0,
            methods: InjectionMethod::ALL.to_vec(),
        }
    }
}

impl AugmentConfig {
    /// No augmentation at all.
    pub fn disabled() -> Self {
        Self {
            normal_ratio: 0.0,
            anomaly_ratio: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("normal_ratio", self.normal_ratio), ("anomaly_ratio", self.anomaly_ratio)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1], got {r}")));
            }
        }
        if !self.freq_perturb_scale.is_finite() || self.freq_perturb_scale < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "freq_perturb_scale must be finite and nonnegative, got {}",
                self.freq_perturb_scale
            )));
        }
        if !self.smooth_lambda.is_finite() || self.smooth_lambda < 0.0 {
            return Err(Error::NegativeLambda(self.smooth_lambda));
        }
        if self.anomaly_ratio > 0.0 && self.methods.is_empty() {
            return Err(Error::NoMethodsEnabled);
        }
        Ok(())
    }
}

fn mark<S: Scalar>(series: &mut Series<S>, span: std::ops::Range<usize>) {
    let labels = series.labels_mut();
    for l in &mut labels[span] {
        *l = 1;
    }
}

/// HP trend of `series` as a fresh normal sample; residual noise is dropped.
pub fn smooth_normal<S: Scalar>(series: &Series<S>, lambda: S) -> Result<Series<S>> {
    let values = series
        .values
        .iter()
        .map(|row| hp_trend(row, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(Series {
        id: series.id.clone(),
        values,
        labels: Some(vec![0; series.len()]),
    })
}

/// Perturbs the real and imaginary parts of every non-DC, non-Nyquist bin
/// with Gaussian noise of std `scale·RMS(spectrum)`, mirrored conjugately.
pub fn augment_normal_freq<S: Scalar>(series: &Series<S>, scale: S, seed: RngSeed) -> Result<Series<S>> {
    if scale.is_nan() || scale < S::zero() {
        return Err(Error::InvalidConfig(format!("perturbation scale must be >= 0, got {scale}")));
    }
    let mut rng = seed.rng();
    let mut values = Vec::with_capacity(series.dims());
    for row in &series.values {
        let mut spec = dft_interleaved(row)?;
        let n = spec.n;
        let rms = (spec.data.iter().map(|&v| v * v).sum::<S>() / S::of_usize(2 * n)).sqrt();
        let std = (scale * rms).as_f64();
        if std > 0.0 {
            let noise = Normal::new(0.0, std).expect("finite std");
            for k in 1..=(n - 1) / 2 {
                let re = spec.re(k) + S::of(noise.sample(&mut rng));
                let im = spec.im(k) + S::of(noise.sample(&mut rng));
                spec.set_mirrored(k, re, im);
            }
        }
        values.push(if std > 0.0 { idft(&spec)? } else { row.clone() });
    }
    Ok(Series {
        id: series.id.clone(),
        values,
        labels: Some(vec![0; series.len()]),
    })
}

/// Relative threshold below which a sample counts as zero for point scaling.
pub const NEAR_ZERO_REL: f64 = 1e-6;

/// Scales the sample at `index` by `factor`. For multivariate input one
/// dimension is drawn from `seed`. Samples with `|x| < 1e-6·RMS` are offset
/// by `factor·RMS` instead (RMS of the dimension, 1 when the dimension is
/// identically zero).
pub fn inject_point_anomaly<S: Scalar>(
    series: &Series<S>,
    index: usize,
    factor: S,
    seed: RngSeed,
) -> Result<Series<S>> {
    let len = series.len();
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let dim = if series.dims() > 1 {
        seed.rng().random_range(0..series.dims())
    } else {
        0
    };
    let mut out = series.clone();
    let row = &mut out.values[dim];
    let rms = (row.iter().map(|&v| v * v).sum::<S>() / S::of_usize(len)).sqrt();
    let rms = if rms > S::zero() { rms } else { S::one() };
    let x = row[index];
    row[index] = if x.abs() < S::of(NEAR_ZERO_REL) * rms {
        x + factor * rms
    } else {
        x * factor
    };
    out.labels_mut()[index] = 1;
    Ok(out)
}

/// Replaces `span_a` of `series` with `span_b` of `donor` (or of `series`
/// itself when `donor` is `None`).
pub fn inject_exchange<S: Scalar>(
    series: &Series<S>,
    span_a: Span,
    span_b: Span,
    donor: Option<&Series<S>>,
) -> Result<Series<S>> {
    let donor = donor.unwrap_or(series);
    if span_a.len != span_b.len {
        return Err(Error::SpanLengthMismatch {
            a: span_a.len,
            b: span_b.len,
        });
    }
    if donor.len() < span_b.len {
        return Err(Error::SpanLengthMismatch {
            a: span_a.len,
            b: donor.len(),
        });
    }
    if donor.dims() != series.dims() {
        return Err(Error::DimensionMismatch {
            a: series.dims(),
            b: donor.dims(),
        });
    }
    span_a.check(series.len())?;
    span_b.check(donor.len())?;
    let mut out = series.clone();
    for (dst, src) in out.values.iter_mut().zip(&donor.values) {
        dst[span_a.range()].copy_from_slice(&src[span_b.range()]);
    }
    mark(&mut out, span_a.range());
    Ok(out)
}

/// Within `span`, blends `alpha·a + (1−alpha)·b`; elsewhere returns `a`.
pub fn inject_mixup<S: Scalar>(a: &Series<S>, b: &Series<S>, alpha: S, span: Span) -> Result<Series<S>> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    if !(alpha >= S::zero() && alpha <= S::one()) {
        return Err(Error::InvalidConfig(format!("mixup alpha must lie in [0,1], got {alpha}")));
    }
    span.check(a.len())?;
    span.check(b.len())?;
    let mut out = a.clone();
    if alpha == S::one() {
        return Ok(out);
    }
    for (dst, src) in out.values.iter_mut().zip(&b.values) {
        for t in span.range() {
            dst[t] = alpha * dst[t] + (S::one() - alpha) * src[t];
        }
    }
    mark(&mut out, span.range());
    Ok(out)
}

/// Shortest span a frequency-domain injection accepts.
pub const MIN_FREQ_SPAN: usize = 4;

/// Largest non-DC bin in `1..=N/2`.
fn dominant_bin<S: Scalar>(spec: &Spectrum<S>) -> usize {
    (1..=spec.n / 2)
        .max_by(|&a, &b| {
            spec.power(a)
                .partial_cmp(&spec.power(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.cmp(&a))
        })
        .unwrap_or(1)
}

/// Edits the spectrum of `span` (per dimension) and writes the real inverse back.
pub fn inject_freq_anomaly<S: Scalar>(
    series: &Series<S>,
    span: Span,
    mode: FreqMode,
    magnitude: S,
    seed: RngSeed,
) -> Result<Series<S>> {
    span.check(series.len())?;
    if span.len < MIN_FREQ_SPAN {
        return Err(Error::SpanTooShort {
            len: span.len,
            min: MIN_FREQ_SPAN,
        });
    }
    let mut rng = seed.rng();
    let sign = if rng.random::<bool>() { S::one() } else { -S::one() };
    let mut out = series.clone();
    for row in &mut out.values {
        let mut spec = dft_interleaved(&row[span.range()])?;
        let n = spec.n;
        let k = dominant_bin(&spec);
        let (re, im) = (spec.re(k), spec.im(k));
        match mode {
            FreqMode::ScaleBin => {
                let f = S::one() + sign * magnitude;
                spec.set_mirrored(k, re * f, im * f);
            }
            FreqMode::ZeroBin => spec.set_mirrored(k, S::zero(), S::zero()),
            FreqMode::ShiftPeak => {
                let shift = magnitude.abs().ceil().to_usize().unwrap_or(0);
                let half = n / 2;
                let target = if k + shift <= half {
                    k + shift
                } else if k > shift {
                    k - shift
                } else {
                    half
                };
                if target != k {
                    let (tr, ti) = (spec.re(target), spec.im(target));
                    spec.set_mirrored(k, tr, ti);
                    spec.set_mirrored(target, re, im);
                    if 2 * target == n {
                        // A Nyquist bin carries no phase; keep its energy.
                        let mag = (re * re + im * im).sqrt() * S::of(2.0).sqrt();
                        spec.set_mirrored(target, mag, S::zero());
                    }
                }
            }
        }
        let back = idft(&spec)?;
        row[span.range()].copy_from_slice(&back);
    }
    mark(&mut out, span.range());
    Ok(out)
}

/// Adds the ramp `0, slope, 2·slope, …` across `span` on the listed dimensions.
pub fn inject_slow_slope<S: Scalar>(series: &Series<S>, span: Span, slope: S, dims: &[usize]) -> Result<Series<S>> {
    span.check(series.len())?;
    if dims.is_empty() {
        return Err(Error::InvalidConfig("slow-slope injection needs at least one dimension".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d >= series.dims()) {
        return Err(Error::IndexOutOfRange {
            index: d,
            len: series.dims(),
        });
    }
    let mut out = series.clone();
    if slope == S::zero() {
        return Ok(out);
    }
    for &d in dims {
        for (i, t) in span.range().enumerate() {
            out.values[d][t] += slope * S::of_usize(i);
        }
    }
    mark(&mut out, span.range());
    Ok(out)
}

fn pair_as_series<S: Scalar>(pair: &Pair<S>) -> Series<S> {
    Series {
        id: pair.source_id.clone(),
        values: pair.full.clone(),
        labels: None,
    }
}

fn context_stats<S: Scalar>(row: &[S]) -> (S, S) {
    let n = S::of_usize(row.len());
    let mean = row.iter().copied().sum::<S>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
    (mean, var.sqrt().max(S::of(1e-8)))
}

/// One normal-augmented copy of `pair`.
fn normal_variant<S: Scalar>(pair: &Pair<S>, cfg: &AugmentConfig, seed: RngSeed) -> Result<Pair<S>> {
    let series = pair_as_series(pair);
    let mut rng = seed.rng();
    let out = if rng.random::<bool>() {
        smooth_normal(&series, S::of(cfg.smooth_lambda))?
    } else {
        augment_normal_freq(&series, S::of(cfg.freq_perturb_scale), seed.derive(1))?
    };
    Ok(Pair {
        source_id: format!("{}#norm", pair.source_id),
        start: pair.start,
        context_len: pair.context_len,
        label: 0,
        full: out.values,
    })
}

/// One anomaly-injected copy of `pair`, modified only inside its suspect span.
fn anomaly_variant<S: Scalar>(
    pair: &Pair<S>,
    pool: &[Pair<S>],
    methods: &[InjectionMethod],
    seed: RngSeed,
) -> Result<Pair<S>> {
    let mut rng = seed.rng();
    let ctx = pair.context_len;
    let suspect = pair.suspect_len();
    let usable: Vec<InjectionMethod> = methods
        .iter()
        .copied()
        .filter(|m| *m != InjectionMethod::FreqAnomaly || suspect >= MIN_FREQ_SPAN)
        .collect();
    let method = *usable.choose(&mut rng).ok_or(Error::NoMethodsEnabled)?;
    let min_len = if method == InjectionMethod::FreqAnomaly {
        MIN_FREQ_SPAN
    } else {
        (suspect / 4).max(1)
    };
    let len = rng.random_range(min_len..=suspect);
    let span = Span::new(ctx + rng.random_range(0..=suspect - len), len);
    let series = pair_as_series(pair);
    let scales: Vec<(S, S)> = pair.full.iter().map(|r| context_stats(&r[..ctx])).collect();
    let magnitude = S::of(rng.random_range(2.0..6.0));
    let sign = if rng.random::<bool>() { S::one() } else { -S::one() };

    let out = match method {
        InjectionMethod::PointScale => {
            // Scale the deviation from the context mean; samples already near
            // the mean get an additive spike of the same number of stds.
            let index = rng.random_range(ctx..pair.full_len());
            let mut out = series.clone();
            let dim = rng.random_range(0..series.dims());
            let (mean, std) = scales[dim];
            let dev = out.values[dim][index] - mean;
            out.values[dim][index] = if dev.abs() >= std {
                mean + dev * sign * magnitude
            } else {
                out.values[dim][index] + sign * magnitude * std
            };
            mark(&mut out, index..index + 1);
            out
        }
        InjectionMethod::Exchange => {
            let donor = pool.choose(&mut rng).filter(|d| d.dims() == pair.dims()).unwrap_or(pair);
            let donor = pair_as_series(donor);
            let mut from = rng.random_range(0..=donor.len() - len);
            if donor.id == series.id && from == span.start {
                from = (from + len) % (donor.len() - len + 1);
            }
            inject_exchange(&series, span, Span::new(from, len), Some(&donor))?
        }
        InjectionMethod::Mixup => {
            let other = pool.choose(&mut rng).filter(|d| d.dims() == pair.dims()).unwrap_or(pair);
            let mut b = pair_as_series(other);
            if other.full_len() != pair.full_len() || std::ptr::eq(other, pair) {
                // Reversed copy of the window itself as the blend partner.
                b = series.clone();
                for row in &mut b.values {
                    row.reverse();
                }
            }
            let alpha = S::of(rng.random_range(0.0..0.6));
            inject_mixup(&series, &b, alpha, span)?
        }
        InjectionMethod::FreqAnomaly => {
            let mode = *[FreqMode::ScaleBin, FreqMode::ZeroBin, FreqMode::ShiftPeak]
                .choose(&mut rng)
                .expect("nonempty");
            let mag = match mode {
                FreqMode::ScaleBin => S::of(rng.random_range(1.0..3.0)),
                _ => S::of(rng.random_range(1.0..4.0)),
            };
            inject_freq_anomaly(&series, span, mode, mag, seed.derive(2))?
        }
        InjectionMethod::SlowSlope => {
            let dims: Vec<usize> = (0..series.dims()).filter(|_| rng.random::<bool>()).collect();
            let dims = if dims.is_empty() {
                vec![rng.random_range(0..series.dims())]
            } else {
                dims
            };
            let mut out = series.clone();
            for &d in &dims {
                let rise = sign * magnitude * scales[d].1;
                let slope = rise / S::of_usize(len.max(2) - 1);
                out = inject_slow_slope(&out, span, slope, &[d])?;
            }
            out
        }
    };
    Ok(Pair {
        source_id: format!("{}#anom", pair.source_id),
        start: pair.start,
        context_len: pair.context_len,
        label: 1,
        full: out.values,
    })
}

/// `⌈ratio·n⌉`, ignoring rounding noise such as `0.4·15 = 6.000000000000001`.
fn ceil_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Originals, then `⌈normal_ratio·n⌉` normal variants (label 0), then
/// `⌈anomaly_ratio·n⌉` anomaly-injected variants (label 1).
pub fn build_augmented_set<S: Scalar>(pairs: &[Pair<S>], cfg: &AugmentConfig, seed: RngSeed) -> Result<Vec<Pair<S>>> {
    cfg.validate()?;
    let n = pairs.len();
    let n_normal = ceil_count(cfg.normal_ratio, n);
    let n_anomaly = ceil_count(cfg.anomaly_ratio, n);
    let mut out = pairs.to_vec();
    if n == 0 {
        return Ok(out);
    }
    let clean: Vec<&Pair<S>> = pairs.iter().filter(|p| p.label == 0).collect();
    let normal_pool: Vec<&Pair<S>> = if clean.is_empty() { pairs.iter().collect() } else { clean };
    let mut pick = seed.derive(0).rng();
    for i in 0..n_normal {
        let src = normal_pool[pick.random_range(0..normal_pool.len())];
        let mut v = normal_variant(src, cfg, seed.derive(1_000 + i as u64))?;
        v.label = src.label;
        out.push(v);
    }
    for j in 0..n_anomaly {
        let src = &pairs[pick.random_range(0..n)];
        out.push(anomaly_variant(src, pairs, &cfg.methods, seed.derive(1_000_000 + j as u64))?);
    }
    Ok(out)
}
