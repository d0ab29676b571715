//! Four-branch window scorer: trend/residual components in the time and
//! frequency domains, each compared full-vs-context through its own encoder.

use serde::{Deserialize, Serialize};

use crate::decompose::{hp_decompose_rows, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::Pair;
use crate::spectral::dft_interleaved;

use super::tape::{sigmoid, Tape, Var};
use super::tcn::{TcnConfig, TcnParams, TcnVars};
use super::tensor::Tensor;

/// Floor applied to the context standard deviation when normalizing windows.
pub const STD_FLOOR: f64 = 1e-8;

/// Initial weight of every enabled branch distance in the head. Untrained
/// distances are tiny, so unit weights would leave all scores near 0.5.
pub const HEAD_INIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    TimeTrend,
    TimeResidual,
    FreqTrend,
    FreqResidual,
}

impl Branch {
    pub const ALL: [Branch; 4] = [
        Branch::TimeTrend,
        Branch::TimeResidual,
        Branch::FreqTrend,
        Branch::FreqResidual,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_frequency(self) -> bool {
        matches!(self, Branch::FreqTrend | Branch::FreqResidual)
    }

    pub fn uses_trend(self) -> bool {
        matches!(self, Branch::TimeTrend | Branch::FreqTrend)
    }
}

/// Which of the four branches contribute to the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BranchSet {
    pub time_trend: bool,
    pub time_residual: bool,
    pub freq_trend: bool,
    pub freq_residual: bool,
}

impl Default for BranchSet {
    fn default() -> Self {
        Self::all()
    }
}

impl BranchSet {
    pub fn all() -> Self {
        Self {
            time_trend: true,
            time_residual: true,
            freq_trend: true,
            freq_residual: true,
        }
    }

    pub fn time_only() -> Self {
        Self {
            freq_trend: false,
            freq_residual: false,
            ..Self::all()
        }
    }

    pub fn only(branch: Branch) -> Self {
        let mut s = Self {
            time_trend: false,
            time_residual: false,
            freq_trend: false,
            freq_residual: false,
        };
        match branch {
            Branch::TimeTrend => s.time_trend = true,
            Branch::TimeResidual => s.time_residual = true,
            Branch::FreqTrend => s.freq_trend = true,
            Branch::FreqResidual => s.freq_residual = true,
        }
        s
    }

    pub fn contains(&self, b: Branch) -> bool {
        match b {
            Branch::TimeTrend => self.time_trend,
            Branch::TimeResidual => self.time_residual,
            Branch::FreqTrend => self.freq_trend,
            Branch::FreqResidual => self.freq_residual,
        }
    }

    pub fn enabled(&self) -> impl Iterator<Item = Branch> + '_ {
        Branch::ALL.into_iter().filter(|&b| self.contains(b))
    }

    pub fn is_empty(&self) -> bool {
        self.enabled().next().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Series dimensionality; becomes the encoders' input channel count.
    pub dims: usize,
    pub encoder: TcnConfig,
    pub branches: BranchSet,
    /// When false the trend components are zero and the residual is the
    /// normalized window itself.
    pub decompose: bool,
    pub lambda: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dims: 1,
            encoder: TcnConfig::default(),
            branches: BranchSet::all(),
            decompose: true,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::InvalidConfig("model needs at least one input dimension".into()));
        }
        if self.branches.is_empty() {
            return Err(Error::InvalidConfig("at least one branch must be enabled".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::NegativeLambda(self.lambda));
        }
        self.encoder_config().validate()
    }

    pub fn encoder_config(&self) -> TcnConfig {
        TcnConfig {
            in_channels: self.dims,
            ..self.encoder
        }
    }
}

/// Encoders (indexed by [`Branch::index`], `None` when disabled) and the
/// affine head mapping the four branch distances to a logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoders: Vec<Option<TcnParams>>,
    /// `1×4` branch weights.
    pub head_w: Tensor,
    pub head_b: Tensor,
}

/// Window components fed to the encoders, computed once per pair.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    /// Per branch: (full, context) encoder inputs; `None` for disabled branches.
    inputs: Vec<Option<(Tensor, Tensor)>>,
    pub label: u8,
}

/// Per-branch distances and the resulting probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBreakdown {
    pub distances: [f64; 4],
    pub logit: f64,
    pub probability: f64,
}

fn standardize(full: &[Vec<f64>], context_len: usize) -> Vec<Vec<f64>> {
    full.iter()
        .map(|row| {
            let ctx = &row[..context_len];
            let n = ctx.len() as f64;
            let mean = ctx.iter().sum::<f64>() / n;
            let var = ctx.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt().max(STD_FLOOR);
            row.iter().map(|v| (v - mean) / std).collect()
        })
        .collect()
}

/// Interleaved spectrum of each row, scaled by `1/√N`.
fn spectral_rows(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            let spec = dft_interleaved(r)?;
            let scale = 1.0 / (r.len() as f64).sqrt();
            Ok(spec.data.into_iter().map(|v| v * scale).collect())
        })
        .collect()
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: RngSeed) -> Result<Self> {
        config.validate()?;
        let enc = config.encoder_config();
        let encoders = Branch::ALL
            .iter()
            .map(|&b| {
                config
                    .branches
                    .contains(b)
                    .then(|| TcnParams::init(enc, seed.derive(b.index() as u64)))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let head = config.branches.enabled().map(|b| b.index()).collect::<Vec<_>>();
        let mut head_w = vec![0.0; 4];
        for i in head {
            head_w[i] = HEAD_INIT;
        }
        Ok(Self {
            config,
            encoders,
            head_w: Tensor::new(vec![1, 4], head_w),
            head_b: Tensor::vector(vec![0.0]),
        })
    }

    /// Every weight and bias set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let mut p = Self::init(config, RngSeed(0))?;
        for t in p.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        Ok(p)
    }

    pub fn encoder(&self, b: Branch) -> Option<&TcnParams> {
        self.encoders[b.index()].as_ref()
    }

    /// Trainable tensors: enabled encoders in branch order, then the head.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.encoders.iter().flatten().flat_map(|e| e.tensors()).collect();
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self
            .encoders
            .iter_mut()
            .flatten()
            .flat_map(|e| e.tensors_mut())
            .collect();
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Normalizes, decomposes and transforms the windows of `pair`.
    pub fn prepare(&self, pair: &Pair<f64>) -> Result<PreparedPair> {
        prepare_with(&self.config, self.config.lambda, pair)
    }

    /// Records the forward pass of one prepared pair on `tape`.
    pub fn forward(&self, tape: &mut Tape, input: &PreparedPair) -> Result<Forward> {
        let mut enc_vars = Vec::new();
        let mut distances = Vec::with_capacity(4);
        for b in Branch::ALL {
            match (&self.encoders[b.index()], &input.inputs[b.index()]) {
                (Some(enc), Some((full, ctx))) => {
                    let vars = enc.register(tape);
                    let f = tape.leaf(full.clone());
                    let c = tape.leaf(ctx.clone());
                    let ef = vars.encode(tape, f)?;
                    let ec = vars.encode(tape, c)?;
                    distances.push(tape.cosine_distance(ef, ec));
                    enc_vars.push(vars);
                }
                (None, _) => distances.push(tape.leaf(Tensor::scalar(0.0))),
                (Some(_), None) => {
                    return Err(Error::InvalidConfig(format!(
                        "pair prepared without inputs for enabled branch {b:?}"
                    )))
                }
            }
        }
        let hw = tape.leaf(self.head_w.clone());
        let hb = tape.leaf(self.head_b.clone());
        let stacked = tape.stack(&distances);
        let logit = tape.linear(stacked, hw, hb);
        let logit = tape.sum(logit);
        Ok(Forward {
            encoders: enc_vars,
            head: (hw, hb),
            distances,
            logit,
        })
    }

    pub fn score_prepared(&self, input: &PreparedPair) -> Result<ScoreBreakdown> {
        let mut tape = Tape::new();
        let fw = self.forward(&mut tape, input)?;
        let mut distances = [0.0; 4];
        for (d, v) in distances.iter_mut().zip(&fw.distances) {
            *d = tape.value(*v).item();
        }
        let logit = tape.value(fw.logit).item();
        Ok(ScoreBreakdown {
            distances,
            logit,
            probability: sigmoid(logit),
        })
    }

    /// Anomaly probability of `pair` under the configured multiplier.
    pub fn score(&self, pair: &Pair<f64>) -> Result<f64> {
        Ok(self.score_prepared(&self.prepare(pair)?)?.probability)
    }

    /// Binary cross-entropy of one pair and its gradient for every tensor
    /// of [`ModelParams::tensors`].
    pub fn loss_and_grad(&self, input: &PreparedPair) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let fw = self.forward(&mut tape, input)?;
        let loss = tape.bce_with_logits(fw.logit, f64::from(input.label));
        let grads = tape.backward(loss)?;
        let mut out = Vec::new();
        for vars in &fw.encoders {
            out.extend(vars.vars.iter().map(|&v| grads.wrt(&tape, v)));
        }
        out.push(grads.wrt(&tape, fw.head.0));
        out.push(grads.wrt(&tape, fw.head.1));
        Ok((tape.value(loss).item(), out))
    }
}

/// Tape handles of one recorded forward pass.
#[derive(Debug)]
pub struct Forward {
    pub encoders: Vec<TcnVars>,
    pub head: (Var, Var),
    /// Per-branch distance nodes, in [`Branch::ALL`] order.
    pub distances: Vec<Var>,
    pub logit: Var,
}

fn prepare_with(config: &ModelConfig, lambda: f64, pair: &Pair<f64>) -> Result<PreparedPair> {
    if pair.dims() != config.dims {
        return Err(Error::DimensionMismatch {
            a: config.dims,
            b: pair.dims(),
        });
    }
    if pair.context_len == 0 || pair.context_len > pair.full_len() {
        return Err(Error::InvalidConfig(format!(
            "context length {} invalid for window of length {}",
            pair.context_len,
            pair.full_len()
        )));
    }
    let full = standardize(&pair.full, pair.context_len);
    let ctx: Vec<Vec<f64>> = full.iter().map(|r| r[..pair.context_len].to_vec()).collect();
    let split = |rows: &[Vec<f64>]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if config.decompose {
            let d = hp_decompose_rows(rows, lambda)?;
            Ok((d.trend, d.residual))
        } else {
            Ok((rows.iter().map(|r| vec![0.0; r.len()]).collect(), rows.to_vec()))
        }
    };
    let (full_trend, full_res) = split(&full)?;
    let (ctx_trend, ctx_res) = split(&ctx)?;
    let mut inputs = Vec::with_capacity(4);
    for b in Branch::ALL {
        if !config.branches.contains(b) {
            inputs.push(None);
            continue;
        }
        let (f, c) = if b.uses_trend() {
            (&full_trend, &ctx_trend)
        } else {
            (&full_res, &ctx_res)
        };
        let pair = if b.is_frequency() {
            (
                Tensor::from_rows(&spectral_rows(f)?),
                Tensor::from_rows(&spectral_rows(c)?),
            )
        } else {
            (Tensor::from_rows(f), Tensor::from_rows(c))
        };
        inputs.push(Some(pair));
    }
    Ok(PreparedPair {
        inputs,
        label: pair.label,
    })
}

/// Anomaly probability of `pair`, decomposing with multiplier `lambda`.
pub fn model_score(params: &ModelParams, pair: &Pair<f64>, lambda: f64) -> Result<f64> {
    let prepared = prepare_with(&params.config, lambda, pair)?;
    Ok(params.score_prepared(&prepared)?.probability)
}
