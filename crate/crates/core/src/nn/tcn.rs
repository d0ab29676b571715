//! Temporal convolutional encoder: residual blocks of dilated causal
//! convolutions, temporal mean pooling and a linear embedding head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

use super::tape::{Tape, Var};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcnConfig {
    pub in_channels: usize,
    pub hidden_channels: usize,
    pub num_blocks: usize,
    pub kernel_size: usize,
    pub embedding_dim: usize,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            hidden_channels: 16,
            num_blocks: 4,
            kernel_size: 3,
            embedding_dim: 16,
        }
    }
}

impl TcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.hidden_channels == 0
            || self.num_blocks == 0
            || self.embedding_dim == 0
            || self.kernel_size < 2
        {
            return Err(Error::InvalidConfig(format!(
                "encoder sizes must be positive and kernel_size >= 2: {self:?}"
            )));
        }
        Ok(())
    }

    /// Dilation of block `b`.
    pub fn dilation(&self, block: usize) -> usize {
        1 << block
    }

    /// Number of input steps that can influence one output step.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel_size - 1) * ((1 << self.num_blocks) - 1)
    }

    pub fn param_count(&self) -> usize {
        let (c, h, k) = (self.in_channels, self.hidden_channels, self.kernel_size);
        let mut n = 0;
        for b in 0..self.num_blocks {
            let cin = if b == 0 { c } else { h };
            n += h * cin * k + h + h * h * k + h;
            if cin != h {
                n += h * cin + h;
            }
        }
        n + self.embedding_dim * h + self.embedding_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnBlock {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    /// 1×1 projection of the skip path when channel counts differ.
    pub proj: Option<(Tensor, Tensor)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnParams {
    pub config: TcnConfig,
    pub blocks: Vec<TcnBlock>,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

fn uniform(rng: &mut impl Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    uniform_bound(rng, shape, (3.0 / fan_in as f64).sqrt())
}

fn uniform_bound(rng: &mut impl Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-bound..bound)).collect())
}

impl TcnParams {
    /// Variance-scaled uniform weights; biases uniform in `±1/√fan_in`.
    pub fn init(config: TcnConfig, seed: RngSeed) -> Result<Self> {
        config.validate()?;
        let mut rng = seed.rng();
        let (h, k) = (config.hidden_channels, config.kernel_size);
        let blocks = (0..config.num_blocks)
            .map(|b| {
                let cin = if b == 0 { config.in_channels } else { h };
                let bias = |rng: &mut _, fan_in: usize| uniform_bound(rng, vec![h], 1.0 / (fan_in as f64).sqrt());
                let conv1_w = uniform(&mut rng, vec![h, cin, k], cin * k);
                let conv1_b = bias(&mut rng, cin * k);
                let conv2_w = uniform(&mut rng, vec![h, h, k], h * k);
                let conv2_b = bias(&mut rng, h * k);
                let proj = (cin != h).then(|| {
                    let w = uniform(&mut rng, vec![h, cin, 1], cin);
                    (w, bias(&mut rng, cin))
                });
                TcnBlock {
                    conv1_w,
                    conv1_b,
                    conv2_w,
                    conv2_b,
                    proj,
                }
            })
            .collect();
        Ok(Self {
            config,
            blocks,
            out_w: uniform(&mut rng, vec![config.embedding_dim, h], h),
            out_b: uniform_bound(&mut rng, vec![config.embedding_dim], 1.0 / (h as f64).sqrt()),
        })
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(config: TcnConfig) -> Result<Self> {
        let mut p = Self::init(config, RngSeed(0))?;
        for t in p.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        Ok(p)
    }

    /// Parameter tensors in a fixed canonical order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([&b.conv1_w, &b.conv1_b, &b.conv2_w, &b.conv2_b]);
            if let Some((w, bias)) = &b.proj {
                out.extend([w, bias]);
            }
        }
        out.extend([&self.out_w, &self.out_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv1_w);
            out.push(&mut b.conv1_b);
            out.push(&mut b.conv2_w);
            out.push(&mut b.conv2_b);
            if let Some((w, bias)) = &mut b.proj {
                out.push(w);
                out.push(bias);
            }
        }
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    /// Places every parameter on `tape` as a leaf.
    pub fn register(&self, tape: &mut Tape) -> TcnVars {
        TcnVars {
            config: self.config,
            vars: self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect(),
        }
    }
}

/// Parameter leaves of one encoder on a tape; reused for every input
/// encoded with the same weights.
#[derive(Debug, Clone)]
pub struct TcnVars {
    config: TcnConfig,
    pub vars: Vec<Var>,
}

impl TcnVars {
    /// Block stack output, `hidden × L`, before pooling.
    pub fn features(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let shape = tape.value(input).shape().to_vec();
        if shape.len() != 2 || shape[0] != self.config.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.config.in_channels,
                got: shape.first().copied().unwrap_or(0),
            });
        }
        let mut x = input;
        let mut cursor = 0;
        let mut next = || {
            let v = self.vars[cursor];
            cursor += 1;
            v
        };
        for b in 0..self.config.num_blocks {
            let d = self.config.dilation(b);
            let cin = if b == 0 {
                self.config.in_channels
            } else {
                self.config.hidden_channels
            };
            let (w1, b1, w2, b2) = (next(), next(), next(), next());
            let h = tape.conv1d(x, w1, b1, d)?;
            let h = tape.relu(h);
            let h = tape.conv1d(h, w2, b2, d)?;
            let h = tape.relu(h);
            let skip = if cin != self.config.hidden_channels {
                let (pw, pb) = (next(), next());
                tape.conv1d(x, pw, pb, 1)?
            } else {
                x
            };
            x = tape.add(h, skip);
        }
        Ok(x)
    }

    /// Embedding vector of `input` (`in_channels × L`).
    pub fn encode(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let feats = self.features(tape, input)?;
        let pooled = tape.mean_time(feats);
        let n = self.vars.len();
        Ok(tape.linear(pooled, self.vars[n - 2], self.vars[n - 1]))
    }
}

/// Forward pass without gradient bookkeeping beyond the tape.
pub fn tcn_forward(params: &TcnParams, input: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let x = tape.leaf(input.clone());
    let e = vars.encode(&mut tape, x)?;
    Ok(tape.value(e).data().to_vec())
}
