//! Reverse-mode differentiation over a linear tape of coarse operations.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Causal dilated 1-D convolution. `x: C_in×L`, `w: C_out×C_in×K`, `b: C_out`.
    Conv1d { x: usize, w: usize, b: usize, dilation: usize },
    Relu(usize),
    Add(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    /// `C×L → C`
    MeanTime(usize),
    /// `w: M×N`, `x: N`, `b: M`
    Linear { x: usize, w: usize, b: usize },
    /// `1 − cos(u, v)`, with `cos := 0` when either norm is below [`COS_EPS`].
    CosineDistance(usize, usize),
    /// Scalars into a vector.
    Stack(Vec<usize>),
    Sigmoid(usize),
    /// `softplus(z) − y·z`
    BceWithLogits { logit: usize, target: f64 },
}

/// Norm floor of the guarded cosine.
pub const COS_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations and their values for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    /// Gradient of the loss w.r.t. `v` (zeros when `v` did not influence the loss).
    pub fn wrt(&self, tape: &Tape, v: Var) -> Vec<f64> {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| vec![0.0; tape.nodes[v.0].value.len()])
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        let (c_in, len) = (xs[0], xs[1]);
        let (c_out, k) = (ws[0], ws[2]);
        if ws[1] != c_in {
            return Err(Error::ChannelMismatch {
                expected: ws[1],
                got: c_in,
            });
        }
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; c_out * len];
        for o in 0..c_out {
            let row = &mut out[o * len..(o + 1) * len];
            row.fill(bd[o]);
            for i in 0..c_in {
                let xi = &xd[i * len..(i + 1) * len];
                for kk in 0..k {
                    let wv = wd[(o * c_in + i) * k + kk];
                    let shift = (k - 1 - kk) * dilation;
                    if shift >= len {
                        continue;
                    }
                    for (r, &xv) in row[shift..].iter_mut().zip(&xi[..len - shift]) {
                        *r += wv * xv;
                    }
                }
            }
        }
        Ok(self.push(
            Tensor::new(vec![c_out, len], out),
            Op::Conv1d {
                x: x.0,
                w: w.0,
                b: b.0,
                dilation,
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect());
        self.push(out, Op::Relu(x.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add: shape mismatch");
        let out = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect(),
        );
        self.push(out, Op::Add(a.0, b.0))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a * c).collect());
        self.push(out, Op::Scale(x.0, c))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x.0))
    }

    pub fn mean_time(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (c, len) = (v.shape()[0], v.shape()[1]);
        let out = (0..c)
            .map(|i| v.data()[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        self.push(Tensor::vector(out), Op::MeanTime(x.0))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (m, n) = (wv.shape()[0], wv.shape()[1]);
        assert_eq!(xv.len(), n, "linear: input width mismatch");
        let out = (0..m)
            .map(|r| bv.data()[r] + dot(&wv.data()[r * n..(r + 1) * n], xv.data()))
            .collect();
        self.push(Tensor::vector(out), Op::Linear { x: x.0, w: w.0, b: b.0 })
    }

    pub fn cosine_distance(&mut self, u: Var, v: Var) -> Var {
        let (a, b) = (self.value(u).data(), self.value(v).data());
        let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
        let cos = if na < COS_EPS || nb < COS_EPS {
            0.0
        } else {
            dot(a, b) / (na * nb)
        };
        self.push(Tensor::scalar(1.0 - cos), Op::CosineDistance(u.0, v.0))
    }

    pub fn stack(&mut self, xs: &[Var]) -> Var {
        let data = xs.iter().map(|&v| self.value(v).item()).collect();
        self.push(Tensor::vector(data), Op::Stack(xs.iter().map(|v| v.0).collect()))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&z| sigmoid(z)).collect());
        self.push(out, Op::Sigmoid(x.0))
    }

    pub fn bce_with_logits(&mut self, logit: Var, target: f64) -> Var {
        let z = self.value(logit).item();
        self.push(
            Tensor::scalar(softplus(z) - target * z),
            Op::BceWithLogits {
                logit: logit.0,
                target,
            },
        )
    }

    /// Gradients of the scalar node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let node = self.nodes.get(loss.0).ok_or(Error::NoForwardRecorded)?;
        if node.value.len() != 1 {
            return Err(Error::NoForwardRecorded);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
            grads[idx].get_or_insert_with(|| vec![0.0; len])
        }

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Conv1d { x, w, b, dilation } => {
                    let (xv, wv) = (&self.nodes[*x].value, &self.nodes[*w].value);
                    let (c_in, len) = (xv.shape()[0], xv.shape()[1]);
                    let (c_out, k) = (wv.shape()[0], wv.shape()[2]);
                    let (xd, wd) = (xv.data(), wv.data());
                    let mut gx = vec![0.0; xd.len()];
                    let mut gw = vec![0.0; wd.len()];
                    let mut gb = vec![0.0; c_out];
                    for o in 0..c_out {
                        let go = &g[o * len..(o + 1) * len];
                        gb[o] = go.iter().sum();
                        for i in 0..c_in {
                            let xi = &xd[i * len..(i + 1) * len];
                            let gxi = &mut gx[i * len..(i + 1) * len];
                            for kk in 0..k {
                                let shift = (k - 1 - kk) * dilation;
                                if shift >= len {
                                    continue;
                                }
                                let widx = (o * c_in + i) * k + kk;
                                let wv = wd[widx];
                                let mut s = 0.0;
                                for ((gxv, &xv), &gov) in
                                    gxi[..len - shift].iter_mut().zip(&xi[..len - shift]).zip(&go[shift..])
                                {
                                    *gxv += wv * gov;
                                    s += gov * xv;
                                }
                                gw[widx] += s;
                            }
                        }
                    }
                    add_into(acc(&mut grads, *x, gx.len()), &gx);
                    add_into(acc(&mut grads, *w, gw.len()), &gw);
                    add_into(acc(&mut grads, *b, gb.len()), &gb);
                }
                Op::Relu(x) => {
                    let xv = self.nodes[*x].value.data();
                    let gx = acc(&mut grads, *x, xv.len());
                    for ((d, &v), &gv) in gx.iter_mut().zip(xv).zip(&g) {
                        if v > 0.0 {
                            *d += gv;
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    add_into(acc(&mut grads, *b, g.len()), &g);
                }
                Op::Scale(x, c) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for (d, &gv) in gx.iter_mut().zip(&g) {
                        *d += c * gv;
                    }
                }
                Op::Sum(x) => {
                    let n = self.nodes[*x].value.len();
                    let gx = acc(&mut grads, *x, n);
                    for d in gx.iter_mut() {
                        *d += g[0];
                    }
                }
                Op::MeanTime(x) => {
                    let shape = self.nodes[*x].value.shape();
                    let (c, len) = (shape[0], shape[1]);
                    let gx = acc(&mut grads, *x, c * len);
                    for i in 0..c {
                        let share = g[i] / len as f64;
                        for d in &mut gx[i * len..(i + 1) * len] {
                            *d += share;
                        }
                    }
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.nodes[*x].value.data(), self.nodes[*w].value.data());
                    let (m, n) = (g.len(), xv.len());
                    {
                        let gx = acc(&mut grads, *x, n);
                        for r in 0..m {
                            for c in 0..n {
                                gx[c] += wv[r * n + c] * g[r];
                            }
                        }
                    }
                    {
                        let gw = acc(&mut grads, *w, m * n);
                        for r in 0..m {
                            for c in 0..n {
                                gw[r * n + c] += g[r] * xv[c];
                            }
                        }
                    }
                    add_into(acc(&mut grads, *b, m), &g);
                }
                Op::CosineDistance(u, v) => {
                    let (a, b) = (self.nodes[*u].value.data(), self.nodes[*v].value.data());
                    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
                    if na >= COS_EPS && nb >= COS_EPS {
                        let cos = dot(a, b) / (na * nb);
                        // d(1 − cos)/da = −(b/(‖a‖‖b‖) − cos·a/‖a‖²)
                        let ga: Vec<f64> = a
                            .iter()
                            .zip(b)
                            .map(|(&ai, &bi)| -g[0] * (bi / (na * nb) - cos * ai / (na * na)))
                            .collect();
                        let gb: Vec<f64> = a
                            .iter()
                            .zip(b)
                            .map(|(&ai, &bi)| -g[0] * (ai / (na * nb) - cos * bi / (nb * nb)))
                            .collect();
                        add_into(acc(&mut grads, *u, ga.len()), &ga);
                        add_into(acc(&mut grads, *v, gb.len()), &gb);
                    }
                }
                Op::Stack(xs) => {
                    for (i, &x) in xs.iter().enumerate() {
                        acc(&mut grads, x, 1)[0] += g[i];
                    }
                }
                Op::Sigmoid(x) => {
                    let y = node.value.data();
                    let gx = acc(&mut grads, *x, y.len());
                    for ((d, &yv), &gv) in gx.iter_mut().zip(y).zip(&g) {
                        *d += gv * yv * (1.0 - yv);
                    }
                }
                Op::BceWithLogits { logit, target } => {
                    let z = self.nodes[*logit].value.item();
                    acc(&mut grads, *logit, 1)[0] += g[0] * (sigmoid(z) - target);
                }
            }
            grads[id] = Some(g);
        }
        Ok(Grads { grads })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Central differences of `f` around every coordinate of `inputs[which]`.
    fn check<F>(inputs: &[Tensor], f: F)
    where
        F: Fn(&mut Tape, &[Var]) -> Var,
    {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let grads = tape.backward(out).unwrap();
        let h = 1e-5;
        for (which, t) in inputs.iter().enumerate() {
            let analytic = grads.wrt(&tape, vars[which]);
            for i in 0..t.len() {
                let eval = |delta: f64| {
                    let mut perturbed = inputs.to_vec();
                    perturbed[which].data_mut()[i] += delta;
                    let mut tp = Tape::new();
                    let vs: Vec<Var> = perturbed.into_iter().map(|t| tp.leaf(t)).collect();
                    let o = f(&mut tp, &vs);
                    tp.value(o).item()
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic[i] - numeric).abs() / denom < 1e-4 || (analytic[i] - numeric).abs() < 1e-8,
                    "input {which}[{i}]: analytic {} vs numeric {numeric}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn conv1d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dilation in [1, 2, 4] {
            let inputs = vec![
                rand_tensor(&mut rng, vec![2, 7]),
                rand_tensor(&mut rng, vec![3, 2, 3]),
                rand_tensor(&mut rng, vec![3]),
            ];
            check(&inputs, |t, v| {
                let y = t.conv1d(v[0], v[1], v[2], dilation).unwrap();
                let y = t.scale(y, 0.7);
                let sq = t.relu(y);
                t.sum(sq)
            });
        }
    }

    #[test]
    fn pooling_linear_cosine_sigmoid_bce_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = vec![
            rand_tensor(&mut rng, vec![3, 5]),
            rand_tensor(&mut rng, vec![3, 5]),
            rand_tensor(&mut rng, vec![4, 3]),
            rand_tensor(&mut rng, vec![4]),
            rand_tensor(&mut rng, vec![1, 2]),
        ];
        for target in [0.0, 1.0] {
            check(&inputs, |t, v| {
                let a = t.mean_time(v[0]);
                let b = t.mean_time(v[1]);
                let ea = t.linear(a, v[2], v[3]);
                let eb = t.linear(b, v[2], v[3]);
                let d = t.cosine_distance(ea, eb);
                let s = t.add(v[0], v[1]);
                let s = t.sum(s);
                let s = t.scale(s, 0.1);
                let st = t.stack(&[d, s]);
                let zero = t.leaf(Tensor::vector(vec![0.0]));
                let z = t.linear(st, v[4], zero);
                let z = t.sum(z);
                t.bce_with_logits(z, target)
            });
        }
        check(&inputs[..1], |t, v| {
            let s = t.sigmoid(v[0]);
            t.sum(s)
        });
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let z = tape.scale(p, 0.0);
        let l = tape.sum(z);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.wrt(&tape, p), vec![0.0; 3]);
    }

    #[test]
    fn backward_without_forward() {
        let tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::NoForwardRecorded)));
    }

    #[test]
    fn cosine_degenerate_and_orthogonal() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let d = tape.cosine_distance(z, z);
        assert_eq!(tape.value(d).item(), 1.0);
        let a = tape.leaf(Tensor::vector(vec![1.0, 0.0]));
        let b = tape.leaf(Tensor::vector(vec![0.0, 3.0]));
        let d = tape.cosine_distance(a, b);
        assert_eq!(tape.value(d).item(), 1.0);
        let d = tape.cosine_distance(a, a);
        assert_eq!(tape.value(d).item(), 0.0);
    }

    #[test]
    fn conv_is_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = rand_tensor(&mut rng, vec![2, 1, 3]);
        let b = rand_tensor(&mut rng, vec![2]);
        let x = rand_tensor(&mut rng, vec![1, 12]);
        let run = |x: Tensor| {
            let mut t = Tape::new();
            let (xv, wv, bv) = (t.leaf(x), t.leaf(w.clone()), t.leaf(b.clone()));
            let y = t.conv1d(xv, wv, bv, 2).unwrap();
            t.value(y).clone()
        };
        let base = run(x.clone());
        for p in 0..12 {
            let mut x2 = x.clone();
            x2.data_mut()[p] += 5.0;
            let y = run(x2);
            for c in 0..2 {
                for t in 0..p {
                    assert_eq!(y.data()[c * 12 + t], base.data()[c * 12 + t]);
                }
            }
        }
    }

    #[test]
    fn conv_channel_mismatch() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(vec![2, 4]));
        let w = t.leaf(Tensor::zeros(vec![1, 3, 2]));
        let b = t.leaf(Tensor::zeros(vec![1]));
        assert_eq!(
            t.conv1d(x, w, b, 1),
            Err(Error::ChannelMismatch { expected: 3, got: 2 })
        );
    }
}
