//! Discrete Fourier transform with real/imaginary interleaving.
//!
//! `X_k = Σ_n x_n·e^{−i2πkn/N}` for `k = 0..N`, laid out as
//! `[Re₀, Im₀, Re₁, Im₁, …]`. The DC bin is kept.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Interleaved spectrum of a length-`n` real window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<S> {
    pub data: Vec<S>,
    pub n: usize,
}

/// Tolerance (relative to the largest coefficient) for the real-inverse check.
pub const SYMMETRY_TOL: f64 = 1e-6;

impl<S: Scalar> Spectrum<S> {
    pub fn re(&self, k: usize) -> S {
        self.data[2 * k]
    }

    pub fn im(&self, k: usize) -> S {
        self.data[2 * k + 1]
    }

    pub fn set(&mut self, k: usize, re: S, im: S) {
        self.data[2 * k] = re;
        self.data[2 * k + 1] = im;
    }

    /// Sets bin `k` and its conjugate mirror `N−k`.
    pub fn set_mirrored(&mut self, k: usize, re: S, im: S) {
        let n = self.n;
        let k = k % n;
        let m = (n - k) % n;
        if k == m {
            // DC or Nyquist: must be real.
            self.set(k, re, S::zero());
        } else {
            self.set(k, re, im);
            self.set(m, re, -im);
        }
    }

    pub fn power(&self, k: usize) -> S {
        self.re(k) * self.re(k) + self.im(k) * self.im(k)
    }

    /// Largest deviation from `X_k = conj(X_{N−k})`, with its bin.
    pub fn symmetry_violation(&self) -> (usize, S) {
        let n = self.n;
        let mut worst = (0, S::zero());
        for k in 0..n {
            let m = (n - k) % n;
            let dev = (self.re(k) - self.re(m))
                .abs()
                .max((self.im(k) + self.im(m)).abs());
            if dev > worst.1 {
                worst = (k, dev);
            }
        }
        worst
    }
}

/// `cos(2πm/N)`, `sin(2πm/N)` for `m = 0..N`.
fn twiddles<S: Scalar>(n: usize) -> (Vec<S>, Vec<S>) {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|m| {
            let (s, c) = (step * m as f64).sin_cos();
            (S::of(c), S::of(s))
        })
        .unzip()
}

/// Forward DFT of a real window, interleaved.
pub fn dft_interleaved<S: Scalar>(window: &[S]) -> Result<Spectrum<S>> {
    let n = window.len();
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let (cos, sin) = twiddles::<S>(n);
    let mut data = vec![S::zero(); 2 * n];
    for k in 0..n {
        let mut re = S::zero();
        let mut im = S::zero();
        let mut idx = 0usize;
        for &x in window {
            re += x * cos[idx];
            im -= x * sin[idx];
            idx += k;
            if idx >= n {
                idx -= n;
            }
        }
        data[2 * k] = re;
        data[2 * k + 1] = im;
    }
    Ok(Spectrum { data, n })
}

/// Inverse DFT of a conjugate-symmetric spectrum; the result is real.
pub fn idft<S: Scalar>(spec: &Spectrum<S>) -> Result<Vec<S>> {
    let n = spec.n;
    if n == 0 || spec.data.len() != 2 * n {
        return Err(Error::EmptyWindow);
    }
    let scale = spec
        .data
        .iter()
        .fold(S::one(), |m, v| m.max(v.abs()));
    let (bin, dev) = spec.symmetry_violation();
    if dev > S::of(SYMMETRY_TOL) * scale {
        return Err(Error::AsymmetricSpectrum {
            bin,
            deviation: dev.as_f64(),
        });
    }
    let (cos, sin) = twiddles::<S>(n);
    let inv_n = S::one() / S::of_usize(n);
    let out = (0..n)
        .map(|t| {
            let mut acc = S::zero();
            let mut idx = 0usize;
            for k in 0..n {
                // Re(X_k e^{+iθ}) = Re·cos − Im·sin
                acc += spec.re(k) * cos[idx] - spec.im(k) * sin[idx];
                idx += t;
                if idx >= n {
                    idx -= n;
                }
            }
            acc * inv_n
        })
        .collect();
    Ok(out)
}
