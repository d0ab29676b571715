//! Hodrick–Prescott trend/residual decomposition.
//!
//! The trend `τ` minimizes `Σ(y−τ)² + λ·Σ(Δ²τ)²`, i.e. solves the symmetric
//! positive-definite pentadiagonal system `(I + λ·D₂ᵀD₂)·τ = y`, where `D₂`
//! is the `(T−2)×T` second-difference operator. The system is factored as
//! `L·D·Lᵀ` with a unit lower-triangular `L` of bandwidth 2, so each
//! dimension costs `O(T)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{Decomposition, Series};

/// Default smoothing multiplier.
pub const DEFAULT_LAMBDA: f64 = 10_000.0;

/// Minimum length accepted by the filter (second differences need 3 points).
pub const MIN_LEN: usize = 3;

/// Bands of the symmetric matrix `I + λ·D₂ᵀD₂`.
struct Pentadiagonal<S> {
    diag: Vec<S>,
    /// `A[i+1][i]`
    sub1: Vec<S>,
    /// `A[i+2][i]`
    sub2: Vec<S>,
}

impl<S: Scalar> Pentadiagonal<S> {
    fn hp_normal_matrix(n: usize, lambda: S) -> Self {
        let mut diag = vec![S::one(); n];
        let mut sub1 = vec![S::zero(); n.saturating_sub(1)];
        let mut sub2 = vec![S::zero(); n.saturating_sub(2)];
        let coef = [S::one(), S::of(-2.0), S::one()];
        // Accumulate λ·rᵀr for every second-difference row r = e_k − 2e_{k+1} + e_{k+2}.
        for k in 0..n.saturating_sub(2) {
            for a in 0..3 {
                diag[k + a] += lambda * coef[a] * coef[a];
            }
            for a in 0..2 {
                sub1[k + a] += lambda * coef[a] * coef[a + 1];
            }
            sub2[k] += lambda * coef[0] * coef[2];
        }
        Self { diag, sub1, sub2 }
    }

    /// Solves `A·x = rhs` in place by banded LDLᵀ.
    fn solve_in_place(&self, rhs: &mut [S]) {
        let n = rhs.len();
        let mut d = vec![S::zero(); n];
        // e[i] = L[i][i-1], f[i] = L[i][i-2]
        let mut e = vec![S::zero(); n];
        let mut f = vec![S::zero(); n];
        for i in 0..n {
            let mut di = self.diag[i];
            if i >= 2 {
                f[i] = self.sub2[i - 2] / d[i - 2];
                di -= f[i] * f[i] * d[i - 2];
            }
            if i >= 1 {
                let mut a = self.sub1[i - 1];
                if i >= 2 {
                    a -= f[i] * e[i - 1] * d[i - 2];
                }
                e[i] = a / d[i - 1];
                di -= e[i] * e[i] * d[i - 1];
            }
            d[i] = di;
        }
        for i in 0..n {
            if i >= 1 {
                let v = e[i] * rhs[i - 1];
                rhs[i] -= v;
            }
            if i >= 2 {
                let v = f[i] * rhs[i - 2];
                rhs[i] -= v;
            }
        }
        for i in 0..n {
            rhs[i] /= d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let v = e[i + 1] * rhs[i + 1];
                rhs[i] -= v;
            }
            if i + 2 < n {
                let v = f[i + 2] * rhs[i + 2];
                rhs[i] -= v;
            }
        }
    }
}

/// HP trend of a single sequence.
pub fn hp_trend<S: Scalar>(y: &[S], lambda: S) -> Result<Vec<S>> {
    if lambda.is_nan() || lambda < S::zero() {
        return Err(Error::NegativeLambda(lambda.as_f64()));
    }
    if y.len() < MIN_LEN {
        return Err(Error::SeriesTooShort {
            len: y.len(),
            min: MIN_LEN,
        });
    }
    let mut trend = y.to_vec();
    if lambda == S::zero() {
        return Ok(trend);
    }
    Pentadiagonal::hp_normal_matrix(y.len(), lambda).solve_in_place(&mut trend);
    Ok(trend)
}

/// Decomposes a dims-major matrix row by row with a shared multiplier.
pub fn hp_decompose_rows<S: Scalar>(rows: &[Vec<S>], lambda: S) -> Result<Decomposition<S>> {
    let mut trend = Vec::with_capacity(rows.len());
    let mut residual = Vec::with_capacity(rows.len());
    for y in rows {
        let tau = hp_trend(y, lambda)?;
        residual.push(y.iter().zip(&tau).map(|(&a, &b)| a - b).collect());
        trend.push(tau);
    }
    Ok(Decomposition {
        trend,
        residual,
        lambda,
    })
}

/// Trend/residual decomposition of every dimension of `series`.
pub fn hp_filter<S: Scalar>(series: &Series<S>, lambda: S) -> Result<Decomposition<S>> {
    hp_decompose_rows(&series.values, lambda)
}
