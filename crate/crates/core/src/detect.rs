//! Window splitting, sliding-window scoring and majority-vote point labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::scalar::Scalar;
use crate::series::{Pair, Series, WindowSpec};

/// Window scores of one series and the point labels voted from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    /// `(start offset, probability)` per full window.
    pub window_scores: Vec<(usize, f64)>,
    pub point_labels: Vec<u8>,
    pub threshold: f64,
}

fn window_at<S: Scalar>(series: &Series<S>, spec: &WindowSpec, start: usize, labels: Option<&[u8]>) -> Pair<S> {
    let full_len = spec.full_len();
    let suspect = start + spec.context_len..start + full_len;
    Pair {
        source_id: series.id.clone(),
        start,
        context_len: spec.context_len,
        label: labels.map_or(0, |l| u8::from(l[suspect].iter().any(|&v| v != 0))),
        full: series.values.iter().map(|row| row[start..start + full_len].to_vec()).collect(),
    }
}

/// Full windows at `0, stride, 2·stride, …` while they fit.
pub fn split_windows<S: Scalar>(series: &Series<S>, spec: &WindowSpec) -> Result<Vec<Pair<S>>> {
    spec.validate()?;
    if series.len() < spec.full_len() {
        return Err(Error::SeriesShorterThanWindow {
            len: series.len(),
            window: spec.full_len(),
        });
    }
    let labels = series.labels.as_deref();
    Ok(spec
        .starts(series.len())
        .map(|s| window_at(series, spec, s, labels))
        .collect())
}

/// Scores every window of `series` under `params` (multiplier `lambda`).
pub fn score_series_with(
    params: &ModelParams,
    series: &Series<f64>,
    spec: &WindowSpec,
    lambda: f64,
) -> Result<Vec<(usize, f64)>> {
    spec.validate()?;
    if series.len() < spec.full_len() {
        return Err(Error::SeriesShorterThanWindow {
            len: series.len(),
            window: spec.full_len(),
        });
    }
    let starts: Vec<usize> = spec.starts(series.len()).collect();
    starts
        .par_iter()
        .map(|&s| {
            let pair = window_at(series, spec, s, None);
            crate::nn::model_score(params, &pair, lambda).map(|p| (s, p))
        })
        .collect()
}

/// Scores every window of `series` with the model's own multiplier.
pub fn score_series(params: &ModelParams, series: &Series<f64>, spec: &WindowSpec) -> Result<Vec<(usize, f64)>> {
    score_series_with(params, series, spec, params.config.lambda)
}

/// A window is flagged when its score exceeds `threshold`; a point is
/// anomalous when strictly more than half of the suspect spans covering it
/// belong to flagged windows. Uncovered points are normal.
pub fn vote_point_labels(scores: &[(usize, f64)], threshold: f64, spec: &WindowSpec, len: usize) -> Vec<u8> {
    let mut covered = vec![0i64; len + 1];
    let mut flagged = vec![0i64; len + 1];
    for &(start, score) in scores {
        let a = (start + spec.context_len).min(len);
        let b = (start + spec.full_len()).min(len);
        covered[a] += 1;
        covered[b] -= 1;
        if score > threshold {
            flagged[a] += 1;
            flagged[b] -= 1;
        }
    }
    let (mut c, mut f) = (0i64, 0i64);
    (0..len)
        .map(|t| {
            c += covered[t];
            f += flagged[t];
            u8::from(2 * f > c)
        })
        .collect()
}

/// Scores `series` and votes point labels at `threshold`.
pub fn detect(params: &ModelParams, series: &Series<f64>, spec: &WindowSpec, threshold: f64) -> Result<ScoreSeries> {
    let window_scores = score_series(params, series, spec)?;
    let point_labels = vote_point_labels(&window_scores, threshold, spec, series.len());
    Ok(ScoreSeries {
        window_scores,
        point_labels,
        threshold,
    })
}
