//! Point-adjusted precision, recall and F1, and validation threshold sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::vote_point_labels;
use crate::error::{Error, Result};
use crate::series::WindowSpec;

/// Confusion counts over anomalous points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn of(pred: &[u8], truth: &[u8]) -> Result<Self> {
        check_len(pred, truth)?;
        let mut c = Counts::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(c)
    }

    /// `(precision, recall, f1)` with the degenerate-denominator conventions.
    pub fn rates(&self) -> (f64, f64, f64) {
        let (tp, fp, fn_) = (self.tp as f64, self.fp as f64, self.fn_ as f64);
        let precision = if self.tp + self.fp == 0 {
            if self.fn_ == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp / (tp + fp)
        };
        let recall = if self.tp + self.fn_ == 0 { 1.0 } else { tp / (tp + fn_) };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        (precision, recall, f1)
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl EvalReport {
    pub fn from_counts(c: Counts, threshold: f64) -> Self {
        let (precision, recall, f1) = c.rates();
        EvalReport {
            precision,
            recall,
            f1,
            threshold,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

fn check_len(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { a: a.len(), b: b.len() });
    }
    Ok(())
}

/// Credits every true segment that contains at least one predicted point.
pub fn point_adjust(pred: &[u8], truth: &[u8]) -> Result<Vec<u8>> {
    check_len(pred, truth)?;
    let mut out: Vec<u8> = pred.iter().map(|&p| u8::from(p != 0)).collect();
    let mut t = 0;
    while t < truth.len() {
        if truth[t] == 0 {
            t += 1;
            continue;
        }
        let start = t;
        while t < truth.len() && truth[t] != 0 {
            t += 1;
        }
        if out[start..t].contains(&1) {
            out[start..t].fill(1);
        }
    }
    Ok(out)
}

/// Pointwise precision, recall and F1 of `pred` against `truth`.
pub fn prf1(pred: &[u8], truth: &[u8]) -> Result<(f64, f64, f64)> {
    Ok(Counts::of(pred, truth)?.rates())
}

/// Point-adjusted counts for one series.
pub fn adjusted_counts(pred: &[u8], truth: &[u8]) -> Result<Counts> {
    Counts::of(&point_adjust(pred, truth)?, truth)
}

/// Votes, adjusts and pools counts over series at one threshold.
pub fn pooled_report(
    window_scores: &[Vec<(usize, f64)>],
    truths: &[Vec<u8>],
    spec: &WindowSpec,
    threshold: f64,
) -> Result<EvalReport> {
    if window_scores.len() != truths.len() {
        return Err(Error::LengthMismatch {
            a: window_scores.len(),
            b: truths.len(),
        });
    }
    let mut total = Counts::default();
    for (scores, truth) in window_scores.iter().zip(truths) {
        let pred = vote_point_labels(scores, threshold, spec, truth.len());
        total += adjusted_counts(&pred, truth)?;
    }
    Ok(EvalReport::from_counts(total, threshold))
}

/// Candidate thresholds: midpoints of consecutive distinct scores, plus 0.5.
pub fn candidate_thresholds(window_scores: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let mut s: Vec<f64> = window_scores.iter().flatten().map(|&(_, p)| p).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut c: Vec<f64> = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    c.push(0.5);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Threshold maximizing pooled point-adjusted F1 on labeled validation
/// series; ties go to the larger threshold.
pub fn select_threshold(
    window_scores: &[Vec<(usize, f64)>],
    truths: &[Vec<u8>],
    spec: &WindowSpec,
) -> Result<(f64, EvalReport)> {
    if !truths.iter().any(|t| t.contains(&1)) {
        return Err(Error::NoLabeledValidation);
    }
    let candidates = candidate_thresholds(window_scores);
    let reports: Vec<EvalReport> = candidates
        .par_iter()
        .map(|&th| pooled_report(window_scores, truths, spec, th))
        .collect::<Result<_>>()?;
    // Candidates ascend, so `>=` keeps the largest among equal F1.
    let mut best = reports[0];
    for r in &reports[1..] {
        if r.f1 >= best.f1 {
            best = *r;
        }
    }
    Ok((best.threshold, best))
}
