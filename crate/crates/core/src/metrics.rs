//! Evaluation metrics and data splits.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::classifier::{predict, MlpModel, N_CLASSES};
use crate::features::TrustSample;
use crate::ingest::TrustLabel;
use crate::math::floor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub f1_micro: f64,
    pub mae: f64,
    pub mse: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub n_test: usize,
}

/// Scores predictions against ground truth. Labels are encoded as
/// {0, 0.5, 1} for the absolute and squared errors; F1 is micro-averaged.
pub fn report_from_labels(truth: &[TrustLabel], predicted: &[TrustLabel]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} truths, {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
        let e = (t.score() - p.score()).abs();
        abs += e;
        sq += e * e;
    }
    let n = truth.len();
    Ok(EvalReport {
        f1_micro: micro_f1(&confusion),
        mae: abs / n as f64,
        mse: sq / n as f64,
        confusion,
        n_test: n,
    })
}

/// Micro-averaged F1 from pooled true positives, false positives and false
/// negatives over all classes.
pub fn micro_f1(confusion: &[[usize; N_CLASSES]; N_CLASSES]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for c in 0..N_CLASSES {
        tp += confusion[c][c];
        fp += (0..N_CLASSES)
            .filter(|&t| t != c)
            .map(|t| confusion[t][c])
            .sum::<usize>();
        fneg += (0..N_CLASSES)
            .filter(|&p| p != c)
            .map(|p| confusion[c][p])
            .sum::<usize>();
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn evaluate(model: &MlpModel, test: &[TrustSample]) -> Result<EvalReport> {
    let predicted = test
        .iter()
        .map(|s| predict(model, &s.features).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<TrustLabel> = test.iter().map(|s| s.label).collect();
    report_from_labels(&truth, &predicted)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffles `0..n` with the seed's fold stream and deals it into `k`
/// contiguous validation folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Folds));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let validation = order[start..start + size].to_vec();
        let train = order[..start].iter().chain(&order[start + size..]).copied().collect();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

/// Random `(train, test)` index split with `floor(n · train_fraction)`
/// training items (at least one of each when `n >= 2`).
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Split));
    let mut n_train = floor(n as f64 * train_fraction) as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let test = order.split_off(n_train);
    Ok((order, test))
}
