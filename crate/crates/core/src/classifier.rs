//! Single-hidden-layer ReLU network mapping the five trust metrics onto
//! three trust levels, trained with Adam on softmax cross-entropy plus an L2
//! penalty on the weights.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::features::{TrustSample, N_FEATURES};
use crate::ingest::{LabelThresholds, TrustLabel};
use crate::math::{exp, ln, sqrt};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden_size: usize,
    pub l2: f64,
    pub max_epochs: usize,
    /// Training stops once an epoch's loss drops below this.
    pub cost_threshold: f64,
    pub learning_rate: f64,
    /// `None` trains on the full set every step.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            l2: 1e-4,
            max_epochs: 500,
            cost_threshold: 1e-3,
            learning_rate: 1e-3,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Weights are row-major: `hidden_weights[i * H + j]` connects input `i` to
/// hidden unit `j`, `output_weights[j * 3 + c]` hidden unit `j` to class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub hidden_size: usize,
    pub l2_penalty: f64,
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(hidden_size: usize, l2_penalty: f64) -> Self {
        Self {
            hidden_size,
            l2_penalty,
            hidden_weights: vec![0.0; N_FEATURES * hidden_size],
            hidden_bias: vec![0.0; hidden_size],
            output_weights: vec![0.0; hidden_size * N_CLASSES],
            output_bias: vec![0.0; N_CLASSES],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(hidden_size: usize, l2_penalty: f64, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::MlpInit);
        let mut m = Self::zeros(hidden_size, l2_penalty);
        let b1 = sqrt(6.0 / (N_FEATURES + hidden_size) as f64);
        let b2 = sqrt(6.0 / (hidden_size + N_CLASSES) as f64);
        m.hidden_weights.iter_mut().for_each(|w| *w = rng.gen_range(-b1..=b1));
        m.output_weights.iter_mut().for_each(|w| *w = rng.gen_range(-b2..=b2));
        m
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size;
        if h == 0 {
            return Err(Error::ShapeMismatch("hidden size must be at least 1".into()));
        }
        let shapes = [
            ("hidden weights", self.hidden_weights.len(), N_FEATURES * h),
            ("hidden bias", self.hidden_bias.len(), h),
            ("output weights", self.output_weights.len(), h * N_CLASSES),
            ("output bias", self.output_bias.len(), N_CLASSES),
        ];
        for (what, got, want) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "{what}: {got} values, expected {want}"
                )));
            }
        }
        let all = self
            .hidden_weights
            .iter()
            .chain(&self.hidden_bias)
            .chain(&self.output_weights)
            .chain(&self.output_bias);
        if !all.clone().all(|w| w.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    fn hidden_pre(&self, x: &[f64; N_FEATURES]) -> Vec<f64> {
        let h = self.hidden_size;
        let mut pre = self.hidden_bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            for (j, p) in pre.iter_mut().enumerate() {
                *p += xi * self.hidden_weights[i * h + j];
            }
        }
        pre
    }

    fn logits_from_hidden(&self, hidden: &[f64]) -> [f64; N_CLASSES] {
        let mut out = [0.0; N_CLASSES];
        out.copy_from_slice(&self.output_bias);
        for (j, &a) in hidden.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += a * self.output_weights[j * N_CLASSES + c];
            }
        }
        out
    }

    pub fn logits(&self, x: &[f64; N_FEATURES]) -> [f64; N_CLASSES] {
        let hidden: Vec<f64> = self.hidden_pre(x).into_iter().map(relu).collect();
        self.logits_from_hidden(&hidden)
    }

    fn weight_norm_sq(&self) -> f64 {
        self.hidden_weights
            .iter()
            .chain(&self.output_weights)
            .map(|w| w * w)
            .sum()
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn softmax(logits: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.map(|l| exp(l - max));
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64; N_CLASSES]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(model: &MlpModel, features: &[f64]) -> Result<(TrustLabel, [f64; N_CLASSES])> {
    let x: [f64; N_FEATURES] = features
        .try_into()
        .map_err(|_| Error::ShapeMismatch(alloc::format!("{} features, expected {N_FEATURES}", features.len())))?;
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature { index });
    }
    let logits = model.logits(&x);
    let label = TrustLabel::from_index(argmax(&logits)).expect("three classes");
    Ok((label, softmax(&logits)))
}

/// Mean cross-entropy plus `l2 · ‖W‖²` over `samples`, and its gradient as a
/// model-shaped value.
pub fn loss_and_grad(model: &MlpModel, samples: &[&TrustSample]) -> (f64, MlpModel) {
    let h = model.hidden_size;
    let mut grad = MlpModel::zeros(h, model.l2_penalty);
    let n = samples.len().max(1) as f64;
    let mut ce = 0.0;
    for s in samples {
        let pre = model.hidden_pre(&s.features);
        let hidden: Vec<f64> = pre.iter().copied().map(relu).collect();
        let logits = model.logits_from_hidden(&hidden);
        let p = softmax(&logits);
        let y = s.label.index();
        ce -= ln(p[y].max(f64::MIN_POSITIVE));
        let mut dlogits = p;
        dlogits[y] -= 1.0;
        dlogits.iter_mut().for_each(|d| *d /= n);
        for c in 0..N_CLASSES {
            grad.output_bias[c] += dlogits[c];
        }
        for j in 0..h {
            let mut dh = 0.0;
            for c in 0..N_CLASSES {
                grad.output_weights[j * N_CLASSES + c] += hidden[j] * dlogits[c];
                dh += model.output_weights[j * N_CLASSES + c] * dlogits[c];
            }
            // ReLU subgradient is 0 at 0.
            if pre[j] <= 0.0 {
                continue;
            }
            grad.hidden_bias[j] += dh;
            for (i, &xi) in s.features.iter().enumerate() {
                grad.hidden_weights[i * h + j] += xi * dh;
            }
        }
    }
    let l2 = model.l2_penalty;
    for (g, w) in grad.hidden_weights.iter_mut().zip(&model.hidden_weights) {
        *g += 2.0 * l2 * w;
    }
    for (g, w) in grad.output_weights.iter_mut().zip(&model.output_weights) {
        *g += 2.0 * l2 * w;
    }
    (ce / n + l2 * model.weight_norm_sq(), grad)
}

#[derive(Debug, Clone)]
pub struct TrainedMlp {
    pub model: MlpModel,
    pub loss_trace: Vec<f64>,
}

/// Trains until the epoch loss falls below `cfg.cost_threshold` or
/// `cfg.max_epochs` is reached. Deterministic given `cfg.seed`.
pub fn train_mlp(samples: &[TrustSample], cfg: &MlpConfig) -> Result<TrainedMlp> {
    if cfg.hidden_size == 0 {
        return Err(Error::InvalidParameter("hidden size must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("training samples"));
    }
    let first = samples[0].label;
    if samples.iter().all(|s| s.label == first) {
        return Err(Error::DegenerateLabels);
    }
    let mut model = MlpModel::init(cfg.hidden_size, cfg.l2, cfg.seed);
    let adam = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut opt = [
        Adam::new(model.hidden_weights.len(), adam),
        Adam::new(model.hidden_bias.len(), adam),
        Adam::new(model.output_weights.len(), adam),
        Adam::new(model.output_bias.len(), adam),
    ];
    let mut order: Vec<&TrustSample> = samples.iter().collect();
    let batch = cfg.batch_size.unwrap_or(samples.len()).clamp(1, samples.len());
    let mut rng = stream(cfg.seed, Stream::MlpInit);
    let mut loss_trace = Vec::new();
    for epoch in 0..cfg.max_epochs {
        if batch < samples.len() {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, g) = loss_and_grad(&model, chunk);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss * chunk.len() as f64;
            opt[0].step(&mut model.hidden_weights, &g.hidden_weights);
            opt[1].step(&mut model.hidden_bias, &g.hidden_bias);
            opt[2].step(&mut model.output_weights, &g.output_weights);
            opt[3].step(&mut model.output_bias, &g.output_bias);
        }
        let epoch_loss = total / samples.len() as f64;
        loss_trace.push(epoch_loss);
        if epoch_loss < cfg.cost_threshold {
            break;
        }
    }
    Ok(TrainedMlp { model, loss_trace })
}

/// Hand-weighted aggregate `Σ wᵢ·xᵢ` of the five metrics. Weights must be
/// non-negative and sum to 1.
pub fn weighted_trust(features: &[f64; N_FEATURES], weights: &[f64; N_FEATURES]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "weights must be non-negative and sum to 1, got sum {sum}"
        )));
    }
    Ok(features.iter().zip(weights).map(|(x, w)| x * w).sum())
}

/// Classifies a weighted aggregate with the labelling cut points.
pub fn weighted_label(
    features: &[f64; N_FEATURES],
    weights: &[f64; N_FEATURES],
    cuts: &LabelThresholds,
) -> Result<TrustLabel> {
    cuts.label(weighted_trust(features, weights)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ObjectId;

    fn sample(x: [f64; 5], label: TrustLabel) -> TrustSample {
        TrustSample {
            trustor: ObjectId(0),
            trustee: ObjectId(1),
            features: x,
            label,
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(4, 0.0);
        let (label, p) = predict(&m, &[0.3, 0.1, 0.9, 0.2, -0.4]).unwrap();
        assert_eq!(label, TrustLabel::Untrustworthy);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_rejects_bad_input() {
        let m = MlpModel::zeros(2, 0.0);
        assert!(matches!(predict(&m, &[0.0; 4]), Err(Error::ShapeMismatch(_))));
        assert_eq!(
            predict(&m, &[0.0, f64::NAN, 0.0, 0.0, 0.0]).unwrap_err(),
            Error::NonFiniteFeature { index: 1 }
        );
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 1.0, 2.0]), 2);
    }

    #[test]
    fn degenerate_labels_rejected() {
        let s = [
            sample([0.1; 5], TrustLabel::Neutral),
            sample([0.2; 5], TrustLabel::Neutral),
        ];
        assert_eq!(
            train_mlp(&s, &MlpConfig::default()).unwrap_err(),
            Error::DegenerateLabels
        );
    }

    #[test]
    fn weighted_baseline() {
        let x = [1.0, 0.5, 0.5, 0.0, 0.0];
        let w = [0.2; 5];
        assert!((weighted_trust(&x, &w).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(
            weighted_label(&x, &w, &LabelThresholds::default()).unwrap(),
            TrustLabel::Neutral
        );
        assert!(weighted_trust(&x, &[0.5; 5]).is_err());
    }

    #[test]
    fn strong_penalty_collapses_to_class_prior() {
        let mut s = Vec::new();
        for i in 0..30 {
            let label = match i % 6 {
                0 => TrustLabel::Untrustworthy,
                1 | 2 => TrustLabel::Neutral,
                _ => TrustLabel::Trustworthy,
            };
            let v = i as f64 / 30.0;
            s.push(sample([v, 1.0 - v, 0.5, v * v, 0.0], label));
        }
        let cfg = MlpConfig {
            l2: 1e3,
            learning_rate: 1e-2,
            max_epochs: 3000,
            cost_threshold: 0.0,
            ..Default::default()
        };
        let m = train_mlp(&s, &cfg).unwrap().model;
        assert!(m.hidden_weights.iter().chain(&m.output_weights).all(|w| w.abs() < 1e-2));
        let (label, p) = predict(&m, &s[0].features).unwrap();
        assert_eq!(label, TrustLabel::Trustworthy);
        let prior = [5.0 / 30.0, 10.0 / 30.0, 15.0 / 30.0];
        for c in 0..3 {
            assert!((p[c] - prior[c]).abs() < 0.02, "{p:?}");
        }
    }
}
