//! Straight-line reference implementations used as test oracles. They work
//! on plain edge lists and nested loops and share no code with the library.

#![allow(dead_code)]

/// `(source, target, weight)` over nodes `0..n`.
pub type EdgeList = Vec<(usize, usize, f64)>;

/// Benevolence of every node from a reliability map; nodes nobody rates
/// keep `b_prev`.
pub fn benevolence(n: usize, edges: &EdgeList, r: &[f64], b_prev: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &(i, j, w) in edges {
            if j == s {
                sum += r[i] * w;
                count += 1;
            }
        }
        out.push(if count == 0 { b_prev[s] } else { sum / count as f64 });
    }
    out
}

/// Reliability of every node from a benevolence map; nodes that rate
/// nobody keep `r_prev`.
pub fn reliability(n: usize, edges: &EdgeList, b: &[f64], r_prev: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut gap = 0.0;
        let mut count = 0usize;
        for &(i, j, w) in edges {
            if i == s {
                gap += (w - b[j]).abs();
                count += 1;
            }
        }
        out.push(if count == 0 {
            r_prev[s]
        } else {
            1.0 - gap / (2.0 * count as f64)
        });
    }
    out
}

/// Largest change when the pair `(r, b)` is pushed through one more
/// benevolence and reliability evaluation.
pub fn fixed_point_residual(n: usize, edges: &EdgeList, r: &[f64], b: &[f64]) -> f64 {
    let b2 = benevolence(n, edges, r, b);
    let r2 = reliability(n, edges, &b2, r);
    let mut worst: f64 = 0.0;
    for s in 0..n {
        worst = worst.max((b2[s] - b[s]).abs()).max((r2[s] - r[s]).abs());
    }
    worst
}

/// Brute-force iteration from 0.5 for a fixed number of rounds.
pub fn iterate(n: usize, edges: &EdgeList, rounds: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![0.5; n];
    let mut b = vec![0.5; n];
    for _ in 0..rounds {
        b = benevolence(n, edges, &r, &b);
        r = reliability(n, edges, &b, &r);
    }
    (r, b)
}

pub fn complete_digraph(n: usize, weight: f64) -> EdgeList {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v {
                edges.push((u, v, weight));
            }
        }
    }
    edges
}

/// Reference metrics over label indices 0, 1, 2 (numeric values 0, 0.5, 1).
pub struct Metrics {
    pub f1_micro: f64,
    pub mae: f64,
    pub mse: f64,
}

pub fn metrics(truth: &[usize], pred: &[usize]) -> Metrics {
    let value = |c: usize| c as f64 / 2.0;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for k in 0..truth.len() {
        let e = (value(truth[k]) - value(pred[k])).abs();
        abs += e;
        sq += e * e;
    }
    // Per-class true positives, false positives and false negatives pooled
    // across classes.
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for class in 0..3 {
        for k in 0..truth.len() {
            match (truth[k] == class, pred[k] == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fneg += 1,
                (false, false) => {}
            }
        }
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    let f1_micro = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let n = truth.len() as f64;
    Metrics {
        f1_micro,
        mae: abs / n,
        mse: sq / n,
    }
}
