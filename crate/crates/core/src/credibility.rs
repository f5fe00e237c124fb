//! Reliability and benevolence iterated to a fixed point, with credibility
//! as their product.
//!
//! Benevolence of `S` is the reliability-weighted direct trust it receives,
//! averaged over its raters. Reliability of `S` is one minus half the mean
//! absolute gap between the trust `S` gives and the benevolence of the
//! objects it rates. The two are alternated from 0.5 until neither map moves
//! by `epsilon` or more; credibility is their product.
//!
//! Each phase is Jacobi-style: benevolence reads the previous reliability
//! map, reliability reads the benevolence just computed. Objects without
//! in-edges (out-edges) keep their previous benevolence (reliability).

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::TrustGraph;
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;
const INITIAL_SCORE: f64 = 0.5;

/// Per-object scores indexed by the graph's dense node index.
#[derive(Debug, Clone, PartialEq)]
pub struct CredibilityScores {
    pub reliability: Vec<f64>,
    pub benevolence: Vec<f64>,
    pub credibility: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CredibilityScores {
    pub fn len(&self) -> usize {
        self.reliability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reliability.is_empty()
    }

    /// Assembles scores from reliability and benevolence, deriving
    /// credibility as their product.
    pub fn from_parts(reliability: Vec<f64>, benevolence: Vec<f64>) -> Result<Self> {
        if reliability.len() != benevolence.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} reliability values, {} benevolence values",
                reliability.len(),
                benevolence.len()
            )));
        }
        let credibility = reliability.iter().zip(&benevolence).map(|(r, b)| r * b).collect();
        Ok(Self {
            reliability,
            benevolence,
            credibility,
            iterations: 0,
            converged: true,
        })
    }
}

/// One benevolence update from the previous reliability map.
pub fn benevolence_step(g: &TrustGraph, r_prev: &[f64], b_prev: &[f64]) -> Vec<f64> {
    (0..g.node_count())
        .map(|s| {
            let deg = g.in_degree(s);
            if deg == 0 {
                return b_prev[s];
            }
            let sum: f64 = g.in_edges(s).map(|(i, dtm)| r_prev[i] * dtm).sum();
            sum / deg as f64
        })
        .collect()
}

/// One reliability update from the current benevolence map.
pub fn reliability_step(g: &TrustGraph, b_curr: &[f64], r_prev: &[f64]) -> Vec<f64> {
    (0..g.node_count())
        .map(|s| {
            let deg = g.out_degree(s);
            if deg == 0 {
                return r_prev[s];
            }
            let gap: f64 = g.out_edges(s).map(|(i, dtm)| (dtm - b_curr[i]).abs()).sum();
            1.0 - gap / (2.0 * deg as f64)
        })
        .collect()
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterates reliability and benevolence to a fixed point. Hitting
/// `max_iter` is not an error: the scores come back with `converged = false`.
pub fn solve_credibility(g: &TrustGraph, epsilon: f64, max_iter: usize) -> Result<CredibilityScores> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let n = g.node_count();
    let mut r = vec![INITIAL_SCORE; n];
    let mut b = vec![INITIAL_SCORE; n];
    let mut iterations = 0;
    let mut converged = n == 0;
    while !converged && iterations < max_iter {
        let b_next = benevolence_step(g, &r, &b);
        let r_next = reliability_step(g, &b_next, &r);
        iterations += 1;
        converged = max_change(&r, &r_next) < epsilon && max_change(&b, &b_next) < epsilon;
        debug_assert!(r_next.iter().chain(&b_next).all(|v| (0.0..=1.0).contains(v)));
        r = r_next;
        b = b_next;
    }
    let mut scores = CredibilityScores::from_parts(r, b)?;
    scores.iterations = iterations;
    scores.converged = converged;
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ObjectId;

    fn graph(edges: &[(u64, u64, f64)]) -> TrustGraph {
        TrustGraph::from_parts([], edges.iter().map(|&(u, v, w)| (ObjectId(u), ObjectId(v), w))).unwrap()
    }

    #[test]
    fn benevolence_examples() {
        let g = graph(&[(0, 1, 1.0)]);
        let b = benevolence_step(&g, &[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(b[1], 0.5);

        let g = graph(&[(0, 2, 0.4), (1, 2, 0.6)]);
        let b = benevolence_step(&g, &[1.0, 1.0, 1.0], &[0.5; 3]);
        assert!((b[2] - 0.5).abs() < 1e-15);
        // Node 0 has no raters and keeps its previous value.
        assert_eq!(b[0], 0.5);
    }

    #[test]
    fn reliability_examples() {
        let g = graph(&[(0, 1, 0.3)]);
        let r = reliability_step(&g, &[0.9, 0.3], &[0.2, 0.7]);
        assert_eq!(r[0], 1.0);
        assert_eq!(r[1], 0.7);

        let g = graph(&[(0, 1, 1.0)]);
        let r = reliability_step(&g, &[0.5, 0.0], &[0.5, 0.5]);
        assert_eq!(r[0], 0.5);
    }

    #[test]
    fn complete_digraph_of_full_trust_converges_to_one() {
        let mut edges = Vec::new();
        for u in 0..3 {
            for v in 0..3 {
                if u != v {
                    edges.push((u, v, 1.0));
                }
            }
        }
        // R and B errors are each below epsilon at exit, so CR = R·B needs a
        // tighter solve to land within 1e-6 of the fixed point.
        let s = solve_credibility(&graph(&edges), 1e-7, 200).unwrap();
        assert!(s.converged);
        for i in 0..3 {
            assert!((s.reliability[i] - 1.0).abs() < 1e-6);
            assert!((s.benevolence[i] - 1.0).abs() < 1e-6);
            assert!((s.credibility[i] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn max_iter_reports_non_convergence() {
        let s = solve_credibility(&graph(&[(0, 1, 1.0), (1, 0, 1.0)]), 1e-12, 2).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 2);
    }

    #[test]
    fn credibility_is_the_product() {
        let s = CredibilityScores::from_parts(vec![0.96, 0.97], vec![0.82, 0.26]).unwrap();
        assert_eq!(s.credibility[0], 0.96 * 0.82);
        assert!((s.credibility[0] - 0.79).abs() < 0.005);
        assert!((s.credibility[1] - 0.25).abs() < 0.005);
    }

    #[test]
    fn empty_graph_is_trivially_converged() {
        let s = solve_credibility(&graph(&[]), 1e-6, 10).unwrap();
        assert!(s.converged);
        assert!(s.is_empty());
    }
}
