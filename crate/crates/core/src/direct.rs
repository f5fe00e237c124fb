//! Direct trust between an ordered pair of objects.
//!
//! Interactions at or before the window boundary `t0` form the past bucket,
//! later ones the current bucket. Past counts are discounted by the trust
//! factor `Φ = 1 − (elapsed / horizon)^λ` (clamped to [0, 1]) and added to
//! the current counts; the beta-posterior mean of the result is the edge's
//! direct trust.

use alloc::vec::Vec;

use crate::graph::{InteractionLog, Outcome, TrustGraph};
use crate::math::powf;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// Rate of the trust factor, > 0.
    pub lambda: f64,
    /// Boundary between past (`time <= t0`) and current interactions.
    pub t0: u64,
    /// Time span that maps onto an elapsed fraction of 1, > 0.
    pub horizon: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            t0: 0,
            horizon: 1.0,
        }
    }
}

impl DecayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Parameters for a dataset whose timestamps span `[first, last]`:
    /// horizon is the full span (1 when all timestamps coincide) and the
    /// window boundary sits at the midpoint.
    pub fn for_time_range(first: u64, last: u64, lambda: f64) -> Self {
        let span = last.saturating_sub(first);
        Self {
            lambda,
            t0: first + span / 2,
            horizon: if span == 0 { 1.0 } else { span as f64 },
        }
    }
}

/// Which closed form turns effective counts into direct trust.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DtmRule {
    /// `(p + 1) / (p + n + 2)`.
    #[default]
    Laplace,
    /// `p / (p + n)` when both counts are positive, 0.5 otherwise.
    Ratio,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairCounters {
    pub p_current: f64,
    pub n_current: f64,
    pub p_past: f64,
    pub n_past: f64,
}

impl PairCounters {
    pub fn from_records(records: &[(u64, Outcome)], t0: u64) -> Self {
        let mut c = Self::default();
        for &(time, outcome) in records {
            let past = time <= t0;
            match (outcome, past) {
                (Outcome::Positive, true) => c.p_past += 1.0,
                (Outcome::Positive, false) => c.p_current += 1.0,
                (Outcome::Negative, true) => c.n_past += 1.0,
                (Outcome::Negative, false) => c.n_current += 1.0,
            }
        }
        c
    }
}

pub fn trust_factor(elapsed: f64, params: &DecayParams) -> f64 {
    let x = (elapsed.max(0.0) / params.horizon).clamp(0.0, 1.0);
    (1.0 - powf(x, params.lambda)).clamp(0.0, 1.0)
}

/// Past counts weighted by `phi` plus current counts: `(p_eff, n_eff)`.
pub fn effective_counts(c: &PairCounters, phi: f64) -> (f64, f64) {
    (phi * c.p_past + c.p_current, phi * c.n_past + c.n_current)
}

pub fn dtm(p_eff: f64, n_eff: f64) -> f64 {
    (p_eff + 1.0) / (p_eff + n_eff + 2.0)
}

pub fn dtm_ratio(p_eff: f64, n_eff: f64) -> f64 {
    if p_eff > 0.0 && n_eff > 0.0 {
        p_eff / (p_eff + n_eff)
    } else {
        0.5
    }
}

impl DtmRule {
    pub fn apply(self, p_eff: f64, n_eff: f64) -> f64 {
        match self {
            DtmRule::Laplace => dtm(p_eff, n_eff),
            DtmRule::Ratio => dtm_ratio(p_eff, n_eff),
        }
    }
}

/// Direct trust of every edge in `graph.edges()` order.
pub fn edge_dtms(log: &InteractionLog, params: &DecayParams, now: u64, rule: DtmRule) -> Result<Vec<f64>> {
    params.validate()?;
    let phi = trust_factor(now.saturating_sub(params.t0) as f64, params);
    Ok((0..log.len())
        .map(|e| {
            let c = PairCounters::from_records(log.edge_records(e), params.t0);
            let (p, n) = effective_counts(&c, phi);
            rule.apply(p, n)
        })
        .collect())
}

/// Returns `graph` with every edge weighted by its direct trust at `now`.
pub fn compute_all_dtm(
    graph: &TrustGraph,
    log: &InteractionLog,
    params: &DecayParams,
    now: u64,
    rule: DtmRule,
) -> Result<TrustGraph> {
    if log.len() != graph.edge_count() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "interaction log covers {} edges, graph has {}",
            log.len(),
            graph.edge_count()
        )));
    }
    graph.with_weights(&edge_dtms(log, params, now, rule)?)
}
