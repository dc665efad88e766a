//! Next-step error-amplification bound for the explicit update, and the
//! time-step policy it assumes.
//!
//! The bound compares two discretizations of the same curve with `N1` and
//! `N2` nodes. It certifies non-growth of the representation error for the
//! next step only; nothing here says anything about a whole run.

use crate::error::{Error, Result};

/// `Δt = 1/N²`.
pub fn dt_policy(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (n * n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityInputs {
    /// Representative normal speed; the flow passes `max_j |v_j|`.
    pub v_star: f64,
    /// Curve length.
    pub length: f64,
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
}

impl StabilityInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidConfig(format!("curve length {} must be positive", self.length)));
        }
        if self.n1 < 5 || self.n2 < 5 {
            return Err(Error::InvalidConfig(format!(
                "point counts ({}, {}) must be at least 5",
                self.n1, self.n2
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !self.v_star.is_finite() {
            return Err(Error::InvalidConfig("v_star must be finite".into()));
        }
        Ok(())
    }
}

/// Bound on `|λ|²` with the quadrature-error speed dropped:
/// `2 Δt² ( |v*|/(3L) · (2 max(N1, 4 N2) + 3 N2) )²`.
pub fn eigen_bound(inputs: &StabilityInputs) -> f64 {
    let n1 = inputs.n1 as f64;
    let n2 = inputs.n2 as f64;
    let growth = 2.0 * n1.max(4.0 * n2) + 3.0 * n2;
    let inner = inputs.v_star.abs() / (3.0 * inputs.length) * growth;
    2.0 * inputs.dt * inputs.dt * inner * inner
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// The squared-modulus bound.
    pub bound: f64,
    /// `sqrt(bound)`, the bound on `|λ|`.
    pub amplification: f64,
    /// The error does not grow over the next step.
    pub stable_next_step: bool,
    /// `(N2, bound)` for each candidate, in the order given.
    pub candidates: Vec<(usize, f64)>,
    /// Candidate bounds strictly increase with `N2`.
    pub candidates_increasing: bool,
}

pub fn stability_report(inputs: &StabilityInputs, candidate_n2: &[usize]) -> Result<StabilityReport> {
    inputs.validate()?;
    let bound = eigen_bound(inputs);
    let amplification = bound.sqrt();
    let mut candidates = Vec::with_capacity(candidate_n2.len());
    for &n2 in candidate_n2 {
        let alt = StabilityInputs { n2, ..*inputs };
        alt.validate()?;
        candidates.push((n2, eigen_bound(&alt)));
    }
    let mut sorted = candidates.clone();
    sorted.sort_by_key(|c| c.0);
    let candidates_increasing = sorted.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
    Ok(StabilityReport {
        bound,
        amplification,
        stable_next_step: amplification < 1.0,
        candidates,
        candidates_increasing,
    })
}
