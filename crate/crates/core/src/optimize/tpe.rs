//! Univariate Tree-structured Parzen Estimator.
//!
//! Complete trials are split into a "good" set (lowest losses) and a "bad"
//! set. Per free dimension, a Parzen mixture is fit to each set and the
//! candidate drawn from the good mixture with the largest `l(x) / g(x)` wins.

use super::{OptimizeError, Result, Trial};
use crate::metagame::{ParamKind, ParameterSpec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    /// Complete trials required before modeling; earlier asks are random.
    pub n_startup: usize,
    /// Fraction of complete trials placed in the good set.
    pub gamma: f64,
    /// Upper bound on the good-set size.
    pub gamma_cap: usize,
    pub n_candidates: usize,
    /// Minimum kernel bandwidth as a fraction of `max - min`. Bandwidths are
    /// also never below `(max - min) / min(100, observations + 1)`.
    pub bandwidth_floor: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup: 10,
            gamma: 0.25,
            gamma_cap: 25,
            n_candidates: 24,
            bandwidth_floor: 1e-6,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OptimizeError::InvalidConfig(m.to_string()));
        if self.n_startup == 0 || self.gamma_cap == 0 || self.n_candidates == 0 {
            return bad("n_startup, gamma_cap and n_candidates must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.bandwidth_floor > 0.0 && self.bandwidth_floor.is_finite()) {
            return bad("bandwidth_floor must be positive");
        }
        Ok(())
    }
}

/// Splits complete trials by ascending loss (ties: lower id first).
///
/// The good set holds `ceil(gamma * count)` trials, capped at `cap` and at
/// `count - 1` so the bad set is never empty.
pub fn tpe_split(history: &[Trial], gamma: f64, cap: usize) -> Result<(Vec<&Trial>, Vec<&Trial>)> {
    let mut complete: Vec<(&Trial, f64)> = history
        .iter()
        .filter_map(|t| t.loss().map(|l| (t, l)))
        .collect();
    if complete.len() < 2 {
        return Err(OptimizeError::TooFewTrials(complete.len()));
    }
    complete.sort_by(|(a, la), (b, lb)| la.total_cmp(lb).then(a.id.cmp(&b.id)));
    let n = complete.len();
    let n_good = ((gamma * n as f64).ceil() as usize).clamp(1, cap.max(1).min(n - 1));
    let mut trials = complete.into_iter().map(|(t, _)| t);
    let good = trials.by_ref().take(n_good).collect();
    Ok((good, trials.collect()))
}

/// A uniform-weight mixture of truncated Gaussians plus one uniform prior
/// component over `[low, high]`.
#[derive(Debug, Clone)]
pub(crate) struct ParzenMixture {
    low: f64,
    high: f64,
    centers: Vec<f64>,
    bandwidths: Vec<f64>,
    /// Normalizing mass of each kernel inside `[low, high]`.
    masses: Vec<f64>,
}

impl ParzenMixture {
    pub(crate) fn fit(values: &[f64], low: f64, high: f64, floor: f64) -> Self {
        let span = high - low;
        // The count-dependent floor keeps coincident observations from
        // collapsing the mixture onto a spike.
        let shrink = span / (values.len() + 1).min(100) as f64;
        let min_bw = (floor * span).max(shrink).max(f64::MIN_POSITIVE);
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let bandwidths: Vec<f64> = (0..sorted.len())
            .map(|i| {
                let left = i.checked_sub(1).map(|p| sorted[i] - sorted[p]);
                let right = sorted.get(i + 1).map(|n| n - sorted[i]);
                let nearest = match (left, right) {
                    (Some(l), Some(r)) => l.min(r),
                    (Some(d), None) | (None, Some(d)) => d,
                    (None, None) => span,
                };
                nearest.clamp(min_bw, span.max(min_bw))
            })
            .collect();
        let masses = sorted
            .iter()
            .zip(&bandwidths)
            .map(|(&mu, &sigma)| {
                (normal_cdf((high - mu) / sigma) - normal_cdf((low - mu) / sigma))
                    .max(f64::MIN_POSITIVE)
            })
            .collect();
        Self {
            low,
            high,
            centers: sorted,
            bandwidths,
            masses,
        }
    }

    fn components(&self) -> usize {
        self.centers.len() + 1
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..self.components());
        if k == self.centers.len() {
            return rng.random_range(self.low..=self.high);
        }
        let (mu, sigma) = (self.centers[k], self.bandwidths[k]);
        // Rejection sampling; acceptance is at least ~0.34 since the center is in range.
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = mu + sigma * z;
            if (self.low..=self.high).contains(&x) {
                return x;
            }
        }
    }

    pub(crate) fn log_pdf(&self, x: f64) -> f64 {
        if !(self.low..=self.high).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let prior = 1.0 / (self.high - self.low);
        let kernels: f64 = self
            .centers
            .iter()
            .zip(&self.bandwidths)
            .zip(&self.masses)
            .map(|((&mu, &sigma), &mass)| {
                let z = (x - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt() * mass)
            })
            .sum();
        ((prior + kernels) / self.components() as f64).ln()
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

/// Proposes one value for a free dimension from good/bad observations.
///
/// Integer specs are modeled on `[min - 0.5, max + 0.5]` so every whole value
/// gets equal prior mass; candidates are rounded before scoring.
pub fn tpe_sample_dimension<R: Rng + ?Sized>(
    good: &[f64],
    bad: &[f64],
    spec: &ParameterSpec,
    n_candidates: usize,
    bandwidth_floor: f64,
    rng: &mut R,
) -> Result<f64> {
    if spec.is_fixed() {
        return Err(OptimizeError::FixedParameter(spec.name.clone()));
    }
    if good.is_empty() || bad.is_empty() {
        return Err(OptimizeError::EmptyObservations);
    }
    if spec.min == spec.max {
        return Ok(spec.min);
    }
    let (low, high) = match spec.kind {
        ParamKind::Integer => (spec.min - 0.5, spec.max + 0.5),
        ParamKind::Real => (spec.min, spec.max),
    };
    let l = ParzenMixture::fit(good, low, high, bandwidth_floor);
    let g = ParzenMixture::fit(bad, low, high, bandwidth_floor);
    let mut best = (f64::NEG_INFINITY, spec.min);
    for _ in 0..n_candidates.max(1) {
        let x = spec.project(l.sample(rng));
        let score = l.log_pdf(x) - g.log_pdf(x);
        if score > best.0 || best.0 == f64::NEG_INFINITY {
            best = (score, x);
        }
    }
    Ok(best.1)
}
