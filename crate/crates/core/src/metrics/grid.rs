use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right edges `τ_1 < … < τ_T` of the discrete time bins; bin `t` covers
/// `(τ_{t−1}, τ_t]` with `τ_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub edges: Vec<f64>,
}

impl TimeGrid {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Usage("time grid needs at least one edge".into()));
        }
        if edges[0] <= 0.0 || edges.windows(2).any(|w| w[1] <= w[0]) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Usage("time grid edges must be positive and strictly increasing".into()));
        }
        Ok(TimeGrid { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.edges.last().expect("non-empty grid")
    }

    /// 0-based bin of a time: the first edge at or above it, clamped to
    /// the last bin.
    pub fn bin_of(&self, t: f64) -> usize {
        self.edges.partition_point(|&e| e < t).min(self.edges.len() - 1)
    }

    pub fn bin_indices(&self, times: &[f64]) -> Vec<usize> {
        times.iter().map(|&t| self.bin_of(t)).collect()
    }

    /// Bin midpoints, with `τ_0 = 0`.
    pub fn midpoints(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.edges
            .iter()
            .map(|&e| {
                let m = 0.5 * (prev + e);
                prev = e;
                m
            })
            .collect()
    }

    /// Expected event time of a distribution over `T + 1` bins; the
    /// beyond-horizon mass sits at `τ_T`.
    pub fn expected_time(&self, probs: &[f64]) -> f64 {
        let mids = self.midpoints();
        let inside: f64 = probs.iter().zip(&mids).map(|(p, m)| p * m).sum();
        inside + probs.get(self.bins()).copied().unwrap_or(0.0) * self.horizon()
    }

    /// Survival at time `t` from per-bin values, linear between
    /// `(0, 1), (τ_1, Ŝ_1), …, (τ_T, Ŝ_T)` and flat after `τ_T`.
    pub fn interpolate(&self, survival: &[f64], t: f64) -> f64 {
        debug_assert_eq!(survival.len(), self.bins());
        if t <= 0.0 {
            return 1.0;
        }
        let k = self.edges.partition_point(|&e| e < t);
        if k >= self.bins() {
            return survival[self.bins() - 1];
        }
        let (t0, s0) = if k == 0 { (0.0, 1.0) } else { (self.edges[k - 1], survival[k - 1]) };
        let (t1, s1) = (self.edges[k], survival[k]);
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }
}

/// Edges at the empirical quantiles `1/T, …, T/T` of the uncensored
/// times (the order statistic at rank `⌈q·n⌉`). Coinciding edges are
/// merged, which lowers `T`.
pub fn build_time_grid(times: &[f64], events: &[bool], bins: usize) -> Result<TimeGrid> {
    if bins == 0 {
        return Err(Error::Usage("time grid needs at least one bin".into()));
    }
    let mut observed: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    if observed.is_empty() {
        return Err(Error::Usage("cannot build a time grid without uncensored events".into()));
    }
    observed.sort_by(f64::total_cmp);
    let n = observed.len();
    let mut edges: Vec<f64> = (1..=bins)
        .map(|k| {
            let rank = (k * n).div_ceil(bins).max(1);
            observed[rank - 1]
        })
        .collect();
    edges.dedup();
    if edges.len() < bins {
        log::warn!(
            "time grid collapsed from {bins} to {} bins because of tied event times",
            edges.len()
        );
    }
    TimeGrid::new(edges)
}
