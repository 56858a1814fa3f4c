//! Confidence bounds on smoothed statistics from finite samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::beta_quantile;

/// Index of the largest value; ties go to the smallest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Most frequent label in a vote histogram (`counts[label]`).
pub fn candidate_label(counts: &[u64]) -> Result<usize> {
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::Input("cannot pick a candidate from an empty vote batch".into()));
    }
    Ok(argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()))
}

/// Class with the largest mean softmax score.
pub fn candidate_from_scores(mean_scores: &[f64]) -> Result<usize> {
    if mean_scores.is_empty() {
        return Err(Error::Input("cannot pick a candidate from an empty score batch".into()));
    }
    Ok(argmax(mean_scores))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("significance {alpha} must lie in (0,1)")));
    }
    Ok(())
}

/// One-sided Clopper-Pearson lower confidence bound on a binomial proportion.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k > n {
        return Err(Error::Input(format!("{k} successes out of {n} trials")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    beta_quantile(k as f64, (n - k + 1) as f64, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Bonferroni,
    Holm,
}

/// Per-test significance levels controlling the family-wise error at `alpha`.
///
/// Holm assigns `α / (n + 1 − k)` to the test of rank `k` when tests are
/// sorted by descending count; equal counts keep their input order.
pub fn correction(alpha: f64, n_tests: usize, scheme: Correction, counts: Option<&[u64]>) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n_tests == 0 {
        return Err(Error::Input("correction needs at least one test".into()));
    }
    match scheme {
        Correction::Bonferroni => Ok(vec![alpha / n_tests as f64; n_tests]),
        Correction::Holm => {
            let counts = counts.ok_or_else(|| Error::Input("holm correction needs per-test counts".into()))?;
            if counts.len() != n_tests {
                return Err(Error::Input(format!("{} counts for {n_tests} tests", counts.len())));
            }
            let mut order: Vec<usize> = (0..n_tests).collect();
            order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
            let mut out = vec![0.0; n_tests];
            for (rank, &i) in order.iter().enumerate() {
                out[i] = alpha / (n_tests - rank) as f64;
            }
            Ok(out)
        }
    }
}

/// Simultaneous confidence band on a CDF evaluated at a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfBounds {
    pub thresholds: Vec<f64>,
    pub empirical: Vec<f64>,
    pub margin: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
}

/// `M` equally spaced thresholds covering `[0, 1]`.
pub fn default_thresholds(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

/// DKW margin `sqrt(ln(2/α) / (2N))`.
pub fn dkw_margin(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical CDF of `scores` at `thresholds`, widened by the DKW margin.
pub fn dkw_bounds(scores: &[f64], thresholds: &[f64], alpha: f64) -> Result<CdfBounds> {
    check_alpha(alpha)?;
    if scores.is_empty() {
        return Err(Error::Input("empty score batch".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Input(format!("score {s} outside [0,1]")));
    }
    if thresholds.is_empty() {
        return Err(Error::Input("empty threshold grid".into()));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1]))
        || !(0.0..=1.0).contains(&thresholds[0])
        || thresholds[thresholds.len() - 1] > 1.0
    {
        return Err(Error::Input("thresholds must be sorted within [0,1]".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let margin = dkw_margin(sorted.len(), alpha);
    let empirical: Vec<f64> = thresholds.iter().map(|&t| sorted.partition_point(|&s| s <= t) as f64 / n).collect();
    let lower = empirical.iter().map(|&f| (f - margin).clamp(0.0, 1.0)).collect();
    let upper = empirical.iter().map(|&f| (f + margin).clamp(0.0, 1.0)).collect();
    Ok(CdfBounds { thresholds: thresholds.to_vec(), empirical, margin, lower, upper, alpha })
}

impl CdfBounds {
    /// Band that is exactly a known CDF, for checking the moment bounds.
    pub fn exact(thresholds: Vec<f64>, cdf: Vec<f64>) -> Self {
        CdfBounds { empirical: cdf.clone(), lower: cdf.clone(), upper: cdf, thresholds, margin: 0.0, alpha: 0.0 }
    }
}

/// Lower bound on the mean of a `[0,1]`-valued variable whose CDF lies
/// below the band's upper envelope.
///
/// Integrates the survival function bin by bin, bounding `F(s)` on
/// `(τ_m, τ_{m+1}]` by `F̄(τ_{m+1})`.
pub fn mean_lower(b: &CdfBounds) -> f64 {
    let t = &b.thresholds;
    let f = &b.upper;
    let m = t.len();
    let mut mu = t[m - 1] - t[0] * f[0];
    for i in 0..m - 1 {
        mu -= (t[i + 1] - t[i]) * f[i + 1];
    }
    mu.clamp(0.0, 1.0)
}

/// Largest `(κ − ν)²` over `κ ∈ [lo, hi]`.
fn max_sq_dist(lo: f64, hi: f64, nu: f64) -> f64 {
    (lo - nu).powi(2).max((hi - nu).powi(2))
}

/// Upper bound on `E[(X − ν)²]` for a `[0,1]`-valued variable whose CDF lies
/// inside the band.
///
/// Each bin `[0, τ₁], (τ₁, τ₂], …, (τ_M, 1]` contributes its largest squared
/// distance `ξ_m` times its probability mass; after summation by parts every
/// `F(τ_m)` is replaced by whichever envelope maximizes the bound.
pub fn second_moment_upper(b: &CdfBounds, nu: f64) -> f64 {
    let t = &b.thresholds;
    let m = t.len();
    let mut xi = Vec::with_capacity(m + 1);
    xi.push(max_sq_dist(0.0, t[0], nu));
    for i in 0..m - 1 {
        xi.push(max_sq_dist(t[i], t[i + 1], nu));
    }
    xi.push(max_sq_dist(t[m - 1], 1.0, nu));
    let mut zeta = xi[m];
    for i in 0..m {
        let coeff = xi[i] - xi[i + 1];
        zeta += coeff * if coeff >= 0.0 { b.upper[i] } else { b.lower[i] };
    }
    zeta.max(0.0)
}

/// Abstain unless the lower confidence bound strictly exceeds one half.
pub fn abstain(lower_bound: f64) -> bool {
    lower_bound <= 0.5
}
