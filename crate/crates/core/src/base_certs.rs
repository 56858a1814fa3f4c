//! Per-prediction base certificates of the form `Σ_d w_d·|x′_d − x_d|^p < η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::std_normal_quantile;

/// Cap applied to unbounded radii (exactly constant outputs, `q = 1`).
pub const DEFAULT_ETA_MAX: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceCert {
    pub weights: Vec<f64>,
    pub eta: f64,
    pub p: u8,
}

/// Certificate for binary inputs with separate costs for setting and
/// clearing bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityCert {
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub eta: f64,
}

/// Moments of the smoothed top-class score: `mu = E[g]`,
/// `zeta = E[(g − nu)²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedStats {
    pub mu: f64,
    pub zeta: f64,
    pub nu: f64,
}

impl SmoothedStats {
    /// Stats anchored at the mean, so `zeta` is the variance.
    pub fn centered(mu: f64, variance: f64) -> Self {
        SmoothedStats { mu, zeta: variance, nu: mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDomain {
    Continuous,
    Binary,
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("class probability {q} outside [0,1]")));
    }
    Ok(())
}

fn quantile_or_cap(q: f64) -> Result<f64> {
    if q >= 1.0 {
        Ok(f64::INFINITY)
    } else {
        std_normal_quantile(q)
    }
}

/// Anisotropic Gaussian certificate; `None` means abstain.
pub fn gaussian_cert(scales: &[f64], q: f64) -> Result<Option<InterfaceCert>> {
    check_q(q)?;
    if q <= 0.5 {
        return Ok(None);
    }
    if let Some(d) = scales.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Domain(format!("scale[{d}] = {} must be positive", scales[d])));
    }
    let r = quantile_or_cap(q)?;
    let weights = scales.iter().map(|&s| if s.is_infinite() { 0.0 } else { 1.0 / (s * s) }).collect();
    Ok(Some(InterfaceCert { weights, eta: r * r, p: 2 }))
}

/// Anisotropic uniform certificate; `None` means abstain.
pub fn uniform_cert(halfwidths: &[f64], q: f64) -> Result<Option<InterfaceCert>> {
    check_q(q)?;
    if q <= 0.5 {
        return Ok(None);
    }
    if let Some(d) = halfwidths.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Domain(format!("halfwidth[{d}] = {} must be positive", halfwidths[d])));
    }
    let weights = halfwidths.iter().map(|&l| if l.is_infinite() { 0.0 } else { 1.0 / l }).collect();
    Ok(Some(InterfaceCert { weights, eta: quantile_or_cap(q)?, p: 1 }))
}

/// Radius of the variance-constrained certificate, `ln(1 + (µ − ½)² / ζ)`.
///
/// With Monte Carlo bounds pass the lower bound on µ and the upper bound on
/// `E[(g − ν)²]`; this holds for any anchor ν.
pub fn variance_eta(mu: f64, zeta: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Stats(format!("mean score {mu} outside [0,1]")));
    }
    if !(zeta >= 0.0) {
        return Err(Error::Stats(format!("second moment {zeta} is negative")));
    }
    if mu <= 0.5 {
        return Ok(None);
    }
    if zeta == 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    let d = mu - 0.5;
    Ok(Some((d * d / zeta).ln_1p()))
}

/// Per-dimension cost of flipping a bit under flip probability θ.
pub fn bernoulli_weight(theta: f64) -> f64 {
    ((1.0 - theta).powi(2) / theta + theta.powi(2) / (1.0 - theta)).ln()
}

/// Cost of setting a zero bit.
pub fn sparsity_weight_plus(theta_plus: f64, theta_minus: f64) -> f64 {
    (theta_minus.powi(2) / (1.0 - theta_plus) + (1.0 - theta_minus).powi(2) / theta_plus).ln()
}

/// Cost of clearing a one bit.
pub fn sparsity_weight_minus(theta_plus: f64, theta_minus: f64) -> f64 {
    ((1.0 - theta_plus).powi(2) / theta_minus + theta_plus.powi(2) / (1.0 - theta_minus)).ln()
}

fn check_thetas(name: &str, thetas: &[f64]) -> Result<()> {
    match thetas.iter().position(|&t| !(t > 0.0 && t < 1.0)) {
        Some(d) => Err(Error::Domain(format!("{name}[{d}] = {} must lie in (0,1)", thetas[d]))),
        None => Ok(()),
    }
}

/// Variance-constrained certificate for Bernoulli flip smoothing (ℓ₀).
pub fn bernoulli_variance_cert(thetas: &[f64], stats: SmoothedStats) -> Result<Option<InterfaceCert>> {
    check_thetas("theta", thetas)?;
    Ok(variance_eta(stats.mu, stats.zeta)?.map(|eta| InterfaceCert {
        weights: thetas.iter().map(|&t| bernoulli_weight(t)).collect(),
        eta,
        p: 0,
    }))
}

/// Variance-constrained certificate for sparsity-aware smoothing.
pub fn sparsity_variance_cert(
    theta_plus: &[f64],
    theta_minus: &[f64],
    stats: SmoothedStats,
) -> Result<Option<SparsityCert>> {
    if theta_plus.len() != theta_minus.len() {
        return Err(Error::Shape("theta_plus and theta_minus lengths differ".into()));
    }
    check_thetas("theta_plus", theta_plus)?;
    check_thetas("theta_minus", theta_minus)?;
    Ok(variance_eta(stats.mu, stats.zeta)?.map(|eta| SparsityCert {
        w_plus: theta_plus.iter().zip(theta_minus).map(|(&a, &b)| sparsity_weight_plus(a, b)).collect(),
        w_minus: theta_plus.iter().zip(theta_minus).map(|(&a, &b)| sparsity_weight_minus(a, b)).collect(),
        eta,
    }))
}

/// Variance-constrained certificate for diagonal Gaussian smoothing with
/// exact statistics anchored at `nu`.
pub fn gaussian_variance_cert(scales: &[f64], stats: SmoothedStats) -> Result<Option<InterfaceCert>> {
    if let Some(d) = scales.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Domain(format!("scale[{d}] = {} must be positive", scales[d])));
    }
    let SmoothedStats { mu, zeta, nu } = stats;
    let offset = (mu - nu).powi(2);
    let variance = zeta - offset;
    if !(variance > 0.0) && !(zeta == 0.0 && mu == nu) {
        return Err(Error::Stats(format!("second moment {zeta} must exceed (mu - nu)^2 = {offset}")));
    }
    Ok(variance_eta(mu, variance.max(0.0))?.map(|eta| InterfaceCert {
        weights: scales.iter().map(|&s| if s.is_infinite() { 0.0 } else { 1.0 / (s * s) }).collect(),
        eta,
        p: 2,
    }))
}

impl InterfaceCert {
    /// `Σ_d w_d·|x′_d − x_d|^p`, with `0⁰ = 0`.
    pub fn cost(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x.iter().zip(x_prime))
            .map(|(&w, (&a, &b))| {
                let delta = (b - a).abs();
                if delta == 0.0 || w == 0.0 {
                    0.0
                } else {
                    // Same rounding as `robust_to_ball`, so the two agree at the edge.
                    match self.p {
                        0 => w,
                        p => w * delta.powi(p as i32),
                    }
                }
            })
            .sum()
    }

    /// Whether `x_prime` lies in the certified set around `x`.
    pub fn holds_at(&self, x: &[f64], x_prime: &[f64]) -> bool {
        self.cost(x, x_prime) < self.eta
    }

    /// Whether the whole perturbation ball of radius `eps` is certified.
    ///
    /// For `p ≥ 1`: `max_d w_d · ε^p < η`. For `p = 0` or binary inputs: the
    /// `⌊ε⌋` largest weights sum to less than `η`.
    pub fn robust_to_ball(&self, eps: f64, domain: InputDomain) -> bool {
        if eps == 0.0 {
            return self.eta > 0.0;
        }
        // An ℓ₀ budget spends one unit per changed dimension in either domain.
        if self.p == 0 || domain == InputDomain::Binary {
            return top_k_sum(&self.weights, eps.floor() as usize) < self.eta;
        }
        let w_max = self.weights.iter().copied().fold(0.0, f64::max);
        w_max * eps.powi(self.p as i32) < self.eta
    }

    pub fn with_eta_cap(mut self, eta_max: f64) -> Self {
        self.eta = self.eta.min(eta_max);
        self
    }
}

/// Sum of the `k` largest entries (all of them if `k` exceeds the length).
pub fn top_k_sum(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter().take(k).sum()
}

impl SparsityCert {
    pub fn cost(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        (0..x.len())
            .map(|d| match (x[d] == 1.0, x_prime[d] == 1.0) {
                (false, true) => self.w_plus[d],
                (true, false) => self.w_minus[d],
                _ => 0.0,
            })
            .sum()
    }

    pub fn holds_at(&self, x: &[f64], x_prime: &[f64]) -> bool {
        self.cost(x, x_prime) < self.eta
    }

    /// Robustness to every input with at most `eps_plus` set bits and
    /// `eps_minus` cleared bits relative to `x`.
    pub fn robust_to_ball(&self, x: &[f64], eps_plus: f64, eps_minus: f64) -> bool {
        let plus: Vec<f64> = (0..x.len()).filter(|&d| x[d] == 0.0).map(|d| self.w_plus[d]).collect();
        let minus: Vec<f64> = (0..x.len()).filter(|&d| x[d] == 1.0).map(|d| self.w_minus[d]).collect();
        top_k_sum(&plus, eps_plus.floor() as usize) + top_k_sum(&minus, eps_minus.floor() as usize) < self.eta
    }

    pub fn with_eta_cap(mut self, eta_max: f64) -> Self {
        self.eta = self.eta.min(eta_max);
        self
    }
}
