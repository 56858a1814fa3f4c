use crate::error::{Error, Result};

/// Average certifiable radius: the lower Riemann sum
/// `Σ_n ε_n·(ξ(ε_n) − ξ(ε_{n+1}))` with `ξ` taken as zero past the grid.
pub fn acr(eps: &[f64], xi: &[f64]) -> Result<f64> {
    if eps.len() != xi.len() {
        return Err(Error::Input(format!("{} budgets for {} accuracy values", eps.len(), xi.len())));
    }
    if eps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Input("budget grid must be strictly ascending".into()));
    }
    if eps.first().is_some_and(|&e| e != 0.0) {
        return Err(Error::Input("budget grid must start at 0".into()));
    }
    Ok((0..eps.len()).map(|n| eps[n] * (xi[n] - xi.get(n + 1).copied().unwrap_or(0.0))).sum())
}

/// `|L ∩ Z| / D_out` from per-prediction robustness and correctness flags.
pub fn naive_certified_accuracy(robust: &[bool], correct: &[bool]) -> f64 {
    if robust.is_empty() {
        return 0.0;
    }
    robust.iter().zip(correct).filter(|(&r, &c)| r && c).count() as f64 / robust.len() as f64
}

/// Accuracy when only the number `l` of robust predictions is known: assume
/// the adversary changes correct predictions first.
pub fn center_certified_accuracy(l: usize, n_correct: usize, d_out: usize) -> f64 {
    if d_out == 0 {
        return 0.0;
    }
    (n_correct + l).saturating_sub(d_out) as f64 / d_out as f64
}

/// `l(Z) / D_out` for a collective bound computed with the correct
/// predictions as targets.
pub fn collective_certified_accuracy(l_correct: usize, d_out: usize) -> f64 {
    if d_out == 0 {
        return 0.0;
    }
    l_correct as f64 / d_out as f64
}
