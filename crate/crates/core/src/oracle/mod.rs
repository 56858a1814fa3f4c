//! Brute-force ground truth on tiny binary inputs.
//!
//! Everything here enumerates `{0,1}^D` outright, so dimensions are capped and
//! exceeding a cap is a capacity error rather than a silent truncation.

mod harness;

pub use harness::{check_fixture, run_harness, Family, HarnessConfig, HarnessSummary, InstanceOutcome, Violation};

use std::ops::ControlFlow;

use crate::distributions::{check_binary, LocalizedScheme, Smoothing};
use crate::error::{Error, Result};
use crate::models::Model;

/// Largest input dimension for exact statistics and likelihood ratios.
pub const STATS_MAX_DIM: usize = 16;
/// Largest input dimension for the exhaustive attack.
pub const ATTACK_MAX_DIM: usize = 12;
/// Largest number of flips (per direction for split budgets) in an attack.
pub const ATTACK_MAX_BUDGET: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactStats {
    /// Smoothed prediction: the class with the larger expected score, ties to 0.
    pub label: usize,
    /// Expected score of `label`.
    pub mu: f64,
    /// `E[(g_label − ν)²]`.
    pub zeta: f64,
    pub nu: f64,
    /// Probability of each hard label under the noise.
    pub q: [f64; 2],
}

fn bits_of(z: usize, d: usize) -> Vec<f64> {
    (0..d).map(|i| ((z >> i) & 1) as f64).collect()
}

fn index_of(x: &[f64]) -> usize {
    x.iter().enumerate().map(|(i, &v)| usize::from(v == 1.0) << i).sum()
}

/// Class-1 scores of a model on every binary input, indexed by the bit
/// pattern (bit `d` of the index is `z_d`).
#[derive(Debug, Clone)]
pub struct ScoreTable {
    d_in: usize,
    d_out: usize,
    scores: Vec<f64>,
}

impl ScoreTable {
    pub fn new(model: &Model) -> Result<Self> {
        let (d_in, d_out) = (model.d_in(), model.d_out());
        if d_in > STATS_MAX_DIM {
            return Err(Error::Capacity(format!("exact enumeration supports D ≤ {STATS_MAX_DIM}, got {d_in}")));
        }
        let mut scores = vec![0.0; (1usize << d_in) * d_out];
        for (z, row) in scores.chunks_mut(d_out.max(1)).enumerate().take(1 << d_in) {
            model.class1_scores_into(&bits_of(z, d_in), row);
        }
        Ok(ScoreTable { d_in, d_out, scores })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    fn score(&self, z: usize, n: usize) -> f64 {
        self.scores[z * self.d_out + n]
    }

    /// Exact statistics of output `n` under the probability table `pmf`.
    /// `nu = None` centers the second moment at the mean.
    pub fn stats(&self, pmf: &[f64], n: usize, nu: Option<f64>) -> ExactStats {
        let mut mu1 = 0.0;
        let mut q = [0.0; 2];
        for (z, &p) in pmf.iter().enumerate() {
            let g = self.score(z, n);
            mu1 += p * g;
            q[usize::from(g > 0.5)] += p;
        }
        let label = usize::from(mu1 > 0.5);
        let mu = if label == 1 { mu1 } else { 1.0 - mu1 };
        let nu = nu.unwrap_or(mu);
        let zeta = pmf
            .iter()
            .enumerate()
            .map(|(z, &p)| {
                let g = self.score(z, n);
                let g = if label == 1 { g } else { 1.0 - g };
                p * (g - nu) * (g - nu)
            })
            .sum();
        ExactStats { label, mu, zeta, nu, q }
    }
}

/// `π_x(z)` for every `z`, indexed by bit pattern.
pub fn pmf_table(dist: &Smoothing, x: &[f64]) -> Result<Vec<f64>> {
    if !dist.is_discrete() {
        return Err(Error::Domain("exact enumeration needs a discrete distribution".into()));
    }
    if x.len() != dist.dim() {
        return Err(Error::Shape(format!("input has {} dims, distribution {}", x.len(), dist.dim())));
    }
    if x.len() > STATS_MAX_DIM {
        return Err(Error::Capacity(format!("exact enumeration supports D ≤ {STATS_MAX_DIM}, got {}", x.len())));
    }
    check_binary(x)?;
    let mut pmf = Vec::with_capacity(1 << x.len());
    pmf.push(1.0);
    for (d, &xd) in x.iter().enumerate() {
        let xd = xd == 1.0;
        let (m0, m1) = (dist.dim_mass(d, xd, false), dist.dim_mass(d, xd, true));
        let half = pmf.len();
        pmf.extend_from_within(..);
        pmf[..half].iter_mut().for_each(|p| *p *= m0);
        pmf[half..].iter_mut().for_each(|p| *p *= m1);
    }
    Ok(pmf)
}

/// Exact smoothed statistics of every output of `model` under one discrete
/// distribution centered at `x`.
pub fn exact_smoothed_stats(model: &Model, dist: &Smoothing, x: &[f64], nu: Option<f64>) -> Result<Vec<ExactStats>> {
    if model.d_in() != dist.dim() {
        return Err(Error::Shape("model and distribution dimensions differ".into()));
    }
    let pmf = pmf_table(dist, x)?;
    let table = ScoreTable::new(model)?;
    Ok((0..model.d_out()).map(|n| table.stats(&pmf, n, nu)).collect())
}

/// Expected likelihood ratio `Σ_z π_{x′}(z)² / π_x(z)`; `+∞` if `π_{x′}`
/// puts mass where `π_x` has none.
pub fn exact_likelihood_ratio(dist: &Smoothing, x: &[f64], x_pert: &[f64]) -> Result<f64> {
    let p = pmf_table(dist, x)?;
    let q = pmf_table(dist, x_pert)?;
    Ok(ratio_from_tables(&p, &q))
}

pub(crate) fn ratio_from_tables(p: &[f64], q: &[f64]) -> f64 {
    let mut rho = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b > 0.0 {
            if a == 0.0 {
                return f64::INFINITY;
            }
            rho += b * b / a;
        }
    }
    rho
}

/// Flip budget of an exhaustive attack on binary inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackBudget {
    /// At most this many flips in total.
    Total(usize),
    /// At most `plus` 0→1 flips and at most `minus` 1→0 flips.
    Split { plus: usize, minus: usize },
}

/// Visits combinations of `pool` of size `0..=k` in lexicographic order,
/// smaller sizes first.
fn for_each_subset<F>(pool: &[usize], k: usize, f: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    fn rec<F>(pool: &[usize], start: usize, size: usize, cur: &mut Vec<usize>, f: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        if cur.len() == size {
            return f(cur);
        }
        let need = size - cur.len();
        for i in start..=pool.len().saturating_sub(need) {
            if pool.len() < need {
                break;
            }
            cur.push(pool[i]);
            rec(pool, i + 1, size, cur, f)?;
            cur.pop();
        }
        ControlFlow::Continue(())
    }
    let mut cur = Vec::new();
    for size in 0..=k.min(pool.len()) {
        rec(pool, 0, size, &mut cur, f)?;
    }
    ControlFlow::Continue(())
}

/// Visits every flip set allowed by `budget` around binary `x`.
pub fn for_each_flip_set<F>(x: &[f64], budget: AttackBudget, mut f: F) -> Result<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    check_binary(x)?;
    if x.len() > ATTACK_MAX_DIM {
        return Err(Error::Capacity(format!("exhaustive attack supports D ≤ {ATTACK_MAX_DIM}, got {}", x.len())));
    }
    match budget {
        AttackBudget::Total(k) => {
            if k > ATTACK_MAX_BUDGET {
                return Err(Error::Capacity(format!(
                    "exhaustive attack supports budget ≤ {ATTACK_MAX_BUDGET}, got {k}"
                )));
            }
            let all: Vec<usize> = (0..x.len()).collect();
            let _ = for_each_subset(&all, k, &mut f);
        }
        AttackBudget::Split { plus, minus } => {
            if plus.max(minus) > ATTACK_MAX_BUDGET {
                return Err(Error::Capacity(format!(
                    "exhaustive attack supports split budgets ≤ {ATTACK_MAX_BUDGET}, got ({plus}, {minus})"
                )));
            }
            let zeros: Vec<usize> = (0..x.len()).filter(|&d| x[d] == 0.0).collect();
            let ones: Vec<usize> = (0..x.len()).filter(|&d| x[d] == 1.0).collect();
            let mut merged = Vec::new();
            let _ = for_each_subset(&zeros, plus, &mut |adds: &[usize]| {
                for_each_subset(&ones, minus, &mut |dels: &[usize]| {
                    merged.clear();
                    merged.extend_from_slice(adds);
                    merged.extend_from_slice(dels);
                    merged.sort_unstable();
                    f(&merged)
                })
            });
        }
    }
    Ok(())
}

/// Smoothed predictions of a localized scheme, evaluated exactly.
pub struct SchemeOracle<'a> {
    pub table: ScoreTable,
    scheme: &'a LocalizedScheme,
    subset_of: Vec<usize>,
}

impl<'a> SchemeOracle<'a> {
    pub fn new(model: &Model, scheme: &'a LocalizedScheme) -> Result<Self> {
        if scheme.num_outputs() != model.d_out() {
            return Err(Error::Shape("scheme and model output counts differ".into()));
        }
        if scheme.dists.iter().any(|d| d.dim() != model.d_in()) {
            return Err(Error::Shape("scheme and model input dimensions differ".into()));
        }
        Ok(SchemeOracle { table: ScoreTable::new(model)?, scheme, subset_of: scheme.subset_of_output() })
    }

    /// One probability table per output subset.
    pub fn pmfs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.scheme.dists.iter().map(|d| pmf_table(d, x)).collect()
    }

    pub fn stats(&self, pmfs: &[Vec<f64>], n: usize, nu: Option<f64>) -> ExactStats {
        self.table.stats(&pmfs[self.subset_of[n]], n, nu)
    }

    pub fn subset_of(&self, n: usize) -> usize {
        self.subset_of[n]
    }

    pub fn labels(&self, pmfs: &[Vec<f64>]) -> Vec<usize> {
        (0..self.subset_of.len()).map(|n| self.stats(pmfs, n, None).label).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Fewest targeted predictions left unchanged by any allowed perturbation.
    pub min_robust: usize,
    /// A flip set attaining the minimum (first in enumeration order).
    pub witness: Vec<usize>,
}

/// The true minimum number of targeted smoothed predictions that keep their
/// label under one perturbation from `budget`.
pub fn exhaustive_attack(
    model: &Model,
    scheme: &LocalizedScheme,
    x: &[f64],
    budget: AttackBudget,
    targeted: &[usize],
) -> Result<AttackResult> {
    let oracle = SchemeOracle::new(model, scheme)?;
    if let Some(&n) = targeted.iter().find(|&&n| n >= model.d_out()) {
        return Err(Error::Input(format!("targeted output {n} out of range")));
    }
    let clean = oracle.labels(&oracle.pmfs(x)?);
    let mut best = AttackResult { min_robust: targeted.len(), witness: Vec::new() };
    let mut err = None;
    let mut xp = x.to_vec();
    for_each_flip_set(x, budget, |flips| {
        xp.copy_from_slice(x);
        flips.iter().for_each(|&d| xp[d] = 1.0 - xp[d]);
        let pmfs = match oracle.pmfs(&xp) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        };
        let kept = targeted.iter().filter(|&&n| oracle.stats(&pmfs, n, None).label == clean[n]).count();
        if kept < best.min_robust {
            best = AttackResult { min_robust: kept, witness: flips.to_vec() };
        }
        if best.min_robust == 0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Convenience for tests and tools: the bit vector with the given index.
pub fn binary_input(index: usize, d: usize) -> Vec<f64> {
    bits_of(index, d)
}

/// Inverse of [`binary_input`].
pub fn binary_index(x: &[f64]) -> usize {
    index_of(x)
}
