//! Randomized soundness harness.
//!
//! Each instance draws a toy model, a binary input, a (possibly localized)
//! Bernoulli or sparsity-aware scheme, a budget and a target set. Base
//! certificates come from exact statistics; every collective bound is then
//! compared against the exhaustive attack, and every certified perturbation
//! is checked against the exact likelihood ratio and the exact prediction.

use std::ops::ControlFlow;

use colcert_lp::MilpOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exhaustive_attack, for_each_flip_set, ratio_from_tables, AttackBudget, SchemeOracle};
use crate::base_certs::{
    bernoulli_variance_cert, sparsity_variance_cert, variance_eta, InputDomain, InterfaceCert, SmoothedStats,
    SparsityCert, DEFAULT_ETA_MAX,
};
use crate::collective::{
    build_problem, naive_count, sparsity_collective, Partitioning, Quantization, SolveMode, ThreatModel,
};
use crate::distributions::{BernoulliFlip, LocalizedScheme, Smoothing, SparsityAware};
use crate::error::{Error, Result};
use crate::models::{Layout, Model, SoftLogistic, WindowMajority};
use crate::numerics::{Law, RngStream, StreamReader};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_d_in: usize,
    pub max_d_out: usize,
    pub max_budget: usize,
    /// Bin counts checked for monotone refinement, coarse to fine.
    pub bins: Vec<usize>,
    /// Fault injection: every certified radius is multiplied by this factor
    /// before use. Anything above 1 should produce violations.
    pub eta_inflation: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            instances: 120,
            seed: 0,
            max_d_in: 12,
            max_d_out: 4,
            max_budget: 3,
            bins: vec![2, 8, 32],
            eta_inflation: 1.0,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_d_in < 2 || self.max_d_in > super::ATTACK_MAX_DIM {
            return Err(Error::Capacity(format!(
                "harness max_d_in must lie in 2..={}, got {}",
                super::ATTACK_MAX_DIM,
                self.max_d_in
            )));
        }
        if self.max_budget > super::ATTACK_MAX_BUDGET {
            return Err(Error::Capacity(format!(
                "harness max_budget must be at most {}, got {}",
                super::ATTACK_MAX_BUDGET,
                self.max_budget
            )));
        }
        if self.max_d_out == 0 {
            return Err(Error::Config("harness max_d_out must be positive".into()));
        }
        if self.bins.contains(&0) {
            return Err(Error::Config("bin counts must be positive".into()));
        }
        if !(self.eta_inflation > 0.0) || !self.eta_inflation.is_finite() {
            return Err(Error::Config("eta_inflation must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Sparsity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub family: Family,
    pub d_in: usize,
    pub d_out: usize,
    pub budget: (usize, usize),
    pub targeted: usize,
    pub truth: usize,
    pub naive: usize,
    pub relaxed: usize,
    pub exact: usize,
    /// `(bins, relaxed, exact)` for each refinement level.
    pub binned: Vec<(usize, usize, usize)>,
    pub perturbations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub instance: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessSummary {
    pub config: HarnessConfig,
    pub outcomes: Vec<InstanceOutcome>,
    pub violations: Vec<Violation>,
}

impl HarnessSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Draw(StreamReader);

impl Draw {
    fn unit(&mut self) -> f64 {
        self.0.next(Law::Uniform01)
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    /// Uniform integer in `lo..=hi`.
    fn int(&mut self, lo: usize, hi: usize) -> usize {
        (lo + (self.unit() * (hi - lo + 1) as f64) as usize).min(hi)
    }
    fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

struct Instance {
    family: Family,
    model: Model,
    scheme: LocalizedScheme,
    x: Vec<f64>,
    budget: AttackBudget,
    targeted: Vec<usize>,
    nu_at_mean: Vec<bool>,
    nu_fixed: Vec<f64>,
}

/// Thetas growing linearly with distance from `center`.
fn graded(layout: Layout, center: usize, lo: f64, hi: f64) -> Vec<f64> {
    let far = (0..layout.len()).map(|d| layout.distance(center, d)).max().unwrap_or(0).max(1) as f64;
    (0..layout.len()).map(|d| lo + (hi - lo) * layout.distance(center, d) as f64 / far).collect()
}

fn draw_instance(cfg: &HarnessConfig, index: usize) -> Result<Instance> {
    let mut r = Draw(RngStream::new(cfg.seed, index as u64).reader());
    let family = if index.is_multiple_of(2) { Family::Bernoulli } else { Family::Sparsity };
    // Every third instance of a family is structured: confident windows on a
    // near-constant input with masking noise, where outputs depend on
    // different inputs and the adversary has to split the budget.
    let structured = (index / 2).is_multiple_of(3);
    let d_in = r.int(if structured { 8 } else { 4 }.min(cfg.max_d_in), cfg.max_d_in);
    let d_out = r.int(if structured { 2 } else { 1 }.min(cfg.max_d_out), cfg.max_d_out);
    let layout = Layout::line(d_in);
    let centers: Vec<usize> = if structured || r.coin(0.5) {
        layout.spread_centers(d_out)
    } else {
        (0..d_out).map(|_| r.int(0, d_in - 1)).collect()
    };
    let model = if structured || r.coin(0.5) {
        let radius = if structured || r.coin(0.7) { 2 } else { 1 };
        Model::WindowMajority(WindowMajority { layout, radius, centers: centers.clone() })
    } else {
        let decay = r.range(0.3, 1.5);
        let scale = r.range(0.5, 2.5);
        let mut m = SoftLogistic::generate(layout, decay, centers.clone(), scale, cfg.seed ^ index as u64)?;
        // A strong bias makes confident outputs with large radii.
        for b in m.bias.iter_mut() {
            *b = if r.coin(0.5) { 1.0 } else { -1.0 } * r.range(1.0, 7.0);
        }
        Model::SoftLogistic(m)
    };
    // Mostly-one inputs give confident windows, so certificates survive a
    // few flips and the collective program has something to do.
    let density = if structured {
        1.0
    } else if r.coin(0.7) {
        0.9
    } else {
        0.5
    };
    let mut x: Vec<f64> = (0..d_in).map(|_| if r.coin(density) { 1.0 } else { 0.0 }).collect();
    if structured && r.coin(0.5) {
        x[r.int(0, d_in - 1)] = 0.0;
    }
    let localized = structured || r.coin(0.7);
    let scheme = match family {
        Family::Bernoulli => {
            if localized {
                let lo = if structured { r.range(0.02, 0.1) } else { r.range(0.01, 0.15) };
                let hi = if structured || r.coin(0.5) { 0.5 } else { r.range(lo, 0.5) };
                let dists = centers
                    .iter()
                    .map(|&c| BernoulliFlip::new(graded(layout, c, lo, hi)).map(Smoothing::Bernoulli))
                    .collect::<Result<Vec<_>>>()?;
                LocalizedScheme::new((0..d_out).map(|n| vec![n]).collect(), dists, d_out)?
            } else {
                let t = r.range(0.01, 0.25);
                LocalizedScheme::isotropic(Smoothing::Bernoulli(BernoulliFlip::new(vec![t; d_in])?), d_out)
            }
        }
        Family::Sparsity => {
            let tp = if structured { r.range(0.01, 0.05) } else { r.range(0.01, 0.2) };
            let tm_lo = if structured { r.range(0.02, 0.12) } else { r.range(0.05, 0.4) };
            let tm_hi = if structured { 0.5 } else { r.range(tm_lo, 0.7) };
            if localized {
                let dists = centers
                    .iter()
                    .map(|&c| {
                        SparsityAware::new(vec![tp; d_in], graded(layout, c, tm_lo, tm_hi)).map(Smoothing::Sparsity)
                    })
                    .collect::<Result<Vec<_>>>()?;
                LocalizedScheme::new((0..d_out).map(|n| vec![n]).collect(), dists, d_out)?
            } else {
                LocalizedScheme::isotropic(
                    Smoothing::Sparsity(SparsityAware::new(vec![tp; d_in], vec![tm_lo; d_in])?),
                    d_out,
                )
            }
        }
    };
    let low = usize::from(structured).min(cfg.max_budget);
    let budget = match family {
        Family::Bernoulli => AttackBudget::Total(r.int(low, cfg.max_budget)),
        Family::Sparsity => {
            AttackBudget::Split { plus: r.int(0, cfg.max_budget.min(1)), minus: r.int(low, cfg.max_budget) }
        }
    };
    let targeted = (0..d_out).filter(|_| structured || r.coin(0.8)).collect();
    let nu_at_mean = (0..d_out).map(|_| structured || r.coin(0.7)).collect();
    let nu_fixed = (0..d_out).map(|_| r.unit()).collect();
    Ok(Instance { family, model, scheme, x, budget, targeted, nu_at_mean, nu_fixed })
}

struct Bounds {
    naive: usize,
    relaxed: usize,
    exact: usize,
    binned: Vec<(usize, usize, usize)>,
}

/// Radius of output `n`'s certificate if it claims to cover `x′`.
type Certified = Box<dyn Fn(usize, &[f64]) -> Option<f64>>;

fn bernoulli_bounds(
    cfg: &HarnessConfig,
    inst: &Instance,
    stats: &[SmoothedStats],
    flag: &mut dyn FnMut(&str, String),
) -> Result<(Bounds, Certified)> {
    let AttackBudget::Total(k) = inst.budget else { unreachable!("bernoulli instances use total budgets") };
    let certs: Vec<Option<InterfaceCert>> = stats
        .iter()
        .enumerate()
        .map(|(n, &st)| {
            let Smoothing::Bernoulli(b) = inst.scheme.dist_for_output(n) else { unreachable!() };
            let c = bernoulli_variance_cert(&b.thetas, st)?;
            Ok(c.map(|c| InterfaceCert { eta: c.eta.min(DEFAULT_ETA_MAX) * cfg.eta_inflation, ..c }))
        })
        .collect::<Result<_>>()?;
    let threat = ThreatModel::new(0, k as f64, InputDomain::Binary)?;
    let opts = MilpOptions::default();
    let solve = |part: Partitioning, mode| -> Result<usize> {
        build_problem(&certs, &threat, &part, &inst.targeted, f64::INFINITY)?.solve(mode, &opts)
    };
    let shared = |q| Partitioning::sharing_inputs(&certs, inst.scheme.subsets.clone(), q);
    let relaxed = solve(shared(Quantization::Unique), SolveMode::Relaxed)?;
    let exact = solve(shared(Quantization::Unique), SolveMode::Exact)?;
    let flat = solve(Partitioning::trivial(inst.x.len(), certs.len()), SolveMode::Exact)?;
    if flat != exact {
        flag("reduction", format!("shared-subset exact bound {exact} differs from unreduced bound {flat}"));
    }
    let mut binned = Vec::new();
    for &b in &cfg.bins {
        binned.push((
            b,
            solve(shared(Quantization::Bins(b)), SolveMode::Relaxed)?,
            solve(shared(Quantization::Bins(b)), SolveMode::Exact)?,
        ));
    }
    let naive = naive_count(&certs, &threat, &inst.targeted);
    let x = inst.x.clone();
    let certified: Certified = Box::new(move |n, xp| certs[n].as_ref().filter(|c| c.holds_at(&x, xp)).map(|c| c.eta));
    Ok((Bounds { naive, relaxed, exact, binned }, certified))
}

fn sparsity_bounds(cfg: &HarnessConfig, inst: &Instance, stats: &[SmoothedStats]) -> Result<(Bounds, Certified)> {
    let AttackBudget::Split { plus, minus } = inst.budget else { unreachable!("sparsity instances use split budgets") };
    let certs: Vec<Option<SparsityCert>> = stats
        .iter()
        .enumerate()
        .map(|(n, &st)| {
            let Smoothing::Sparsity(s) = inst.scheme.dist_for_output(n) else { unreachable!() };
            let c = sparsity_variance_cert(&s.theta_plus, &s.theta_minus, st)?;
            Ok(c.map(|c| SparsityCert { eta: c.eta.min(DEFAULT_ETA_MAX) * cfg.eta_inflation, ..c }))
        })
        .collect::<Result<_>>()?;
    let (ep, em) = (plus as f64, minus as f64);
    let naive = inst
        .targeted
        .iter()
        .filter(|&&n| certs[n].as_ref().is_some_and(|c| c.eta > 0.0 && c.robust_to_ball(&inst.x, ep, em)))
        .count();
    let opts = MilpOptions::default();
    let relaxed = sparsity_collective(&certs, &inst.x, ep, em, &inst.targeted, SolveMode::Relaxed, &opts)?;
    let exact = sparsity_collective(&certs, &inst.x, ep, em, &inst.targeted, SolveMode::Exact, &opts)?;
    let x = inst.x.clone();
    let certified: Certified = Box::new(move |n, xp| certs[n].as_ref().filter(|c| c.holds_at(&x, xp)).map(|c| c.eta));
    Ok((Bounds { naive, relaxed, exact, binned: Vec::new() }, certified))
}

fn run_instance(cfg: &HarnessConfig, index: usize) -> Result<(InstanceOutcome, Vec<Violation>)> {
    check_instance(cfg, index, draw_instance(cfg, index)?)
}

/// Runs every harness check on one caller-supplied discrete fixture, with
/// all outputs targeted and second moments anchored at the mean. Bernoulli
/// schemes take `AttackBudget::Total`, sparsity-aware ones `Split`.
pub fn check_fixture(
    cfg: &HarnessConfig,
    index: usize,
    model: &Model,
    scheme: &LocalizedScheme,
    x: &[f64],
    budget: AttackBudget,
) -> Result<(InstanceOutcome, Vec<Violation>)> {
    let family = match (scheme.dists.first(), budget) {
        (Some(Smoothing::Bernoulli(_)), AttackBudget::Total(_)) => Family::Bernoulli,
        (Some(Smoothing::Sparsity(_)), AttackBudget::Split { .. }) => Family::Sparsity,
        _ => {
            return Err(Error::Config(
                "fixture checks need bernoulli noise with a total budget or sparsity noise with a split budget".into(),
            ))
        }
    };
    if scheme.dists.iter().any(|d| std::mem::discriminant(d) != std::mem::discriminant(&scheme.dists[0])) {
        return Err(Error::Config("fixture scheme mixes distribution families".into()));
    }
    let d_out = model.d_out();
    let inst = Instance {
        family,
        model: model.clone(),
        scheme: scheme.clone(),
        x: x.to_vec(),
        budget,
        targeted: (0..d_out).collect(),
        nu_at_mean: vec![true; d_out],
        nu_fixed: vec![0.0; d_out],
    };
    check_instance(cfg, index, inst)
}

fn check_instance(cfg: &HarnessConfig, index: usize, inst: Instance) -> Result<(InstanceOutcome, Vec<Violation>)> {
    let oracle = SchemeOracle::new(&inst.model, &inst.scheme)?;
    let d_out = inst.model.d_out();
    let pmfs_x = oracle.pmfs(&inst.x)?;
    let exact_stats: Vec<_> = (0..d_out)
        .map(|n| oracle.stats(&pmfs_x, n, if inst.nu_at_mean[n] { None } else { Some(inst.nu_fixed[n]) }))
        .collect();
    let stats: Vec<SmoothedStats> =
        exact_stats.iter().map(|s| SmoothedStats { mu: s.mu, zeta: s.zeta, nu: s.nu }).collect();
    // Radii straight from the oracle statistics, independent of the
    // certificate constructors and of any fault injection.
    let oracle_eta: Vec<Option<f64>> = exact_stats
        .iter()
        .map(|s| Ok(variance_eta(s.mu, s.zeta)?.map(|e| e.min(DEFAULT_ETA_MAX))))
        .collect::<Result<_>>()?;
    let clean: Vec<usize> = exact_stats.iter().map(|s| s.label).collect();

    let mut violations = Vec::new();
    let mut flag = |kind: &str, detail: String| {
        violations.push(Violation { instance: index, kind: kind.to_string(), detail });
    };

    let (bounds, certified) = match inst.family {
        Family::Bernoulli => bernoulli_bounds(cfg, &inst, &stats, &mut flag)?,
        Family::Sparsity => sparsity_bounds(cfg, &inst, &stats)?,
    };
    let truth = exhaustive_attack(&inst.model, &inst.scheme, &inst.x, inst.budget, &inst.targeted)?.min_robust;

    let Bounds { naive, relaxed, exact, ref binned } = bounds;
    for (name, v) in [("naive", naive), ("relaxed", relaxed), ("exact", exact)] {
        if v > truth {
            flag("soundness", format!("{name} bound {v} exceeds the attack truth {truth}"));
        }
    }
    if !(naive <= relaxed && relaxed <= exact && exact <= inst.targeted.len()) {
        flag("ordering", format!("naive {naive}, relaxed {relaxed}, exact {exact}, |T| {}", inst.targeted.len()));
    }
    for w in binned.windows(2) {
        if w[1].1 < w[0].1 || w[1].2 < w[0].2 {
            flag("refinement", format!("bins {} -> {} decreased a bound: {:?} -> {:?}", w[0].0, w[1].0, w[0], w[1]));
        }
    }
    for &(b, r, e) in binned {
        if r > relaxed || e > exact || e > truth || r > e {
            flag("quantization", format!("{b} bins gave relaxed {r}, exact {e}; unquantized {relaxed}, {exact}"));
        }
    }

    // Every certified perturbation must keep the exact prediction and must
    // satisfy the likelihood-ratio condition with the exact radius.
    let mut perturbations = 0;
    let mut xp = inst.x.clone();
    let mut err = None;
    for_each_flip_set(&inst.x, inst.budget, |flips| {
        perturbations += 1;
        xp.copy_from_slice(&inst.x);
        flips.iter().for_each(|&d| xp[d] = 1.0 - xp[d]);
        let pmfs = match oracle.pmfs(&xp) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e);
                return ControlFlow::Break(());
            }
        };
        for n in 0..d_out {
            let Some(eta) = certified(n, &xp) else { continue };
            let label = oracle.stats(&pmfs, n, None).label;
            if label != clean[n] {
                flag(
                    "prediction",
                    format!("output {n} certified at flips {flips:?} (η = {eta}) but its label changed"),
                );
            }
            let rho = ratio_from_tables(&pmfs_x[oracle.subset_of(n)], &pmfs[oracle.subset_of(n)]);
            let limit = oracle_eta[n].unwrap_or(0.0);
            if rho.ln() >= limit * (1.0 + 1e-9) + 1e-12 {
                flag(
                    "likelihood_ratio",
                    format!("output {n} certified at flips {flips:?} but ln ρ = {} ≥ exact radius {limit}", rho.ln()),
                );
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }

    let budget = match inst.budget {
        AttackBudget::Total(k) => (k, 0),
        AttackBudget::Split { plus, minus } => (plus, minus),
    };
    let outcome = InstanceOutcome {
        index,
        family: inst.family,
        d_in: inst.x.len(),
        d_out,
        budget,
        targeted: inst.targeted.len(),
        truth,
        naive,
        relaxed,
        exact,
        binned: binned.clone(),
        perturbations,
    };
    Ok((outcome, violations))
}

/// Runs every instance (in parallel) and collects outcomes in index order.
pub fn run_harness(cfg: &HarnessConfig) -> Result<HarnessSummary> {
    cfg.validate()?;
    let results: Vec<_> = (0..cfg.instances).into_par_iter().map(|i| run_instance(cfg, i)).collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for r in results {
        let (o, v) = r?;
        outcomes.push(o);
        violations.extend(v);
    }
    Ok(HarnessSummary { config: cfg.clone(), outcomes, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_harness_passes_and_is_deterministic() {
        let cfg = HarnessConfig { instances: 16, max_d_in: 8, ..HarnessConfig::default() };
        let a = run_harness(&cfg).unwrap();
        assert!(a.passed(), "{:?}", a.violations);
        assert_eq!(a.outcomes.len(), 16);
        assert!(a.outcomes.iter().any(|o| o.family == Family::Sparsity));
        assert_eq!(a, run_harness(&cfg).unwrap());
    }

    #[test]
    fn inflated_radii_are_caught() {
        let cfg = HarnessConfig { instances: 40, max_d_in: 8, eta_inflation: 1.1, ..HarnessConfig::default() };
        let s = run_harness(&cfg).unwrap();
        assert!(!s.passed());
        assert!(s.violations.iter().any(|v| v.kind == "likelihood_ratio"));
    }

    #[test]
    fn zero_budget_passes_trivially() {
        let cfg = HarnessConfig { instances: 10, max_budget: 0, ..HarnessConfig::default() };
        let s = run_harness(&cfg).unwrap();
        assert!(s.passed());
        for o in &s.outcomes {
            assert_eq!(o.perturbations, 1);
        }
    }

    #[test]
    fn caps_are_checked() {
        assert!(matches!(
            run_harness(&HarnessConfig { max_d_in: 13, ..HarnessConfig::default() }),
            Err(Error::Capacity(_))
        ));
        assert!(run_harness(&HarnessConfig { eta_inflation: 0.0, ..HarnessConfig::default() }).is_err());
    }
}
