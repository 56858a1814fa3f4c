//! Collective certificates: how many predictions provably survive one shared
//! perturbation.
//!
//! Base certificates of the form `Σ_d w_d·|δ_d|^p < η` are combined into a
//! mixed-integer program in which the adversary distributes a single budget
//! over input dimensions. Outputs sharing a smoothing distribution, inputs
//! sharing a weight and radii falling into the same bin are merged before the
//! program is built, which keeps its size independent of the data dimension.

mod metrics;

pub use metrics::{acr, center_certified_accuracy, collective_certified_accuracy, naive_certified_accuracy};

use std::collections::BTreeMap;

use colcert_lp::{solve_lp, solve_milp, LinearProgram, MilpOptions, MixedProgram, RowSense};
use serde::{Deserialize, Serialize};

use crate::base_certs::{InputDomain, InterfaceCert, SparsityCert, DEFAULT_ETA_MAX};
use crate::distributions::check_partition;
use crate::error::{Error, Result};

/// Rows whose largest coefficient exceeds this are left out of the program
/// and counted as not robust: spending `1/COEFF_MAX` of one input unit
/// already breaks them, and the solver's absolute tolerances cannot
/// represent such rows faithfully. Integer budgets in exact mode are the
/// exception: there every coefficient is clamped to 1, which keeps the
/// integer solutions unchanged, so no row has to be dropped.
pub const COEFF_MAX: f64 = 1e9;

/// Slack added before flooring a program optimum, so round-off can never
/// certify an extra prediction.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreatModel {
    pub p: u8,
    pub eps: f64,
    pub domain: InputDomain,
}

impl ThreatModel {
    pub fn new(p: u8, eps: f64, domain: InputDomain) -> Result<Self> {
        let t = ThreatModel { p, eps, domain };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > 2 {
            return Err(Error::Config(format!("norm exponent p = {} not in {{0,1,2}}", self.p)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("budget {} must be finite and nonnegative", self.eps)));
        }
        if self.domain == InputDomain::Binary {
            if self.p != 0 {
                return Err(Error::Config("binary inputs require p = 0".into()));
            }
            if self.eps.fract() != 0.0 {
                return Err(Error::Config(format!("binary budget {} must be an integer", self.eps)));
            }
        }
        Ok(())
    }

    /// Right-hand side of the budget row: `ε` for `p = 0`, else `ε^p`.
    pub fn budget_cap(&self) -> f64 {
        if self.p == 0 {
            self.eps.floor()
        } else {
            self.eps.powi(self.p as i32)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    #[default]
    Relaxed,
    Exact,
}

/// How radii inside one output subset are grouped before solving.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantization {
    /// One group per distinct radius, using the radius itself as threshold.
    Unique,
    /// `n` equally spaced thresholds from just below the smallest radius up
    /// to the largest.
    Bins(usize),
    /// Explicit ascending thresholds per output subset.
    Thresholds(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning {
    pub output_subsets: Vec<Vec<usize>>,
    pub input_subsets: Vec<Vec<usize>>,
    pub quantization: Quantization,
}

impl Partitioning {
    /// No sharing at all: singleton subsets and unique radii.
    pub fn trivial(d_in: usize, d_out: usize) -> Self {
        Partitioning {
            output_subsets: (0..d_out).map(|n| vec![n]).collect(),
            input_subsets: (0..d_in).map(|d| vec![d]).collect(),
            quantization: Quantization::Unique,
        }
    }

    /// Given the output subsets, groups input dimensions whose weights agree
    /// for every output subset.
    pub fn sharing_inputs(
        certs: &[Option<InterfaceCert>],
        output_subsets: Vec<Vec<usize>>,
        quantization: Quantization,
    ) -> Self {
        let d_in = certs.iter().flatten().map(|c| c.weights.len()).next().unwrap_or(0);
        let reps: Vec<&InterfaceCert> =
            output_subsets.iter().filter_map(|k| k.iter().find_map(|&n| certs[n].as_ref())).collect();
        let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for d in 0..d_in {
            let key = reps.iter().map(|c| c.weights[d].to_bits()).collect();
            groups.entry(key).or_default().push(d);
        }
        let mut input_subsets: Vec<Vec<usize>> = groups.into_values().collect();
        input_subsets.sort_by_key(|j| j[0]);
        Partitioning { output_subsets, input_subsets, quantization }
    }
}

/// Predictions of one output subset whose radii map to the same threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusGroup {
    pub subset: usize,
    pub threshold: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveProblem {
    /// `reduced_weights[i][l]`: weight of input subset `l` for output subset `i`.
    pub reduced_weights: Vec<Vec<f64>>,
    pub groups: Vec<RadiusGroup>,
    pub budget: f64,
    /// Upper bound of each input-subset budget variable.
    pub input_caps: Vec<f64>,
    /// Budget variables are integral in the exact program (ℓ₀ threat).
    pub integer_budget: bool,
    pub precertified: usize,
    pub targeted: usize,
}

/// Largest threshold strictly below `eta`.
pub fn quantize_eta(thresholds: &[f64], eta: f64) -> Result<f64> {
    thresholds
        .iter()
        .copied()
        .filter(|&e| e < eta)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
        .ok_or_else(|| Error::Config(format!("radius {eta} is not above the smallest threshold")))
}

fn bin_thresholds(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    // Thresholds divide the program rows, so they must stay positive.
    let nudge = 1e-12 * lo.max(1.0);
    let lo = if lo > 2.0 * nudge { lo - nudge } else { lo / 2.0 };
    let span = hi - lo;
    (0..n).map(|j| lo + span * j as f64 / n as f64).collect()
}

fn weights_agree(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
}

/// Predictions in `targeted` whose certificate covers the whole ball.
pub fn precertified_set(certs: &[Option<InterfaceCert>], threat: &ThreatModel, targeted: &[usize]) -> Vec<usize> {
    targeted
        .iter()
        .copied()
        .filter(|&n| certs[n].as_ref().is_some_and(|c| c.robust_to_ball(threat.eps, threat.domain)))
        .collect()
}

/// The naive collective certificate: predictions that are individually
/// robust to the whole ball.
pub fn naive_count(certs: &[Option<InterfaceCert>], threat: &ThreatModel, targeted: &[usize]) -> usize {
    precertified_set(certs, threat, targeted).len()
}

fn check_targets(targeted: &[usize], d_out: usize) -> Result<()> {
    let mut seen = vec![false; d_out];
    for &n in targeted {
        if n >= d_out || std::mem::replace(&mut seen[n], true) {
            return Err(Error::Input(format!("targeted output {n} is out of range or repeated")));
        }
    }
    Ok(())
}

/// Builds the reduced collective program for the predictions in `targeted`.
///
/// Abstained predictions (`None`) and predictions with a zero radius are
/// never counted as robust. Radii are capped at `eta_max`.
pub fn build_problem(
    certs: &[Option<InterfaceCert>],
    threat: &ThreatModel,
    partitioning: &Partitioning,
    targeted: &[usize],
    eta_max: f64,
) -> Result<CollectiveProblem> {
    threat.validate()?;
    let d_out = certs.len();
    check_targets(targeted, d_out)?;
    check_partition(&partitioning.output_subsets, d_out, "output")?;
    let d_in = certs.iter().flatten().map(|c| c.weights.len()).next().unwrap_or(0);
    for (n, c) in certs.iter().enumerate() {
        if let Some(c) = c {
            if c.p != threat.p {
                return Err(Error::Config(format!("certificate {n} has p = {}, threat model p = {}", c.p, threat.p)));
            }
            if c.weights.len() != d_in {
                return Err(Error::Shape(format!("certificate {n} has {} weights, expected {d_in}", c.weights.len())));
            }
        }
    }
    if d_in > 0 {
        check_partition(&partitioning.input_subsets, d_in, "input")?;
    }

    let in_target = {
        let mut v = vec![false; d_out];
        targeted.iter().for_each(|&n| v[n] = true);
        v
    };
    let live = |n: usize| in_target[n] && certs[n].as_ref().is_some_and(|c| c.eta.min(eta_max) > 0.0);
    let targeted_live = (0..d_out).filter(|&n| live(n)).count();

    let mut precertified = 0;
    let mut reduced_weights = Vec::new();
    let mut groups = Vec::new();
    for (i, subset) in partitioning.output_subsets.iter().enumerate() {
        let members: Vec<usize> = subset.iter().copied().filter(|&n| live(n)).collect();
        let Some(&first) = members.first() else {
            reduced_weights.push(vec![0.0; partitioning.input_subsets.len()]);
            continue;
        };
        let w = &certs[first].as_ref().expect("live").weights;
        for &n in &members[1..] {
            if !weights_agree(w, &certs[n].as_ref().expect("live").weights) {
                return Err(Error::Config(format!(
                    "output subset {i}: outputs {first} and {n} have different weights and cannot share a distribution"
                )));
            }
        }
        let mut u = Vec::with_capacity(partitioning.input_subsets.len());
        for (l, j) in partitioning.input_subsets.iter().enumerate() {
            let w0 = w[j[0]];
            if j.iter().any(|&d| !weights_agree(&[w0], &[w[d]])) {
                return Err(Error::Config(format!(
                    "input subset {l}: weights differ within the subset for output subset {i}"
                )));
            }
            u.push(w0);
        }
        reduced_weights.push(u);

        let mut etas = Vec::new();
        for &n in &members {
            let c = certs[n].as_ref().expect("live");
            let capped = InterfaceCert { eta: c.eta.min(eta_max), ..c.clone() };
            if capped.robust_to_ball(threat.eps, threat.domain) {
                precertified += 1;
            } else {
                etas.push(capped.eta);
            }
        }
        if etas.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        let mut tally = |e: f64| *counts.entry(e.to_bits()).or_default() += 1;
        match &partitioning.quantization {
            Quantization::Unique => etas.iter().for_each(|&e| tally(e)),
            Quantization::Bins(nb) => {
                if *nb == 0 {
                    return Err(Error::Config("number of bins must be positive".into()));
                }
                let lo = etas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let thresholds = bin_thresholds(lo, hi, *nb);
                for &e in &etas {
                    tally(quantize_eta(&thresholds, e)?);
                }
            }
            Quantization::Thresholds(rows) => {
                let row =
                    rows.get(i).ok_or_else(|| Error::Config(format!("no thresholds given for output subset {i}")))?;
                if row.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config(format!("thresholds of output subset {i} are not ascending")));
                }
                for &e in &etas {
                    tally(quantize_eta(row, e).map_err(|_| {
                        Error::Config(format!("output subset {i}: radius {e} not above its smallest threshold"))
                    })?);
                }
            }
        }
        let u_max = reduced_weights[i].iter().copied().fold(0.0, f64::max);
        // Ascending f64 order for positive values coincides with bit order.
        for (bits, count) in counts {
            let threshold = f64::from_bits(bits);
            if threat.p == 0 || u_max / threshold <= COEFF_MAX {
                groups.push(RadiusGroup { subset: i, threshold, count });
            }
        }
    }

    let input_caps =
        partitioning.input_subsets.iter().map(|j| if threat.p == 0 { j.len() as f64 } else { f64::INFINITY }).collect();
    Ok(CollectiveProblem {
        reduced_weights,
        groups,
        budget: threat.budget_cap(),
        input_caps,
        integer_budget: threat.p == 0,
        precertified,
        targeted: targeted_live,
    })
}

impl CollectiveProblem {
    /// The program as a minimization: budget variables first, then one
    /// indicator per radius group.
    pub fn program(&self, mode: SolveMode) -> MixedProgram {
        let n_in = self.input_caps.len();
        let n_g = self.groups.len();
        let mut lp = LinearProgram::new(n_in + n_g);
        for (l, &cap) in self.input_caps.iter().enumerate() {
            lp.set_bounds(l, 0.0, cap);
        }
        // With integer budget variables, any coefficient of at least 1
        // already satisfies the row on its own.
        let clamp = mode == SolveMode::Exact && self.integer_budget;
        for (g, grp) in self.groups.iter().enumerate() {
            lp.set_bounds(n_in + g, 0.0, 1.0);
            let u_max = self.reduced_weights[grp.subset].iter().copied().fold(0.0, f64::max);
            if !clamp && u_max / grp.threshold > COEFF_MAX {
                // Left at zero: counted as not robust.
                continue;
            }
            lp.set_objective(n_in + g, grp.count as f64);
            let mut terms: Vec<(usize, f64)> = self.reduced_weights[grp.subset]
                .iter()
                .enumerate()
                .filter(|(_, &u)| u > 0.0)
                .map(|(l, &u)| (l, if clamp { (u / grp.threshold).min(1.0) } else { u / grp.threshold }))
                .collect();
            terms.push((n_in + g, 1.0));
            lp.add_sparse(&terms, RowSense::Ge, 1.0);
        }
        if n_in > 0 {
            lp.add_constraint(vec![1.0; n_in].into_iter().chain(vec![0.0; n_g]).collect(), RowSense::Le, self.budget);
        }
        let mut mp = MixedProgram::new(lp);
        if mode == SolveMode::Exact {
            for g in 0..n_g {
                mp.mark_binary(n_in + g);
            }
            if self.integer_budget {
                for l in 0..n_in {
                    mp.mark_integer(l);
                }
            }
        }
        mp
    }

    /// Lower bound on the number of targeted predictions that stay robust.
    pub fn solve(&self, mode: SolveMode, opts: &MilpOptions) -> Result<usize> {
        if self.groups.is_empty() {
            return Ok(self.precertified);
        }
        let mp = self.program(mode);
        let res = match mode {
            SolveMode::Relaxed => solve_lp(&mp.lp)?,
            SolveMode::Exact => solve_milp(&mp, opts)?,
        };
        if !res.is_optimal() {
            return Err(Error::Solver(format!("collective program reported {:?}", res.status)));
        }
        let extra = (res.objective + FLOOR_SLACK).floor().max(0.0) as usize;
        Ok((self.precertified + extra).min(self.targeted))
    }
}

/// Convenience wrapper: build and solve in one step.
pub fn solve_collective(
    certs: &[Option<InterfaceCert>],
    threat: &ThreatModel,
    partitioning: &Partitioning,
    targeted: &[usize],
    mode: SolveMode,
) -> Result<usize> {
    build_problem(certs, threat, partitioning, targeted, DEFAULT_ETA_MAX)?.solve(mode, &MilpOptions::default())
}

/// Collective certificate for sparsity-aware smoothing under separate
/// addition and deletion budgets.
pub fn sparsity_collective(
    certs: &[Option<SparsityCert>],
    x: &[f64],
    eps_plus: f64,
    eps_minus: f64,
    targeted: &[usize],
    mode: SolveMode,
    opts: &MilpOptions,
) -> Result<usize> {
    crate::distributions::check_binary(x)?;
    check_targets(targeted, certs.len())?;
    for (name, e) in [("addition", eps_plus), ("deletion", eps_minus)] {
        if !(e >= 0.0) || e.fract() != 0.0 {
            return Err(Error::Config(format!("{name} budget {e} must be a nonnegative integer")));
        }
    }
    let d = x.len();
    let mut precertified = 0;
    let mut targeted_live = 0;
    let mut live = Vec::new();
    for &n in targeted {
        let Some(c) = certs[n].as_ref() else { continue };
        if c.w_plus.len() != d || c.w_minus.len() != d {
            return Err(Error::Shape(format!("sparsity certificate {n} does not match input dimension {d}")));
        }
        let c = c.clone().with_eta_cap(DEFAULT_ETA_MAX);
        if !(c.eta > 0.0) {
            continue;
        }
        let reach =
            (0..d)
                .map(|j| if x[j] == 0.0 { c.w_plus[j] * eps_plus.min(1.0) } else { c.w_minus[j] * eps_minus.min(1.0) });
        if c.robust_to_ball(x, eps_plus, eps_minus) {
            precertified += 1;
            targeted_live += 1;
        } else if mode == SolveMode::Exact || reach.fold(0.0, f64::max) / c.eta <= COEFF_MAX {
            live.push(c);
            targeted_live += 1;
        } else {
            targeted_live += 1;
        }
    }
    if live.is_empty() {
        return Ok(precertified);
    }
    // One budget variable per dimension: additions where x is 0, deletions
    // where x is 1.
    let n_out = live.len();
    let mut lp = LinearProgram::new(d + n_out);
    for j in 0..d {
        lp.set_bounds(j, 0.0, 1.0);
    }
    for (k, c) in live.iter().enumerate() {
        lp.set_objective(d + k, 1.0);
        lp.set_bounds(d + k, 0.0, 1.0);
        let mut terms: Vec<(usize, f64)> = (0..d)
            .map(|j| (j, if x[j] == 0.0 { c.w_plus[j] } else { c.w_minus[j] } / c.eta))
            // Binary budget variables in exact mode: clamping keeps the
            // feasible set and avoids extreme coefficients.
            .map(|(j, a)| (j, if mode == SolveMode::Exact { a.min(1.0) } else { a }))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        terms.push((d + k, 1.0));
        lp.add_sparse(&terms, RowSense::Ge, 1.0);
    }
    let adds: Vec<(usize, f64)> = (0..d).filter(|&j| x[j] == 0.0).map(|j| (j, 1.0)).collect();
    let dels: Vec<(usize, f64)> = (0..d).filter(|&j| x[j] == 1.0).map(|j| (j, 1.0)).collect();
    lp.add_sparse(&adds, RowSense::Le, eps_plus);
    lp.add_sparse(&dels, RowSense::Le, eps_minus);
    let mut mp = MixedProgram::new(lp);
    let res = match mode {
        SolveMode::Relaxed => solve_lp(&mp.lp)?,
        SolveMode::Exact => {
            for j in 0..d + n_out {
                mp.mark_binary(j);
            }
            solve_milp(&mp, opts)?
        }
    };
    if !res.is_optimal() {
        return Err(Error::Solver(format!("sparsity program reported {:?}", res.status)));
    }
    let extra = (res.objective + FLOOR_SLACK).floor().max(0.0) as usize;
    Ok((precertified + extra).min(targeted_live))
}
