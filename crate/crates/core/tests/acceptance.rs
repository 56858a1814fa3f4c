//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

#[path = "../../lp/tests/support/mod.rs"]
mod lp_support;

use std::ops::ControlFlow;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use colcert::base_certs::{
    bernoulli_variance_cert, bernoulli_weight, gaussian_cert, sparsity_weight_minus, sparsity_weight_plus, InputDomain,
    InterfaceCert, SmoothedStats,
};
use colcert::cli_io::{run_certify, NoiseFamily, Prepared, RunConfig, SchemeKind};
use colcert::collective::{
    acr, center_certified_accuracy, collective_certified_accuracy, naive_certified_accuracy, naive_count,
    solve_collective, Partitioning, Quantization, SolveMode, ThreatModel,
};
use colcert::distributions::{BernoulliFlip, LocalizedScheme, Smoothing, SparsityAware};
use colcert::models::{Layout, Model, SoftLogistic, WindowMajority};
use colcert::monte_carlo::{
    clopper_pearson_lower, correction, default_thresholds, dkw_bounds, mean_lower, second_moment_upper, Correction,
};
use colcert::numerics::{Law, RngStream, StreamReader};
use colcert::oracle::{
    exact_likelihood_ratio, exact_smoothed_stats, exhaustive_attack, for_each_flip_set, run_harness, AttackBudget,
    Family, HarnessConfig, SchemeOracle,
};
use colcert_lp::{solve_lp, solve_milp, MilpOptions, Status};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Draw(StreamReader);

impl Draw {
    fn new(seed: u64, stream: u64) -> Self {
        Draw(RngStream::new(seed, stream).reader())
    }
    fn unit(&mut self) -> f64 {
        self.0.next(Law::Uniform01)
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    fn int(&mut self, lo: usize, hi: usize) -> usize {
        (lo + (self.unit() * (hi - lo + 1) as f64) as usize).min(hi)
    }
    fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }
    fn bits(&mut self, d: usize, density: f64) -> Vec<f64> {
        (0..d).map(|_| if self.coin(density) { 1.0 } else { 0.0 }).collect()
    }
}

/// Standard normal CDF by composite Simpson integration of the density.
fn phi_by_quadrature(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t / 2.0).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn quantile_by_bisection(q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 6.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if phi_by_quadrature(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn isotropic_gaussian_radius() -> Outcome {
    let sigmas: Vec<f64> = (1..=20).map(|i| i as f64 / 10.0).collect();
    let qs: Vec<f64> = (51..=99).map(|i| i as f64 / 100.0).collect();
    let mut worst: f64 = 0.0;
    for &q in &qs {
        let z = quantile_by_bisection(q);
        for &sigma in &sigmas {
            let cert = gaussian_cert(&[sigma; 3], q).map_err(|e| e.to_string())?.ok_or("abstained above 1/2")?;
            let w = cert.weights[0];
            let oracle = sigma * z;
            let radius = (cert.eta / w).sqrt();
            worst = worst.max((radius - oracle).abs());
            ensure((radius - oracle).abs() <= 1e-9, || format!("sigma {sigma}, q {q}: radius {radius} vs {oracle}"))?;
            let robust = |e: f64| cert.robust_to_ball(e, InputDomain::Continuous);
            ensure(robust(oracle - 1e-9) && !robust(oracle + 1e-9), || format!("sigma {sigma}, q {q}: ball check"))?;
            // The smallest float at which the certificate's own cost reaches η
            // must be excluded and its predecessor included.
            let mut edge = radius;
            while w * (edge * edge) < cert.eta {
                edge = edge.next_up();
            }
            while w * (edge.next_down() * edge.next_down()) >= cert.eta {
                edge = edge.next_down();
            }
            ensure(!robust(edge) && robust(edge.next_down()), || format!("sigma {sigma}, q {q}: boundary at {edge}"))?;
            let x = [0.0; 3];
            ensure(!cert.holds_at(&x, &[edge, 0.0, 0.0]) && cert.holds_at(&x, &[edge.next_down(), 0.0, 0.0]), || {
                format!("sigma {sigma}, q {q}: pointwise boundary")
            })?;
        }
    }
    ensure(gaussian_cert(&[1.0], 0.5).map_err(|e| e.to_string())?.is_none(), || "q = 1/2 must abstain".into())?;
    Ok(format!("{} (sigma, q) pairs, max radius error {worst:.1e}", sigmas.len() * qs.len()))
}

fn soundness_and_ordering() -> (Outcome, Outcome) {
    let start = Instant::now();
    let summary = match run_harness(&HarnessConfig::default()) {
        Ok(s) => s,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let secs = start.elapsed().as_secs_f64();
    let n = summary.outcomes.len();
    let bern = summary.outcomes.iter().filter(|o| o.family == Family::Bernoulli).count();
    let beats = summary.outcomes.iter().filter(|o| o.exact > o.naive).count();
    let unsound: Vec<_> = summary
        .violations
        .iter()
        .filter(|v| matches!(v.kind.as_str(), "soundness" | "likelihood_ratio" | "prediction" | "reduction"))
        .collect();
    let mut soundness = Ok(format!(
        "{n} instances ({bern} bernoulli, {} sparsity), 0 violations, exact > naive on {beats}, {secs:.1}s",
        n - bern
    ));
    for o in &summary.outcomes {
        let bounds = [o.naive, o.relaxed, o.exact].into_iter().chain(o.binned.iter().flat_map(|b| [b.1, b.2]));
        if bounds.clone().any(|b| b > o.truth) {
            soundness = Err(format!("instance {}: a bound exceeds the truth {}", o.index, o.truth));
        }
    }
    if n < 100 || bern == 0 || bern == n {
        soundness = Err(format!("only {n} instances ({bern} bernoulli)"));
    } else if let Some(v) = unsound.first() {
        soundness =
            Err(format!("{} violations, first [{}] instance {}: {}", unsound.len(), v.kind, v.instance, v.detail));
    } else if secs > 300.0 {
        soundness = Err(format!("took {secs:.0}s"));
    }
    let mut ordering = Ok(format!("{n} instances, bins {:?}", summary.config.bins));
    for o in &summary.outcomes {
        if !(o.naive <= o.relaxed && o.relaxed <= o.exact && o.exact <= o.targeted) {
            ordering = Err(format!(
                "instance {}: naive {} relaxed {} exact {} |T| {}",
                o.index, o.naive, o.relaxed, o.exact, o.targeted
            ));
        }
        if o.binned.windows(2).any(|w| w[1].1 < w[0].1 || w[1].2 < w[0].2) {
            ordering = Err(format!("instance {}: refinement decreased a bound {:?}", o.index, o.binned));
        }
    }
    if let Some(v) =
        summary.violations.iter().find(|v| matches!(v.kind.as_str(), "ordering" | "refinement" | "quantization"))
    {
        ordering = Err(format!("[{}] instance {}: {}", v.kind, v.instance, v.detail));
    }
    (soundness, ordering)
}

fn random_run_config(r: &mut Draw) -> RunConfig {
    let family =
        [NoiseFamily::Gaussian, NoiseFamily::Uniform, NoiseFamily::Bernoulli, NoiseFamily::Sparsity][r.int(0, 3)];
    let rows = r.int(1, 3);
    let cols = r.int(4, 8);
    let outputs = r.int(1, 4);
    let model = if r.coin(0.5) {
        format!(
            "kind = \"window_majority\"\nrows = {rows}\ncols = {cols}\nradius = {}\noutputs = {outputs}",
            r.int(1, 2)
        )
    } else {
        format!(
            "kind = \"soft_logistic\"\nrows = {rows}\ncols = {cols}\noutputs = {outputs}\ndecay = {}\nbias = {}\nweight_seed = {}",
            r.range(0.3, 1.5),
            r.range(-1.0, 3.0),
            r.int(0, 1000)
        )
    };
    let smoothing = match family {
        NoiseFamily::Gaussian => format!("family = \"gaussian\"\nsigma = {}", r.range(0.1, 1.0)),
        NoiseFamily::Uniform => format!("family = \"uniform\"\nlambda = {}", r.range(0.2, 1.5)),
        NoiseFamily::Bernoulli => format!("family = \"bernoulli\"\ntheta = {}", r.range(0.02, 0.3)),
        NoiseFamily::Sparsity => {
            format!("family = \"sparsity\"\ntheta_plus = {}\ntheta_minus = {}", r.range(0.01, 0.1), r.range(0.02, 0.3))
        }
    };
    let holm = !family.is_discrete() && r.coin(0.5);
    let text = format!(
        "seed = {}\n[model]\n{model}\n[input]\ndensity = 0.8\ninput_seed = {}\n[smoothing]\n{smoothing}\n[monte_carlo]\nn1 = 50\nn2 = {}\nalpha = {}\ncorrection = \"{}\"\nreuse = {}\n",
        r.int(0, 1 << 20),
        r.int(0, 1 << 20),
        r.int(200, 500),
        [0.001, 0.01, 0.05][r.int(0, 2)],
        if holm { "holm" } else { "bonferroni" },
        r.coin(0.3),
    );
    RunConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("generated config invalid: {e}\n{text}"))
}

fn one_by_one(cfg: &RunConfig) -> RunConfig {
    let mut g = cfg.clone();
    let s = &mut g.smoothing;
    s.scheme = SchemeKind::Grid;
    s.grid_rows = 1;
    s.grid_cols = 1;
    match s.family {
        NoiseFamily::Gaussian => (s.sigma_min, s.sigma_max) = (s.sigma.take(), Some(5.0)),
        NoiseFamily::Uniform => (s.lambda_min, s.lambda_max) = (s.lambda.take(), Some(5.0)),
        NoiseFamily::Bernoulli => (s.theta_min, s.theta_max) = (s.theta.take(), Some(0.5)),
        NoiseFamily::Sparsity => (s.theta_minus_min, s.theta_minus_max) = (s.theta_minus.take(), Some(0.5)),
    }
    g
}

fn single_cell_grid() -> Outcome {
    let mut r = Draw::new(404, 0);
    let mut certified = 0;
    for case in 0..20 {
        let iso_cfg = random_run_config(&mut r);
        let grid_cfg = one_by_one(&iso_cfg);
        let iso = run_certify(&iso_cfg).map_err(|e| format!("case {case}: {e}"))?;
        let grid = run_certify(&grid_cfg).map_err(|e| format!("case {case}: {e}"))?;
        ensure(iso.curve == grid.curve, || format!("case {case}: curves differ"))?;
        ensure(iso.predictions == grid.predictions, || format!("case {case}: predictions differ"))?;
        for p in &grid.curve {
            ensure(p.relaxed == p.naive, || {
                format!("case {case}, eps {}: localized {:?} vs naive {:?}", p.epsilon, p.relaxed, p.naive)
            })?;
        }
        certified += iso.curve.first().map_or(0, |c| c.naive.all);
    }
    ensure(certified > 0, || "no configuration certified anything".into())?;
    Ok(format!("20 configs identical, {certified} predictions certified at budget 0"))
}

fn masked_local_certificate() -> Outcome {
    let mut r = Draw::new(505, 0);
    let mut separated = 0;
    let mut cases = 0;
    for case in 0..30 {
        let d = r.int(6, 12);
        let d_out = r.int(2, 4);
        let layout = Layout::line(d);
        let centers: Vec<usize> = (0..d_out).map(|_| r.int(0, d - 1)).collect();
        let model = Model::WindowMajority(WindowMajority { layout, radius: r.int(1, 2), centers });
        let theta_in = r.range(0.03, 0.25);
        let fields: Vec<Vec<bool>> = (0..d_out).map(|n| model.receptive_field(n).expect("strictly local")).collect();
        let dists = fields
            .iter()
            .map(|f| {
                let t = f.iter().map(|&inside| if inside { theta_in } else { 0.5 }).collect();
                BernoulliFlip::new(t).map(Smoothing::Bernoulli)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let scheme =
            LocalizedScheme::new((0..d_out).map(|n| vec![n]).collect(), dists, d_out).map_err(|e| e.to_string())?;
        let x = r.bits(d, 0.85);
        let k = r.int(1, 3);
        let oracle = SchemeOracle::new(&model, &scheme).map_err(|e| e.to_string())?;
        let pmfs = oracle.pmfs(&x).map_err(|e| e.to_string())?;
        let certs: Vec<Option<InterfaceCert>> = (0..d_out)
            .map(|n| {
                let s = oracle.stats(&pmfs, n, None);
                bernoulli_variance_cert(
                    &scheme
                        .subsets
                        .iter()
                        .zip(&scheme.dists)
                        .find(|(k, _)| k.contains(&n))
                        .map(|(_, dist)| match dist {
                            Smoothing::Bernoulli(b) => b.thetas.clone(),
                            _ => unreachable!(),
                        })
                        .expect("covered"),
                    SmoothedStats { mu: s.mu, zeta: s.zeta, nu: s.nu },
                )
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (n, c) in certs.iter().enumerate() {
            let Some(c) = c else { continue };
            let expected = |inside: bool| if inside { bernoulli_weight(theta_in) } else { 0.0 };
            ensure(c.weights.iter().zip(&fields[n]).all(|(&w, &inside)| w == expected(inside)), || {
                format!("case {case}: output {n} weights {:?} do not follow its receptive field", c.weights)
            })?;
        }
        let targets: Vec<usize> = (0..d_out).collect();
        let threat = ThreatModel::new(0, k as f64, InputDomain::Binary).map_err(|e| e.to_string())?;
        let part = Partitioning::sharing_inputs(&certs, scheme.subsets.clone(), Quantization::Unique);
        let collective =
            solve_collective(&certs, &threat, &part, &targets, SolveMode::Exact).map_err(|e| e.to_string())?;

        // Masked certificate: output n survives a flip set iff the flips
        // inside its receptive field cost less than its radius.
        let w_in = bernoulli_weight(theta_in);
        let mut masked = usize::MAX;
        let mut locality_ok = true;
        for_each_flip_set(&x, AttackBudget::Total(k), |flips| {
            let mut xp = x.clone();
            flips.iter().for_each(|&i| xp[i] = 1.0 - xp[i]);
            let full = model.predict(&xp).expect("shape");
            let survivors = (0..d_out)
                .filter(|&n| {
                    let masked_pred = model.masked_eval(&x, &xp, &fields[n]).expect("shape");
                    locality_ok &= masked_pred[n] == full[n];
                    let inside = flips.iter().filter(|&&i| fields[n][i]).count();
                    certs[n].as_ref().is_some_and(|c| inside as f64 * w_in < c.eta)
                })
                .count();
            masked = masked.min(survivors);
            ControlFlow::Continue(())
        })
        .map_err(|e| e.to_string())?;
        ensure(locality_ok, || format!("case {case}: masking changed a strictly local prediction"))?;
        ensure(collective == masked, || {
            format!("case {case}: collective {collective} vs masked certificate {masked}")
        })?;
        let truth =
            exhaustive_attack(&model, &scheme, &x, AttackBudget::Total(k), &targets).map_err(|e| e.to_string())?;
        ensure(collective <= truth.min_robust, || format!("case {case}: bound above truth"))?;
        let naive = naive_count(&certs, &threat, &targets);
        separated += usize::from(collective > naive);
        cases += 1;
    }
    Ok(format!("{cases} window-majority instances equal, collective > naive on {separated}"))
}

fn budget_separation() -> Outcome {
    let certs = vec![
        Some(InterfaceCert { weights: vec![1.0, 0.0], eta: 1.0, p: 1 }),
        Some(InterfaceCert { weights: vec![0.0, 1.0], eta: 1.0, p: 1 }),
    ];
    let threat = ThreatModel::new(1, 1.0, InputDomain::Continuous).map_err(|e| e.to_string())?;
    let part = Partitioning::trivial(2, 2);
    let naive = naive_count(&certs, &threat, &[0, 1]);
    let relaxed = solve_collective(&certs, &threat, &part, &[0, 1], SolveMode::Relaxed).map_err(|e| e.to_string())?;
    let exact = solve_collective(&certs, &threat, &part, &[0, 1], SolveMode::Exact).map_err(|e| e.to_string())?;
    ensure(naive == 0 && relaxed == 1 && exact == 1, || format!("naive {naive}, relaxed {relaxed}, exact {exact}"))?;
    Ok("naive 0, relaxed 1, exact 1".into())
}

fn random_discrete(r: &mut Draw, d: usize) -> Smoothing {
    if r.coin(0.5) {
        Smoothing::Bernoulli(BernoulliFlip::new((0..d).map(|_| r.range(0.01, 0.99)).collect()).expect("open interval"))
    } else {
        let plus = (0..d).map(|_| r.range(0.01, 0.99)).collect();
        let minus = (0..d).map(|_| r.range(0.01, 0.99)).collect();
        Smoothing::Sparsity(SparsityAware::new(plus, minus).expect("open interval"))
    }
}

fn variance_identities() -> Outcome {
    let mut r = Draw::new(606, 0);
    let mut worst: f64 = 0.0;
    for case in 0..400 {
        let d = r.int(1, 10);
        let dist = random_discrete(&mut r, d);
        let x = r.bits(d, 0.5);
        let xp = r.bits(d, 0.5);
        let oracle = exact_likelihood_ratio(&dist, &x, &xp).map_err(|e| e.to_string())?;
        let (mut closed, mut via_weights) = (1.0, 0.0);
        for i in (0..d).filter(|&i| x[i] != xp[i]) {
            let (factor, weight) = match &dist {
                Smoothing::Bernoulli(b) => {
                    let t = b.thetas[i];
                    ((1.0 - t).powi(2) / t + t * t / (1.0 - t), bernoulli_weight(t))
                }
                Smoothing::Sparsity(s) => {
                    let (p, m) = (s.theta_plus[i], s.theta_minus[i]);
                    if x[i] == 0.0 {
                        (m * m / (1.0 - p) + (1.0 - m).powi(2) / p, sparsity_weight_plus(p, m))
                    } else {
                        ((1.0 - p).powi(2) / m + p * p / (1.0 - m), sparsity_weight_minus(p, m))
                    }
                }
                _ => unreachable!(),
            };
            closed *= factor;
            via_weights += weight;
        }
        for (name, v) in [("closed form", closed), ("certificate weights", via_weights.exp())] {
            let rel = (v - oracle).abs() / oracle;
            worst = worst.max(rel);
            ensure(rel <= 1e-10, || format!("case {case}: {name} {v} vs enumeration {oracle}"))?;
        }
    }
    let mut min_rho = f64::INFINITY;
    for case in 0..1000 {
        let d = r.int(1, 10);
        let dist = random_discrete(&mut r, d);
        let x = r.bits(d, 0.5);
        let xp = if r.coin(0.2) { x.clone() } else { r.bits(d, 0.5) };
        let rho = exact_likelihood_ratio(&dist, &x, &xp).map_err(|e| e.to_string())?;
        min_rho = min_rho.min(rho);
        // ρ = 1 exactly when x′ = x; allow rounding of the 2^D-term sum.
        ensure(rho >= 1.0 - 1e-12, || format!("case {case}: likelihood ratio {rho} < 1"))?;
    }
    for case in 0..1000 {
        let d = r.int(2, 10);
        let layout = Layout::line(d);
        let d_out = r.int(1, 3);
        let centers = layout.spread_centers(d_out);
        let model = if r.coin(0.5) {
            Model::WindowMajority(WindowMajority { layout, radius: r.int(0, 2), centers })
        } else {
            Model::SoftLogistic(
                SoftLogistic::generate(layout, r.range(0.3, 1.5), centers, r.range(0.5, 2.5), case)
                    .map_err(|e| e.to_string())?,
            )
        };
        let dist = random_discrete(&mut r, d);
        let x = r.bits(d, 0.6);
        let nu = r.unit();
        for s in exact_smoothed_stats(&model, &dist, &x, Some(nu)).map_err(|e| e.to_string())? {
            let offset = (s.mu - s.nu).powi(2);
            ensure(s.zeta >= offset - 1e-12 * s.zeta.max(1e-300).max(offset), || {
                format!("case {case}: zeta {} < (mu - nu)^2 = {offset}", s.zeta)
            })?;
        }
    }
    Ok(format!(
        "400 ratio identities (max rel err {worst:.1e}), rho >= 1 on 1000 (min {min_rho:.6}), zeta bound on 1000"
    ))
}

fn coverage_floor(alpha: f64, trials: usize) -> f64 {
    1.0 - alpha - 4.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt()
}

fn monte_carlo_coverage() -> Outcome {
    const TRIALS: usize = 10_000;
    let mut report = Vec::new();
    for (i, &(q, n, alpha)) in [(0.6, 100u64, 0.05), (0.9, 200, 0.01), (0.99, 50, 0.1)].iter().enumerate() {
        let mut r = Draw::new(707, i as u64);
        let mut covered = 0;
        for _ in 0..TRIALS {
            let k = (0..n).filter(|_| r.unit() < q).count() as u64;
            covered += usize::from(clopper_pearson_lower(k, n, alpha).map_err(|e| e.to_string())? <= q);
        }
        let rate = covered as f64 / TRIALS as f64;
        ensure(rate >= coverage_floor(alpha, TRIALS), || format!("Clopper-Pearson q {q}: coverage {rate}"))?;
        report.push(format!("CP {rate:.4}"));
    }
    // A known discrete law on [0, 1].
    let values = [0.0, 0.25, 0.6, 0.9, 1.0];
    let probs = [0.1, 0.2, 0.3, 0.25, 0.15];
    let mu: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
    let thresholds = default_thresholds(51);
    for (i, &(n, alpha, nu)) in [(100usize, 0.05, 0.5), (400, 0.01, 0.8), (50, 0.1, mu)].iter().enumerate() {
        let zeta: f64 = values.iter().zip(&probs).map(|(v, p)| p * (v - nu) * (v - nu)).sum();
        let mut r = Draw::new(708, i as u64);
        let mut covered = 0;
        for _ in 0..TRIALS {
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let u = r.unit();
                    let mut acc = 0.0;
                    values[probs
                        .iter()
                        .position(|&p| {
                            acc += p;
                            u < acc
                        })
                        .unwrap_or(values.len() - 1)]
                })
                .collect();
            let band = dkw_bounds(&scores, &thresholds, alpha).map_err(|e| e.to_string())?;
            covered += usize::from(mean_lower(&band) <= mu && second_moment_upper(&band, nu) >= zeta);
        }
        let rate = covered as f64 / TRIALS as f64;
        ensure(rate >= coverage_floor(alpha, TRIALS), || format!("DKW n {n}: coverage {rate}"))?;
        report.push(format!("DKW {rate:.4}"));
    }
    let mut r = Draw::new(709, 0);
    for case in 0..1000 {
        let tests = r.int(1, 20);
        let counts: Vec<u64> = (0..tests).map(|_| r.int(0, 50) as u64).collect();
        let alpha = r.range(0.001, 0.2);
        let holm = correction(alpha, tests, Correction::Holm, Some(&counts)).map_err(|e| e.to_string())?;
        let bonf = correction(alpha, tests, Correction::Bonferroni, None).map_err(|e| e.to_string())?;
        ensure(holm.iter().zip(&bonf).all(|(h, b)| h >= b), || format!("case {case}: holm below bonferroni"))?;
    }
    Ok(format!("{}; holm >= bonferroni on 1000", report.join(", ")))
}

fn lp_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut feasible = 0;
    for case in 0..200 {
        let n = 1 + (case % 6);
        let m = case % 7;
        let lp = lp_support::random_program(&mut rng, n, m);
        let got = solve_lp(&lp).map_err(|e| format!("case {case}: {e}"))?;
        match lp_support::vertex_oracle(&lp) {
            None => ensure(got.status == Status::Infeasible, || format!("LP case {case}: expected infeasible"))?,
            Some(best) => {
                feasible += 1;
                ensure(
                    got.status == Status::Optimal && (got.objective - best).abs() <= 1e-8 * (1.0 + best.abs()),
                    || format!("LP case {case}: {} vs vertex optimum {best}", got.objective),
                )?;
            }
        }
    }
    for seed in 0..100 {
        let mp = lp_support::random_binary_program(seed);
        let got = solve_milp(&mp, &MilpOptions::default()).map_err(|e| format!("MILP {seed}: {e}"))?;
        match lp_support::enumerate_binary(&mp) {
            None => ensure(got.status == Status::Infeasible, || format!("MILP {seed}: expected infeasible"))?,
            Some(best) => ensure(
                got.status == Status::Optimal && (got.objective - best).abs() <= 1e-8 * (1.0 + best.abs()),
                || format!("MILP {seed}: {} vs enumeration {best}", got.objective),
            )?,
        }
    }
    Ok(format!("200 LPs ({feasible} feasible), 100 binary programs"))
}

fn metrics() -> Outcome {
    let a = acr(&[0.0, 1.0, 2.0], &[0.8, 0.5, 0.0]).map_err(|e| e.to_string())?;
    ensure(a == 0.5, || format!("ACR {a}"))?;
    // Six predictions: robust {0,1,2,4}, correct {0,2,3,4,5}.
    let robust = [true, true, true, false, true, false];
    let correct = [true, false, true, true, true, true];
    let naive = naive_certified_accuracy(&robust, &correct);
    ensure(naive == 3.0 / 6.0, || format!("naive {naive}"))?;
    // Only the count of 4 robust predictions is known: the adversary
    // spends its 2 non-robust changes on correct ones, leaving 5 - 2 = 3.
    let center = center_certified_accuracy(4, 5, 6);
    ensure(center == 3.0 / 6.0, || format!("center {center}"))?;
    ensure(center_certified_accuracy(1, 3, 6) == 0.0, || "center floor".into())?;
    let collective = collective_certified_accuracy(4, 6);
    ensure(collective == 4.0 / 6.0, || format!("collective {collective}"))?;
    Ok("ACR 0.5, three accuracy formulas".into())
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut names = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let Ok(cfg) = RunConfig::load(&path) else { continue };
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let (a, b) = (tmp.path().join(format!("{name}_a")), tmp.path().join(format!("{name}_b")));
        run_certify(&cfg).and_then(|r| r.write_to(&a)).map_err(|e| format!("{name}: {e}"))?;
        let p = Prepared::new(&cfg).map_err(|e| e.to_string())?;
        p.run().and_then(|r| r.write_to(&b)).map_err(|e| format!("{name}: {e}"))?;
        for file in ["report.json", "curve.csv"] {
            let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
            ensure(x == y, || format!("{name}/{file} differs between runs"))?;
        }
        names.push(name);
    }
    ensure(names.len() >= 3, || format!("only {} configurations found", names.len()))?;
    names.sort();
    Ok(format!("byte-identical reports for {}", names.join(", ")))
}

fn run(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn main() -> ExitCode {
    let (soundness, ordering) = match catch_unwind(soundness_and_ordering) {
        Ok(pair) => pair,
        Err(_) => (Err("harness panicked".into()), Err("harness panicked".into())),
    };
    let results = [
        ("isotropic Gaussian radius", run(isotropic_gaussian_radius)),
        ("soundness harness", soundness),
        ("bound ordering and refinement", ordering),
        ("1x1 grid equals isotropic", run(single_cell_grid)),
        ("masking recovers strictly local certificate", run(masked_local_certificate)),
        ("budget-allocation separation", run(budget_separation)),
        ("variance-constrained identities", run(variance_identities)),
        ("Monte Carlo coverage", run(monte_carlo_coverage)),
        ("LP and MILP solver oracles", run(lp_solver)),
        ("metrics", run(metrics)),
        ("determinism", run(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
