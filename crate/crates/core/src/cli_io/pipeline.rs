//! Sampling, per-prediction certificates and the collective bounds across
//! the budget grid.

use rayon::prelude::*;

use colcert_lp::MilpOptions;

use crate::base_certs::{
    bernoulli_variance_cert, gaussian_cert, sparsity_variance_cert, uniform_cert, variance_eta, InterfaceCert,
    SmoothedStats, SparsityCert, DEFAULT_ETA_MAX,
};
use crate::collective::{
    build_problem, collective_certified_accuracy, naive_count, sparsity_collective, Partitioning, Quantization,
    SolveMode, ThreatModel,
};
use crate::distributions::{
    cluster_affinity_ranking, cluster_sparsity_thetas, grid_gaussian_scales, grid_tiling, BernoulliFlip, GaussianDiag,
    LocalizedScheme, Smoothing, SparsityAware, UniformBox,
};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::monte_carlo::{
    candidate_from_scores, candidate_label, clopper_pearson_lower, correction, default_thresholds, dkw_bounds,
    mean_lower, second_moment_upper, Correction,
};
use crate::numerics::{Law, RngStream};

use super::config::{CertKind, NoiseFamily, ResolvedThreat, RunConfig, SchemeKind};
use super::report::{AcrSummary, BoundCounts, CertReport, CurvePoint, PredictionReport};
use super::samples::{SampleBatch, SampleSet};

/// Everything a run needs besides the samples.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub model: Model,
    pub scheme: LocalizedScheme,
    pub input: Vec<f64>,
    pub labels: Vec<usize>,
    pub threat: ResolvedThreat,
    pub cert_kind: CertKind,
}

/// Stream of sample `sample` of output subset `subset` in `phase`.
pub fn stream_id(phase: u8, subset: usize, sample: usize) -> u64 {
    (u64::from(phase) << 62) | ((subset as u64) << 40) | sample as u64
}

// Input bits come from a stream no sample can use (phase 0).
const INPUT_STREAM: u64 = 0;

fn per_dim(d_in: usize, v: f64) -> Vec<f64> {
    vec![v; d_in]
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(format!("smoothing: {other}")),
    }
}

/// One distribution from per-dimension values of the family's main
/// parameter; sparsity takes `theta_plus` as a constant.
fn family_dist(cfg: &RunConfig, values: Vec<f64>) -> Result<Smoothing> {
    let s = &cfg.smoothing;
    let d = values.len();
    Ok(match s.family {
        NoiseFamily::Gaussian => Smoothing::Gaussian(GaussianDiag::new(values)?),
        NoiseFamily::Uniform => Smoothing::Uniform(UniformBox::new(values)?),
        NoiseFamily::Bernoulli => Smoothing::Bernoulli(BernoulliFlip::new(values)?),
        NoiseFamily::Sparsity => {
            let plus = s.theta_plus.ok_or_else(|| Error::Config("smoothing.theta_plus: required".into()))?;
            Smoothing::Sparsity(SparsityAware::new(per_dim(d, plus), values)?)
        }
    })
}

pub fn build_scheme(cfg: &RunConfig, model: &Model) -> Result<LocalizedScheme> {
    let s = &cfg.smoothing;
    let (d_in, d_out) = (model.d_in(), model.d_out());
    let scheme = match s.scheme {
        SchemeKind::Isotropic => {
            let v = match s.family {
                NoiseFamily::Gaussian => s.sigma,
                NoiseFamily::Uniform => s.lambda,
                NoiseFamily::Bernoulli => s.theta,
                NoiseFamily::Sparsity => s.theta_minus,
            }
            .ok_or_else(|| Error::Config("smoothing: missing isotropic parameter".into()))?;
            LocalizedScheme::isotropic(family_dist(cfg, per_dim(d_in, v))?, d_out)
        }
        SchemeKind::Grid => {
            let layout = model.layout();
            let (h, w) = (s.grid_rows, s.grid_cols);
            let cells = grid_tiling(layout.rows, layout.cols, h, w)?;
            let (lo, hi) = cfg.param_range()?;
            let positions = model.output_positions();
            let mut subsets = Vec::new();
            let mut dists = Vec::new();
            for ci in 1..=h {
                for cj in 1..=w {
                    let outs: Vec<usize> = (0..d_out).filter(|&n| cells[positions[n]] == Some((ci, cj))).collect();
                    if outs.is_empty() {
                        continue;
                    }
                    let values = grid_gaussian_scales(h, w, lo, hi, (ci, cj), &cells)?;
                    subsets.push(outs);
                    dists.push(family_dist(cfg, values)?);
                }
            }
            LocalizedScheme::new(subsets, dists, d_out)?
        }
        SchemeKind::Cluster => {
            let ic = s.input_clusters.as_deref().unwrap_or_default();
            let oc = s.output_clusters.as_deref().unwrap_or_default();
            let ec = s.edge_counts.as_deref().unwrap_or_default();
            let (lo, hi) = cfg.param_range()?;
            let thetas = cluster_sparsity_thetas(&cluster_affinity_ranking(ec)?, lo, hi, ec.len())?;
            let mut subsets = Vec::new();
            let mut dists = Vec::new();
            for (c, row) in thetas.iter().enumerate() {
                let outs: Vec<usize> = (0..d_out).filter(|&n| oc[n] == c).collect();
                if outs.is_empty() {
                    continue;
                }
                subsets.push(outs);
                dists.push(family_dist(cfg, ic.iter().map(|&src| row[src]).collect())?);
            }
            LocalizedScheme::new(subsets, dists, d_out)?
        }
    };
    Ok(scheme)
}

impl Prepared {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model.build()?;
        let scheme = build_scheme(config, &model).map_err(config_err)?;
        let input = match &config.input.values {
            Some(v) => v.clone(),
            None => {
                let stream = RngStream::new(config.input.input_seed, INPUT_STREAM);
                (0..model.d_in())
                    .map(|d| f64::from(u8::from(stream.draw(Law::Uniform01, d as u64) < config.input.density)))
                    .collect()
            }
        };
        let labels = match &config.input.labels {
            Some(l) => l.clone(),
            None => model.predict(&input)?.iter().map(|p| p.label).collect(),
        };
        let threat = config.resolved_threat(model.d_in())?;
        let cert_kind = config.smoothing.cert_kind();
        Ok(Prepared { config: config.clone(), model, scheme, input, labels, threat, cert_kind })
    }

    fn phases(&self) -> Vec<(u8, usize)> {
        let mc = &self.config.monte_carlo;
        if mc.reuse {
            vec![(2, mc.n2)]
        } else {
            vec![(1, mc.n1), (2, mc.n2)]
        }
    }

    /// Draws every batch the run needs.
    pub fn draw_samples(&self) -> Result<SampleSet> {
        let seed = self.config.seed;
        let mut batches = Vec::new();
        for (i, (outputs, dist)) in self.scheme.subsets.iter().zip(&self.scheme.dists).enumerate() {
            for (phase, n) in self.phases() {
                let scores = (0..n)
                    .into_par_iter()
                    .map(|s| {
                        let z = dist.sample(&self.input, RngStream::new(seed, stream_id(phase, i, s)))?;
                        let all = self.model.class1_scores(&z)?;
                        Ok(outputs.iter().map(|&o| all[o]).collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                batches.push(SampleBatch { phase, subset: i, outputs: outputs.clone(), scores });
            }
        }
        Ok(SampleSet { batches })
    }

    fn check_samples(&self, samples: &SampleSet) -> Result<()> {
        for (i, outputs) in self.scheme.subsets.iter().enumerate() {
            for (phase, n) in self.phases() {
                let b = samples
                    .batch(phase, i)
                    .ok_or_else(|| Error::Input(format!("samples lack phase {phase} of output subset {i}")))?;
                if &b.outputs != outputs || b.scores.len() != n {
                    return Err(Error::Input(format!(
                        "samples for phase {phase} of output subset {i} do not match the configuration"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Certifies from the given samples and solves every budget of the grid.
    pub fn certify(&self, samples: &SampleSet) -> Result<CertReport> {
        self.check_samples(samples)?;
        let d_out = self.model.d_out();
        let mc = &self.config.monte_carlo;
        let select_phase = if mc.reuse { 2 } else { 1 };

        // Candidate, its phase-2 scores and the variance anchor per output.
        struct Pending {
            subset: usize,
            candidate: usize,
            est: Vec<f64>,
            nu: f64,
        }
        let mut pending: Vec<Option<Pending>> = (0..d_out).map(|_| None).collect();
        for (i, outputs) in self.scheme.subsets.iter().enumerate() {
            let sel = samples.batch(select_phase, i).expect("checked");
            let est = samples.batch(2, i).expect("checked");
            for (k, &n) in outputs.iter().enumerate() {
                let col = |b: &SampleBatch| b.scores.iter().map(|r| r[k]).collect::<Vec<f64>>();
                let sel_scores = col(sel);
                let candidate = match self.cert_kind {
                    CertKind::Variance => {
                        let m = sel_scores.iter().sum::<f64>() / sel_scores.len() as f64;
                        candidate_from_scores(&[1.0 - m, m])?
                    }
                    _ => {
                        let ones = sel_scores.iter().filter(|&&s| s > 0.5).count() as u64;
                        candidate_label(&[sel_scores.len() as u64 - ones, ones])?
                    }
                };
                let of_candidate = |s: f64| if candidate == 1 { s } else { 1.0 - s };
                let nu = (sel_scores.iter().map(|&s| of_candidate(s)).sum::<f64>() / sel_scores.len() as f64)
                    .clamp(0.0, 1.0);
                let est = col(est).into_iter().map(of_candidate).collect();
                pending[n] = Some(Pending { subset: i, candidate, est, nu });
            }
        }
        let pending: Vec<Pending> = pending.into_iter().map(|p| p.expect("partition covers outputs")).collect();

        let hits: Vec<u64> = pending.iter().map(|p| p.est.iter().filter(|&&s| s > 0.5).count() as u64).collect();
        let alphas =
            correction(mc.alpha, d_out, mc.correction, (mc.correction == Correction::Holm).then_some(hits.as_slice()))?;
        let thresholds = default_thresholds(mc.thresholds);

        let mut interface: Vec<Option<InterfaceCert>> = Vec::with_capacity(d_out);
        let mut sparsity: Vec<Option<SparsityCert>> = Vec::with_capacity(d_out);
        let mut lower_bounds = Vec::with_capacity(d_out);
        for (n, p) in pending.iter().enumerate() {
            let dist = &self.scheme.dists[p.subset];
            let lower = match self.cert_kind {
                CertKind::Variance => {
                    let band = dkw_bounds(&p.est, &thresholds, alphas[n])?;
                    let mu = mean_lower(&band);
                    let zeta = second_moment_upper(&band, p.nu);
                    let stats = SmoothedStats { mu, zeta, nu: p.nu };
                    match dist {
                        Smoothing::Bernoulli(b) => interface.push(bernoulli_variance_cert(&b.thetas, stats)?),
                        Smoothing::Sparsity(s) => {
                            sparsity.push(sparsity_variance_cert(&s.theta_plus, &s.theta_minus, stats)?)
                        }
                        Smoothing::Gaussian(g) => interface.push(variance_eta(mu, zeta)?.map(|eta| InterfaceCert {
                            weights:
                                g.scales.iter().map(|&s| if s.is_infinite() { 0.0 } else { 1.0 / (s * s) }).collect(),
                            eta,
                            p: 2,
                        })),
                        Smoothing::Uniform(_) => unreachable!("rejected by validation"),
                    }
                    mu
                }
                _ => {
                    let q = clopper_pearson_lower(hits[n], p.est.len() as u64, alphas[n])?;
                    interface.push(match dist {
                        Smoothing::Gaussian(g) => gaussian_cert(&g.scales, q)?,
                        Smoothing::Uniform(u) => uniform_cert(&u.halfwidths, q)?,
                        _ => unreachable!("rejected by validation"),
                    });
                    q
                }
            };
            lower_bounds.push(lower);
        }
        let interface: Vec<Option<InterfaceCert>> =
            interface.into_iter().map(|c| c.map(|c| c.with_eta_cap(DEFAULT_ETA_MAX))).collect();
        let sparsity: Vec<Option<SparsityCert>> =
            sparsity.into_iter().map(|c| c.map(|c| c.with_eta_cap(DEFAULT_ETA_MAX))).collect();
        let is_sparsity = self.config.smoothing.family == NoiseFamily::Sparsity;
        let abstained: Vec<bool> =
            (0..d_out).map(|n| if is_sparsity { sparsity[n].is_none() } else { interface[n].is_none() }).collect();
        let correct: Vec<usize> =
            (0..d_out).filter(|&n| !abstained[n] && pending[n].candidate == self.labels[n]).collect();
        let all: Vec<usize> = (0..d_out).collect();

        let eps = &self.threat.eps;
        let mode = self.config.mode;
        let quantization = match self.config.partitioning.bins {
            0 => Quantization::Unique,
            b => Quantization::Bins(b),
        };
        let opts = MilpOptions::default();
        let robust_at = |n: usize, e: f64| -> bool {
            if is_sparsity {
                sparsity[n].as_ref().is_some_and(|c| c.robust_to_ball(&self.input, self.threat.eps_plus, e))
            } else {
                interface[n].as_ref().is_some_and(|c| c.robust_to_ball(e, self.threat.domain))
            }
        };
        let solve = |e: f64, targets: &[usize], mode: SolveMode| -> Result<usize> {
            if is_sparsity {
                sparsity_collective(&sparsity, &self.input, self.threat.eps_plus, e, targets, mode, &opts)
            } else {
                let threat = ThreatModel::new(self.threat.p, e, self.threat.domain)?;
                let part = Partitioning::sharing_inputs(&interface, self.scheme.subsets.clone(), quantization.clone());
                build_problem(&interface, &threat, &part, targets, DEFAULT_ETA_MAX)?.solve(mode, &opts)
            }
        };
        let naive = |e: f64, targets: &[usize]| -> Result<usize> {
            if is_sparsity {
                Ok(targets.iter().filter(|&&n| robust_at(n, e)).count())
            } else {
                let threat = ThreatModel::new(self.threat.p, e, self.threat.domain)?;
                Ok(naive_count(&interface, &threat, targets))
            }
        };
        let abstain_rate = abstained.iter().filter(|&&a| a).count() as f64 / d_out as f64;
        let curve = eps
            .par_iter()
            .map(|&e| {
                let naive = BoundCounts { all: naive(e, &all)?, correct: naive(e, &correct)? };
                let relaxed = BoundCounts {
                    all: solve(e, &all, SolveMode::Relaxed)?,
                    correct: solve(e, &correct, SolveMode::Relaxed)?,
                };
                let exact = match mode {
                    SolveMode::Exact => Some(BoundCounts {
                        all: solve(e, &all, SolveMode::Exact)?,
                        correct: solve(e, &correct, SolveMode::Exact)?,
                    }),
                    SolveMode::Relaxed => None,
                };
                Ok(CurvePoint {
                    epsilon: e,
                    naive_certified_accuracy: collective_certified_accuracy(naive.correct, d_out),
                    relaxed_certified_accuracy: collective_certified_accuracy(relaxed.correct, d_out),
                    exact_certified_accuracy: exact.map(|b| collective_certified_accuracy(b.correct, d_out)),
                    abstain_rate,
                    naive,
                    relaxed,
                    exact,
                })
            })
            .collect::<Result<Vec<CurvePoint>>>()?;

        let predictions = (0..d_out)
            .map(|n| {
                let eta = if is_sparsity {
                    sparsity[n].as_ref().map(|c| c.eta)
                } else {
                    interface[n].as_ref().map(|c| c.eta)
                };
                PredictionReport {
                    output: n,
                    subset: pending[n].subset,
                    label: self.labels[n],
                    candidate: pending[n].candidate,
                    abstained: abstained[n],
                    correct: !abstained[n] && pending[n].candidate == self.labels[n],
                    lower_bound: lower_bounds[n],
                    alpha: alphas[n],
                    eta,
                    robust_through: eps.iter().copied().take_while(|&e| robust_at(n, e)).last(),
                }
            })
            .collect();
        let acr = AcrSummary::from_curve(eps, &curve)?;
        Ok(CertReport::new(self.config.clone(), self.input.clone(), predictions, curve, acr))
    }

    pub fn run(&self) -> Result<CertReport> {
        self.certify(&self.draw_samples()?)
    }
}

/// Samples, certifies and solves.
pub fn run_certify(config: &RunConfig) -> Result<CertReport> {
    Prepared::new(config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_config(extra: &str) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            r#"
seed = 3
[model]
kind = "window_majority"
cols = 12
radius = 2
outputs = 3
[input]
values = [1,1,1,1,1,1,1,1,1,1,1,1]
[smoothing]
family = "gaussian"
sigma = 0.25
[monte_carlo]
n1 = 50
n2 = 400
{extra}
"#
        ))
        .unwrap()
    }

    #[test]
    fn streams_do_not_collide() {
        assert_ne!(stream_id(1, 0, 5), stream_id(2, 0, 5));
        assert_ne!(stream_id(1, 1, 0), stream_id(1, 0, 1 << 20));
        assert_ne!(stream_id(1, 0, 0), INPUT_STREAM);
    }

    #[test]
    fn zero_budget_counts_correct_non_abstained() {
        let mut c = gaussian_config("");
        c.threat.eps = Some(vec![0.0]);
        let r = run_certify(&c).unwrap();
        let expected = r.predictions.iter().filter(|p| p.correct).count() as f64 / 3.0;
        assert_eq!(r.curve[0].naive_certified_accuracy, expected);
        assert_eq!(r.curve[0].relaxed_certified_accuracy, expected);
        assert!(expected > 0.0);
    }

    #[test]
    fn curves_are_ordered_and_monotone() {
        let mut c = gaussian_config("");
        c.mode = SolveMode::Exact;
        let r = run_certify(&c).unwrap();
        for p in &r.curve {
            let e = p.exact.unwrap();
            assert!(p.naive.all <= p.relaxed.all && p.relaxed.all <= e.all && e.all <= 3);
            assert!(p.naive.correct <= p.relaxed.correct && p.relaxed.correct <= e.correct);
        }
        assert!(r.curve.windows(2).all(|w| w[0].naive.all >= w[1].naive.all));
        assert_eq!(r.curve.last().unwrap().naive.all, 0);
    }

    #[test]
    fn one_by_one_grid_matches_isotropic() {
        let iso = run_certify(&gaussian_config("")).unwrap();
        let mut g = gaussian_config("");
        g.smoothing.scheme = SchemeKind::Grid;
        g.smoothing.sigma = None;
        g.smoothing.sigma_min = Some(0.25);
        g.smoothing.sigma_max = Some(4.0);
        let grid = run_certify(&g).unwrap();
        assert_eq!(iso.curve, grid.curve);
        assert_eq!(iso.predictions, grid.predictions);
    }

    #[test]
    fn cached_samples_reproduce_the_report() {
        let p = Prepared::new(&gaussian_config("")).unwrap();
        let samples = p.draw_samples().unwrap();
        let mut buf = Vec::new();
        samples.write_csv(&mut buf).unwrap();
        let back = SampleSet::read_csv(&buf[..]).unwrap();
        assert_eq!(p.certify(&back).unwrap(), p.certify(&samples).unwrap());
        let mut short = back.clone();
        short.batches[1].scores.pop();
        assert!(p.certify(&short).is_err());
    }

    #[test]
    fn reuse_draws_one_batch() {
        let mut c = gaussian_config("");
        c.monte_carlo.reuse = true;
        let p = Prepared::new(&c).unwrap();
        let s = p.draw_samples().unwrap();
        assert_eq!(s.batches.len(), 1);
        assert_eq!(s.batches[0].phase, 2);
        p.certify(&s).unwrap();
    }

    #[test]
    fn grid_scheme_groups_outputs_by_cell() {
        let mut g = gaussian_config("");
        g.smoothing.scheme = SchemeKind::Grid;
        g.smoothing.sigma = None;
        g.smoothing.sigma_min = Some(0.25);
        g.smoothing.sigma_max = Some(f64::INFINITY);
        g.smoothing.grid_cols = 3;
        let p = Prepared::new(&g).unwrap();
        assert_eq!(p.scheme.subsets, vec![vec![0], vec![1], vec![2]]);
        let Smoothing::Gaussian(d) = &p.scheme.dists[0] else { panic!() };
        assert_eq!(&d.scales[..4], &[0.25; 4]);
        assert!(d.scales[4..].iter().all(|s| s.is_infinite()));
        let r = p.run().unwrap();
        // Infinite noise elsewhere: inputs of other cells cost nothing.
        assert!(r.curve.iter().all(|c| c.relaxed.all >= c.naive.all));
    }

    #[test]
    fn discrete_cluster_scheme_runs() {
        let c = RunConfig::from_toml_str(
            r#"
[model]
kind = "window_majority"
cols = 8
radius = 1
outputs = 2
[input]
values = [1,1,1,1,1,1,1,1]
[smoothing]
family = "sparsity"
scheme = "cluster"
theta_plus = 0.05
theta_minus_min = 0.05
theta_minus_max = 0.5
input_clusters = [0,0,0,0,1,1,1,1]
output_clusters = [0,1]
edge_counts = [[10,1],[1,10]]
[monte_carlo]
n1 = 50
n2 = 500
[threat]
eps_max = 4
"#,
        )
        .unwrap();
        let p = Prepared::new(&c).unwrap();
        assert_eq!(p.scheme.subsets.len(), 2);
        let r = p.run().unwrap();
        assert_eq!(r.curve.len(), 5);
        assert!(r.curve.iter().all(|c| c.naive.all <= c.relaxed.all));
    }
}
