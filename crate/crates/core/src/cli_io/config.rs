//! Run configuration: one TOML file with nested tables. Every field has a
//! default except the model and the smoothing family, and unknown keys are
//! rejected so a typo cannot silently change a certificate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base_certs::InputDomain;
use crate::collective::SolveMode;
use crate::error::{Error, Result};
use crate::models::{Layout, Model, SoftLogistic, WindowMajority};
use crate::monte_carlo::Correction;
use crate::oracle::HarnessConfig;

fn one() -> usize {
    1
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub input: InputConfig,
    pub smoothing: SmoothingConfig,
    #[serde(default)]
    pub threat: ThreatConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub partitioning: PartitioningConfig,
    #[serde(default)]
    pub oracle: HarnessConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    WindowMajority {
        #[serde(default = "one")]
        rows: usize,
        cols: usize,
        radius: usize,
        outputs: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        centers: Option<Vec<usize>>,
    },
    SoftLogistic {
        #[serde(default = "one")]
        rows: usize,
        cols: usize,
        outputs: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        centers: Option<Vec<usize>>,
        decay: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
        #[serde(default)]
        bias: f64,
        #[serde(default)]
        weight_seed: u64,
    },
    Constant {
        d_in: usize,
        outputs: usize,
        score: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        let centers_or = |layout: Layout, n: usize, c: &Option<Vec<usize>>| -> Result<Vec<usize>> {
            match c {
                Some(c) if c.len() != n => {
                    Err(Error::Config(format!("model.centers: {} entries for {n} outputs", c.len())))
                }
                Some(c) => Ok(c.clone()),
                None => Ok(layout.spread_centers(n)),
            }
        };
        let m = match self {
            ModelConfig::WindowMajority { rows, cols, radius, outputs, centers } => {
                let layout = Layout { rows: *rows, cols: *cols };
                Model::WindowMajority(WindowMajority {
                    layout,
                    radius: *radius,
                    centers: centers_or(layout, *outputs, centers)?,
                })
            }
            ModelConfig::SoftLogistic { rows, cols, outputs, centers, decay, scale, bias, weight_seed } => {
                let layout = Layout { rows: *rows, cols: *cols };
                let mut m = SoftLogistic::generate(
                    layout,
                    *decay,
                    centers_or(layout, *outputs, centers)?,
                    *scale,
                    *weight_seed,
                )
                .map_err(|e| Error::Config(format!("model: {e}")))?;
                m.bias.iter_mut().for_each(|b| *b = *bias);
                Model::SoftLogistic(m)
            }
            ModelConfig::Constant { d_in, outputs, score } => {
                Model::Constant { d_in: *d_in, d_out: *outputs, score: *score }
            }
        };
        if m.d_in() == 0 || m.d_out() == 0 {
            return Err(Error::Config("model: needs at least one input and one output".into()));
        }
        m.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Explicit input; drawn as random bits when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub density: f64,
    pub input_seed: u64,
    /// Ground-truth labels; the base model's clean prediction when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { values: None, density: 0.5, input_seed: 0, labels: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Uniform,
    Bernoulli,
    Sparsity,
}

impl NoiseFamily {
    pub fn is_discrete(self) -> bool {
        matches!(self, NoiseFamily::Bernoulli | NoiseFamily::Sparsity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    Isotropic,
    Grid,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    /// Probability certificates for Gaussian and uniform noise, variance
    /// certificates for discrete noise.
    #[default]
    Auto,
    /// Certify the majority label through its class probability.
    Probability,
    /// Certify the expected score through its mean and second moment.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub family: NoiseFamily,
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub certificate: CertKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_minus: Option<f64>,
    #[serde(default = "one")]
    pub grid_rows: usize,
    #[serde(default = "one")]
    pub grid_cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_minus_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_minus_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_clusters: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_clusters: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_counts: Option<Vec<Vec<f64>>>,
}

impl SmoothingConfig {
    pub fn new(family: NoiseFamily) -> Self {
        SmoothingConfig {
            family,
            scheme: SchemeKind::Isotropic,
            certificate: CertKind::Auto,
            sigma: None,
            lambda: None,
            theta: None,
            theta_plus: None,
            theta_minus: None,
            grid_rows: 1,
            grid_cols: 1,
            sigma_min: None,
            sigma_max: None,
            lambda_min: None,
            lambda_max: None,
            theta_min: None,
            theta_max: None,
            theta_minus_min: None,
            theta_minus_max: None,
            input_clusters: None,
            output_clusters: None,
            edge_counts: None,
        }
    }

    /// The certificate type actually used.
    pub fn cert_kind(&self) -> CertKind {
        match (self.certificate, self.family) {
            (CertKind::Auto, f) if f.is_discrete() => CertKind::Variance,
            (CertKind::Auto, _) => CertKind::Probability,
            (k, _) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreatConfig {
    /// Norm exponent; defaults to 2 for Gaussian, 1 for uniform, 0 for
    /// discrete noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<InputDomain>,
    /// Explicit ascending budget grid starting at 0. For sparsity-aware noise
    /// these are deletion budgets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_points: Option<usize>,
    /// Fixed addition budget for sparsity-aware noise.
    pub eps_plus: f64,
}

impl Default for ThreatConfig {
    fn default() -> Self {
        ThreatConfig { p: None, domain: None, eps: None, eps_max: None, eps_points: None, eps_plus: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub thresholds: usize,
    /// Draw only the second batch and use it for candidate selection too.
    pub reuse: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n1: 100,
            n2: 1000,
            alpha: 0.01,
            correction: Correction::Bonferroni,
            thresholds: 51,
            reuse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitioningConfig {
    /// Radius bins per output subset; 0 keeps every distinct radius.
    pub bins: usize,
}

/// Fully resolved threat settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedThreat {
    pub p: u8,
    pub domain: InputDomain,
    pub eps: Vec<f64>,
    pub eps_plus: f64,
}

fn cfg_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn need(v: Option<f64>, path: &str) -> Result<f64> {
    v.ok_or_else(|| cfg_err(path, "required by the selected family and scheme"))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        let s = &self.smoothing;
        let discrete = s.family.is_discrete();
        let kind = s.cert_kind();
        match (s.family, kind) {
            (NoiseFamily::Uniform, CertKind::Variance) => {
                return Err(cfg_err("smoothing.certificate", "uniform noise supports probability certificates only"))
            }
            (f, CertKind::Probability) if f.is_discrete() => {
                return Err(cfg_err("smoothing.certificate", "discrete noise supports variance certificates only"))
            }
            _ => {}
        }
        if s.scheme == SchemeKind::Cluster && !discrete {
            return Err(cfg_err("smoothing.scheme", "cluster schemes need bernoulli or sparsity noise"));
        }
        match s.scheme {
            SchemeKind::Isotropic => match s.family {
                NoiseFamily::Gaussian => {
                    need(s.sigma, "smoothing.sigma")?;
                }
                NoiseFamily::Uniform => {
                    need(s.lambda, "smoothing.lambda")?;
                }
                NoiseFamily::Bernoulli => {
                    need(s.theta, "smoothing.theta")?;
                }
                NoiseFamily::Sparsity => {
                    need(s.theta_plus, "smoothing.theta_plus")?;
                    need(s.theta_minus, "smoothing.theta_minus")?;
                }
            },
            SchemeKind::Grid => {
                let (lo, hi) = match s.family {
                    NoiseFamily::Gaussian => ("sigma_min", "sigma_max"),
                    NoiseFamily::Uniform => ("lambda_min", "lambda_max"),
                    NoiseFamily::Bernoulli => ("theta_min", "theta_max"),
                    NoiseFamily::Sparsity => {
                        need(s.theta_plus, "smoothing.theta_plus")?;
                        ("theta_minus_min", "theta_minus_max")
                    }
                };
                let (a, b) = self.grid_range()?;
                need(a, &format!("smoothing.{lo}"))?;
                need(b, &format!("smoothing.{hi}"))?;
                if s.grid_rows == 0 || s.grid_cols == 0 {
                    return Err(cfg_err("smoothing.grid_rows", "grid dimensions must be positive"));
                }
            }
            SchemeKind::Cluster => {
                let ic = s.input_clusters.as_ref().ok_or_else(|| cfg_err("smoothing.input_clusters", "required"))?;
                let oc = s.output_clusters.as_ref().ok_or_else(|| cfg_err("smoothing.output_clusters", "required"))?;
                let ec = s.edge_counts.as_ref().ok_or_else(|| cfg_err("smoothing.edge_counts", "required"))?;
                if ic.len() != model.d_in() {
                    return Err(cfg_err(
                        "smoothing.input_clusters",
                        format!("{} entries for {} inputs", ic.len(), model.d_in()),
                    ));
                }
                if oc.len() != model.d_out() {
                    return Err(cfg_err(
                        "smoothing.output_clusters",
                        format!("{} entries for {} outputs", oc.len(), model.d_out()),
                    ));
                }
                if let Some(&c) = ic.iter().chain(oc).find(|&&c| c >= ec.len()) {
                    return Err(cfg_err("smoothing.edge_counts", format!("cluster {c} has no row")));
                }
                match s.family {
                    NoiseFamily::Bernoulli => {
                        need(s.theta_min, "smoothing.theta_min")?;
                        need(s.theta_max, "smoothing.theta_max")?;
                    }
                    _ => {
                        need(s.theta_plus, "smoothing.theta_plus")?;
                        need(s.theta_minus_min, "smoothing.theta_minus_min")?;
                        need(s.theta_minus_max, "smoothing.theta_minus_max")?;
                    }
                }
            }
        }
        if let Some(v) = &self.input.values {
            if v.len() != model.d_in() {
                return Err(cfg_err("input.values", format!("{} entries for {} inputs", v.len(), model.d_in())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(cfg_err("input.values", "entries must be finite"));
            }
            if discrete && v.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(cfg_err("input.values", "discrete noise needs a binary input"));
            }
        }
        if !(0.0..=1.0).contains(&self.input.density) {
            return Err(cfg_err("input.density", "must lie in [0, 1]"));
        }
        if let Some(l) = &self.input.labels {
            if l.len() != model.d_out() || l.iter().any(|&y| y > 1) {
                return Err(cfg_err("input.labels", format!("need {} labels in {{0, 1}}", model.d_out())));
            }
        }
        let mc = &self.monte_carlo;
        if mc.n2 == 0 || (!mc.reuse && mc.n1 == 0) {
            return Err(cfg_err("monte_carlo.n1", "sample counts must be positive"));
        }
        if !(mc.alpha > 0.0 && mc.alpha < 1.0) {
            return Err(cfg_err("monte_carlo.alpha", "must lie in (0, 1)"));
        }
        if mc.thresholds < 2 {
            return Err(cfg_err("monte_carlo.thresholds", "need at least 2 thresholds"));
        }
        if mc.correction == Correction::Holm && kind == CertKind::Variance {
            return Err(cfg_err("monte_carlo.correction", "holm is only available for probability certificates"));
        }
        let t = self.resolved_threat(model.d_in())?;
        if s.family == NoiseFamily::Sparsity && (t.p != 0 || t.domain != InputDomain::Binary) {
            return Err(cfg_err("threat.p", "sparsity-aware noise certifies binary ℓ₀ budgets"));
        }
        if s.family == NoiseFamily::Bernoulli && t.domain != InputDomain::Binary {
            return Err(cfg_err("threat.domain", "bernoulli noise needs the binary domain"));
        }
        if !discrete && t.domain == InputDomain::Binary {
            return Err(cfg_err("threat.domain", "continuous noise needs the continuous domain"));
        }
        let expected_p = match (s.family, kind) {
            (NoiseFamily::Gaussian, _) => 2,
            (NoiseFamily::Uniform, _) => 1,
            _ => 0,
        };
        if t.p != expected_p {
            return Err(cfg_err(
                "threat.p",
                format!("{:?} certificates bound p = {expected_p} perturbations", s.family),
            ));
        }
        self.oracle.validate().map_err(|e| Error::Config(format!("oracle: {e}")))?;
        Ok(())
    }

    fn grid_range(&self) -> Result<(Option<f64>, Option<f64>)> {
        let s = &self.smoothing;
        Ok(match s.family {
            NoiseFamily::Gaussian => (s.sigma_min, s.sigma_max),
            NoiseFamily::Uniform => (s.lambda_min, s.lambda_max),
            NoiseFamily::Bernoulli => (s.theta_min, s.theta_max),
            NoiseFamily::Sparsity => (s.theta_minus_min, s.theta_minus_max),
        })
    }

    /// The interpolated parameter range of a grid or cluster scheme.
    pub fn param_range(&self) -> Result<(f64, f64)> {
        let s = &self.smoothing;
        let (a, b) = match (s.scheme, s.family) {
            (SchemeKind::Cluster, NoiseFamily::Bernoulli) => (s.theta_min, s.theta_max),
            (SchemeKind::Cluster, _) => (s.theta_minus_min, s.theta_minus_max),
            _ => self.grid_range()?,
        };
        Ok((need(a, "smoothing range minimum")?, need(b, "smoothing range maximum")?))
    }

    pub fn resolved_threat(&self, d_in: usize) -> Result<ResolvedThreat> {
        let t = &self.threat;
        let family = self.smoothing.family;
        let p = t.p.unwrap_or(match family {
            NoiseFamily::Gaussian => 2,
            NoiseFamily::Uniform => 1,
            _ => 0,
        });
        let domain =
            t.domain.unwrap_or(if family.is_discrete() { InputDomain::Binary } else { InputDomain::Continuous });
        let eps = match &t.eps {
            Some(e) => e.clone(),
            None if domain == InputDomain::Binary => {
                let max = t.eps_max.unwrap_or(d_in.min(10) as f64);
                if !(max >= 0.0) || max.fract() != 0.0 {
                    return Err(cfg_err("threat.eps_max", "binary budgets must be nonnegative integers"));
                }
                (0..=max as usize).map(|k| k as f64).collect()
            }
            None => {
                let max = t.eps_max.unwrap_or(4.0);
                let n = t.eps_points.unwrap_or(81);
                if !(max > 0.0) || !max.is_finite() || n < 2 {
                    return Err(cfg_err("threat.eps_max", "need a positive maximum and at least 2 points"));
                }
                (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
            }
        };
        if eps.first() != Some(&0.0) || eps.windows(2).any(|w| !(w[0] < w[1])) || eps.iter().any(|e| !e.is_finite()) {
            return Err(cfg_err("threat.eps", "budget grid must start at 0 and be strictly ascending"));
        }
        if domain == InputDomain::Binary && eps.iter().any(|e| e.fract() != 0.0) {
            return Err(cfg_err("threat.eps", "binary budgets must be integers"));
        }
        if !(t.eps_plus >= 0.0) || t.eps_plus.fract() != 0.0 {
            return Err(cfg_err("threat.eps_plus", "must be a nonnegative integer"));
        }
        if t.eps_plus != 0.0 && family != NoiseFamily::Sparsity {
            return Err(cfg_err("threat.eps_plus", "only used with sparsity-aware noise"));
        }
        if p > 2 {
            return Err(cfg_err("threat.p", "must be 0, 1 or 2"));
        }
        Ok(ResolvedThreat { p, domain, eps, eps_plus: t.eps_plus })
    }
}
