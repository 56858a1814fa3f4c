//! Parameter sweeps with Pareto flags over (accuracy, ACR).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::pipeline::run_certify;

/// Smoothing parameters one sweep point overrides; unset fields keep the
/// base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepPoint {
    pub sigma: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub theta: Option<f64>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub theta_plus: Option<f64>,
    pub theta_minus: Option<f64>,
    pub theta_minus_min: Option<f64>,
    pub theta_minus_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub points: Vec<SweepPoint>,
}

impl SweepGrid {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let g: SweepGrid = toml::from_str(s)?;
        if g.points.is_empty() {
            return Err(Error::Config("points: the sweep grid is empty".into()));
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl SweepPoint {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.smoothing;
        let pairs = [
            (self.sigma, &mut s.sigma),
            (self.sigma_min, &mut s.sigma_min),
            (self.sigma_max, &mut s.sigma_max),
            (self.lambda, &mut s.lambda),
            (self.lambda_min, &mut s.lambda_min),
            (self.lambda_max, &mut s.lambda_max),
            (self.theta, &mut s.theta),
            (self.theta_min, &mut s.theta_min),
            (self.theta_max, &mut s.theta_max),
            (self.theta_plus, &mut s.theta_plus),
            (self.theta_minus, &mut s.theta_minus),
            (self.theta_minus_min, &mut s.theta_minus_min),
            (self.theta_minus_max, &mut s.theta_minus_max),
        ];
        for (v, slot) in pairs {
            if v.is_some() {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub point: SweepPoint,
    /// Certified accuracy at budget 0.
    pub accuracy: f64,
    /// ACR of the best available collective curve.
    pub acr: f64,
    pub dominated: bool,
}

/// `dominated[i]` iff some point is at least as good in both coordinates
/// and strictly better in one.
pub fn pareto_dominated(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0).then(points[b].1.total_cmp(&points[a].1)));
    let mut out = vec![false; points.len()];
    // Best second coordinate among points with a strictly larger first one.
    let mut best_above = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let first = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == first {
            j += 1;
        }
        // Within a group the first element has the largest second coordinate.
        let group_best = points[order[i]].1;
        for &k in &order[i..j] {
            out[k] = best_above >= points[k].1 || group_best > points[k].1;
        }
        best_above = best_above.max(group_best);
        i = j;
    }
    out
}

/// Runs every point (concurrently) and flags dominated ones.
pub fn run_sweep(base: &RunConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.points.is_empty() {
        return Err(Error::Config("points: the sweep grid is empty".into()));
    }
    let mut rows = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let mut cfg = base.clone();
            point.apply(&mut cfg);
            cfg.seed = base.seed.wrapping_add(index as u64);
            let report = run_certify(&cfg).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("points[{index}]: {m}")),
                other => other,
            })?;
            let first = report.curve.first().ok_or_else(|| Error::Config("threat.eps: empty grid".into()))?;
            let accuracy = first.exact_certified_accuracy.unwrap_or(first.relaxed_certified_accuracy);
            let acr = report.acr.exact.unwrap_or(report.acr.relaxed);
            Ok(SweepRow { index, seed: cfg.seed, point: point.clone(), accuracy, acr, dominated: false })
        })
        .collect::<Result<Vec<_>>>()?;
    let flags = pareto_dominated(&rows.iter().map(|r| (r.accuracy, r.acr)).collect::<Vec<_>>());
    rows.iter_mut().zip(flags).for_each(|(r, f)| r.dominated = f);
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    #[derive(Serialize)]
    struct Flat {
        index: usize,
        seed: u64,
        sigma: Option<f64>,
        sigma_min: Option<f64>,
        sigma_max: Option<f64>,
        lambda: Option<f64>,
        lambda_min: Option<f64>,
        lambda_max: Option<f64>,
        theta: Option<f64>,
        theta_min: Option<f64>,
        theta_max: Option<f64>,
        theta_plus: Option<f64>,
        theta_minus: Option<f64>,
        theta_minus_min: Option<f64>,
        theta_minus_max: Option<f64>,
        accuracy: f64,
        acr: f64,
        dominated: bool,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let p = &r.point;
        w.serialize(Flat {
            index: r.index,
            seed: r.seed,
            sigma: p.sigma,
            sigma_min: p.sigma_min,
            sigma_max: p.sigma_max,
            lambda: p.lambda,
            lambda_min: p.lambda_min,
            lambda_max: p.lambda_max,
            theta: p.theta,
            theta_min: p.theta_min,
            theta_max: p.theta_max,
            theta_plus: p.theta_plus,
            theta_minus: p.theta_minus,
            theta_minus_min: p.theta_minus_min,
            theta_minus_max: p.theta_minus_max,
            accuracy: r.accuracy,
            acr: r.acr,
            dominated: r.dominated,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("sweep csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
