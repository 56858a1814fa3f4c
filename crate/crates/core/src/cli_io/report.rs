use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collective::acr;
use crate::error::{Error, Result};

use super::config::RunConfig;

pub const VERSION: &str = concat!("colcert ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub output: usize,
    pub subset: usize,
    /// Ground-truth label.
    pub label: usize,
    pub candidate: usize,
    pub abstained: bool,
    pub correct: bool,
    /// Lower confidence bound on the candidate's probability or mean score.
    pub lower_bound: f64,
    pub alpha: f64,
    pub eta: Option<f64>,
    /// Largest budget on the grid up to which the prediction is certified
    /// on its own.
    pub robust_through: Option<f64>,
}

/// A bound for all predictions and for the correctly classified ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCounts {
    pub all: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub naive: BoundCounts,
    pub relaxed: BoundCounts,
    pub exact: Option<BoundCounts>,
    pub naive_certified_accuracy: f64,
    pub relaxed_certified_accuracy: f64,
    pub exact_certified_accuracy: Option<f64>,
    pub abstain_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcrSummary {
    pub naive: f64,
    pub relaxed: f64,
    pub exact: Option<f64>,
}

impl AcrSummary {
    pub fn from_curve(eps: &[f64], curve: &[CurvePoint]) -> Result<Self> {
        let of = |f: &dyn Fn(&CurvePoint) -> f64| acr(eps, &curve.iter().map(f).collect::<Vec<_>>());
        let exact = match curve.iter().all(|c| c.exact_certified_accuracy.is_some()) && !curve.is_empty() {
            true => Some(of(&|c| c.exact_certified_accuracy.unwrap_or(0.0))?),
            false => None,
        };
        Ok(AcrSummary {
            naive: of(&|c| c.naive_certified_accuracy)?,
            relaxed: of(&|c| c.relaxed_certified_accuracy)?,
            exact,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub version: String,
    pub config: RunConfig,
    pub input: Vec<f64>,
    pub predictions: Vec<PredictionReport>,
    pub curve: Vec<CurvePoint>,
    pub acr: AcrSummary,
}

#[derive(Serialize)]
struct CurveRow {
    epsilon: f64,
    naive_certified_accuracy: f64,
    relaxed_certified_accuracy: f64,
    exact_certified_accuracy: Option<f64>,
    abstain_rate: f64,
}

impl CertReport {
    pub fn new(
        config: RunConfig,
        input: Vec<f64>,
        predictions: Vec<PredictionReport>,
        curve: Vec<CurvePoint>,
        acr: AcrSummary,
    ) -> Self {
        CertReport { version: VERSION.into(), config, input, predictions, curve, acr }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn curve_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.curve {
            w.serialize(CurveRow {
                epsilon: c.epsilon,
                naive_certified_accuracy: c.naive_certified_accuracy,
                relaxed_certified_accuracy: c.relaxed_certified_accuracy,
                exact_certified_accuracy: c.exact_certified_accuracy,
                abstain_rate: c.abstain_rate,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Input(format!("curve csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `report.json` and `curve.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join("curve.csv");
        std::fs::write(&csv, self.curve_csv()?).map_err(|e| Error::io(&csv, e))?;
        Ok(())
    }
}
