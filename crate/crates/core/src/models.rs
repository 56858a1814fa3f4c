//! Two-class toy models with controllable locality.
//!
//! Inputs live on a `rows × cols` layout (row-major, `rows = 1` for
//! sequences) and distances are Chebyshev distances on that layout.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
}

impl Layout {
    pub fn line(len: usize) -> Self {
        Layout { rows: 1, cols: len }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = (a / self.cols, a % self.cols);
        let (rb, cb) = (b / self.cols, b % self.cols);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }

    /// `n` positions spread evenly over the flattened layout.
    pub fn spread_centers(&self, n: usize) -> Vec<usize> {
        let len = self.len();
        (0..n).map(|i| (((2 * i + 1) * len) / (2 * n.max(1))).min(len.saturating_sub(1))).collect()
    }
}

/// Output `n` is the majority bit among inputs within distance `radius` of
/// its center; inputs are read as bits by `x > 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowMajority {
    pub layout: Layout,
    pub radius: usize,
    pub centers: Vec<usize>,
}

/// Logistic outputs over signed, distance-decayed weights:
/// `logit_n = bias_n + Σ_d w_nd·(2x_d − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftLogistic {
    pub layout: Layout,
    pub decay: f64,
    pub centers: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl SoftLogistic {
    /// Weights `scale·exp(−decay·dist)` with seeded random signs.
    pub fn generate(layout: Layout, decay: f64, centers: Vec<usize>, scale: f64, seed: u64) -> Result<Self> {
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(Error::Config(format!("decay rate {decay} must be positive")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let weights = centers
            .iter()
            .map(|&c| {
                (0..layout.len())
                    .map(|d| {
                        let sign = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
                        sign * scale * (-decay * layout.distance(c, d) as f64).exp()
                    })
                    .collect()
            })
            .collect();
        let bias = vec![0.0; centers.len()];
        let m = SoftLogistic { layout, decay, centers, weights, bias };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.centers.len() || self.bias.len() != self.centers.len() {
            return Err(Error::Shape("soft logistic needs one weight row and bias per output".into()));
        }
        if self.weights.iter().any(|w| w.len() != self.layout.len()) {
            return Err(Error::Shape("soft logistic weight rows must match the layout".into()));
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(w, x)| w * (2.0 * x - 1.0)).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    WindowMajority(WindowMajority),
    SoftLogistic(SoftLogistic),
    /// Every output has class-1 score `score`, whatever the input.
    Constant {
        d_in: usize,
        d_out: usize,
        score: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub scores: [f64; 2],
}

impl Prediction {
    fn from_score(p1: f64) -> Self {
        Prediction { label: usize::from(p1 > 0.5), scores: [1.0 - p1, p1] }
    }
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::WindowMajority(m) => {
                if m.centers.iter().any(|&c| c >= m.layout.len()) {
                    return Err(Error::Config("window center outside the layout".into()));
                }
                Ok(())
            }
            Model::SoftLogistic(m) => {
                if m.centers.iter().any(|&c| c >= m.layout.len()) {
                    return Err(Error::Config("logistic center outside the layout".into()));
                }
                m.validate()
            }
            Model::Constant { score, .. } => {
                if !(0.0..=1.0).contains(score) {
                    return Err(Error::Config(format!("constant score {score} not in [0, 1]")));
                }
                Ok(())
            }
        }
    }

    pub fn d_in(&self) -> usize {
        match self {
            Model::WindowMajority(m) => m.layout.len(),
            Model::SoftLogistic(m) => m.layout.len(),
            Model::Constant { d_in, .. } => *d_in,
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            Model::WindowMajority(m) => m.centers.len(),
            Model::SoftLogistic(m) => m.centers.len(),
            Model::Constant { d_out, .. } => *d_out,
        }
    }

    /// Constant models live on a line.
    pub fn layout(&self) -> Layout {
        match self {
            Model::WindowMajority(m) => m.layout,
            Model::SoftLogistic(m) => m.layout,
            Model::Constant { d_in, .. } => Layout::line(*d_in),
        }
    }

    /// Layout position of every output.
    pub fn output_positions(&self) -> Vec<usize> {
        match self {
            Model::WindowMajority(m) => m.centers.clone(),
            Model::SoftLogistic(m) => m.centers.clone(),
            Model::Constant { d_in, d_out, .. } => Layout::line(*d_in).spread_centers(*d_out),
        }
    }

    /// Input dimensions output `n` can depend on, for strictly local models.
    pub fn receptive_field(&self, n: usize) -> Option<Vec<bool>> {
        match self {
            Model::WindowMajority(m) => {
                let c = *m.centers.get(n)?;
                Some((0..m.layout.len()).map(|d| m.layout.distance(c, d) <= m.radius).collect())
            }
            Model::Constant { d_in, d_out, .. } if n < *d_out => Some(vec![false; *d_in]),
            _ => None,
        }
    }

    /// Class-1 score of every output, written into `out`. Skips shape checks.
    pub(crate) fn class1_scores_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Model::WindowMajority(m) => {
                for (o, &c) in out.iter_mut().zip(&m.centers) {
                    let (mut ones, mut size) = (0usize, 0usize);
                    for (d, &xd) in x.iter().enumerate() {
                        if m.layout.distance(c, d) <= m.radius {
                            size += 1;
                            ones += usize::from(xd > 0.5);
                        }
                    }
                    *o = ones as f64 / size as f64;
                }
            }
            Model::SoftLogistic(m) => {
                for (o, l) in out.iter_mut().zip(m.logits(x)) {
                    *o = 1.0 / (1.0 + (-l).exp());
                }
            }
            Model::Constant { score, .. } => out.iter_mut().for_each(|o| *o = *score),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d_in() {
            return Err(Error::Shape(format!("input has {} dimensions, model expects {}", x.len(), self.d_in())));
        }
        Ok(())
    }

    pub fn class1_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.d_out()];
        self.class1_scores_into(x, &mut out);
        Ok(out)
    }

    /// Label 1 iff the class-1 score exceeds ½ (ties go to 0).
    pub fn predict(&self, x: &[f64]) -> Result<Vec<Prediction>> {
        Ok(self.class1_scores(x)?.into_iter().map(Prediction::from_score).collect())
    }

    /// Predicts on `ψ⊙x′ + (1−ψ)⊙x`: perturbations outside `psi` are discarded.
    pub fn masked_eval(&self, x: &[f64], x_pert: &[f64], psi: &[bool]) -> Result<Vec<Prediction>> {
        if x_pert.len() != x.len() || psi.len() != x.len() {
            return Err(Error::Shape("masked evaluation needs x, x′ and ψ of equal length".into()));
        }
        let spliced: Vec<f64> = (0..x.len()).map(|d| if psi[d] { x_pert[d] } else { x[d] }).collect();
        self.predict(&spliced)
    }
}
