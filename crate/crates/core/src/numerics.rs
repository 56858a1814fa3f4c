//! Special functions and seeded random streams.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("normal cdf of non-finite value {x}")));
    }
    Ok(phi(x))
}

pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Rational approximation of the normal quantile (relative error ~1e-9),
// refined by Newton steps below.
#[allow(clippy::excessive_precision)]
fn quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the standard normal CDF on the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail where the CDF keeps full relative precision.
    let target = p.min(1.0 - p);
    let mut x = quantile_guess(target);
    for _ in 0..3 {
        let step = (phi(x) - target) / normal_pdf(x);
        x -= step;
        if step.abs() < 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(if p > 0.5 { -x } else { x })
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("beta shape parameters must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta argument {x} outside [0,1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    Ok(if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    })
}

/// Quantile of the Beta(a, b) distribution.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("beta shape parameters must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("beta quantile needs p in [0,1], got {p}")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    // Closed forms for the one-parameter families.
    if b == 1.0 {
        return Ok(p.powf(1.0 / a));
    }
    if a == 1.0 {
        return Ok(1.0 - (1.0 - p).powf(1.0 / b));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_incomplete_beta(a, b, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    Uniform01,
    StandardNormal,
}

/// A replayable random stream identified by `(seed, stream_id)`.
///
/// Draw `i` of a stream is a pure function of `(seed, stream_id, i)`, so
/// samples can be generated in any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

// Every draw consumes four 32-bit words of the keystream.
const WORDS_PER_DRAW: u128 = 4;

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    fn generator(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Draw number `index` of this stream.
    pub fn draw(&self, law: Law, index: u64) -> f64 {
        let mut rng = self.generator();
        rng.set_word_pos(index as u128 * WORDS_PER_DRAW);
        sample_law(&mut rng, law)
    }

    /// Sequential reader starting at draw 0; yields the same values as `draw`.
    pub fn reader(&self) -> StreamReader {
        StreamReader { rng: self.generator() }
    }
}

pub struct StreamReader {
    rng: ChaCha20Rng,
}

impl StreamReader {
    pub fn next(&mut self, law: Law) -> f64 {
        sample_law(&mut self.rng, law)
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sample_law(rng: &mut ChaCha20Rng, law: Law) -> f64 {
    let a = rng.next_u64();
    let b = rng.next_u64();
    match law {
        Law::Uniform01 => unit(a),
        Law::StandardNormal => {
            // Box-Muller; 1 - u keeps the logarithm finite.
            let u1 = 1.0 - unit(a);
            let u2 = unit(b);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
}
