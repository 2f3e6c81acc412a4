//! Fourier series of the first two periodic Bernoulli functions.
//!
//! `½ − {a} = Σ_{p≥1} sin(2πpa)/(πp)` for `a ∉ ℤ` and
//! `B₂({a}) = {a}² − {a} + 1/6 = Σ_{p≥1} cos(2πpa)/(π²p²)`.

use std::f64::consts::PI;

use num_rational::BigRational;
use serde::Serialize;

use super::IndexScalar;

use crate::error::{Error, Result};
use crate::fd::log_log_slope;
use crate::instanton::INTEGER_TOLERANCE;

fn frac(a: f64) -> f64 {
    a - a.floor()
}

pub fn b2(a: f64) -> f64 {
    let f = frac(a);
    f * f - f + 1.0 / 6.0
}

/// `B₂({a})` in exact arithmetic.
pub fn b2_exact(a: &BigRational) -> BigRational {
    let f = a.frac_part();
    f.clone() * f.clone() - f + BigRational::new(1.into(), 6.into())
}

pub fn half_minus_frac(a: f64) -> Result<f64> {
    if (a - a.round()).abs() < INTEGER_TOLERANCE {
        return Err(Error::IntegerHolonomy { value: a.to_string() });
    }
    Ok(0.5 - frac(a))
}

/// `sin(2πt)`, exactly zero at half-integers.
pub fn sin_2pi(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r == 0.0 || r == 0.5 {
        0.0
    } else {
        (2.0 * PI * r).sin()
    }
}

/// `cos(2πt)`, exactly zero at quarter-odd points.
pub fn cos_2pi(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r == 0.25 || r == 0.75 {
        0.0
    } else {
        (2.0 * PI * r).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliReport {
    pub a: f64,
    pub truncation: usize,
    pub b2: f64,
    pub half_minus_frac: f64,
    pub sine_partial: f64,
    pub cosine_partial: f64,
    pub sine_error: f64,
    pub cosine_error: f64,
}

fn partial_sums(a: f64, p: usize) -> (f64, f64) {
    let (mut s, mut c) = (0.0, 0.0);
    for q in 1..=p {
        let qf = q as f64;
        let t = (qf * a).rem_euclid(1.0);
        s += sin_2pi(t) / (PI * qf);
        c += cos_2pi(t) / (PI * PI * qf * qf);
    }
    (s, c)
}

pub fn bernoulli_tools(a: f64, truncation: usize) -> Result<BernoulliReport> {
    let h = half_minus_frac(a)?;
    let b = b2(a);
    let (s, c) = partial_sums(a, truncation);
    Ok(BernoulliReport {
        a,
        truncation,
        b2: b,
        half_minus_frac: h,
        sine_partial: s,
        cosine_partial: c,
        sine_error: (s - h).abs(),
        cosine_error: (c - b).abs(),
    })
}

/// Observed truncation rates from error envelopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub windows: Vec<usize>,
    /// `max_{P ≤ q < 2P} |S_q − target|` per window start `P`.
    pub sine_envelope: Vec<f64>,
    pub cosine_envelope: Vec<f64>,
    pub sine_slope: f64,
    pub cosine_slope: f64,
}

/// Fits log-log slopes of the error envelopes; the partial sums oscillate, so
/// pointwise errors are not monotone in `P`.
pub fn envelope_rates(a: f64, windows: &[usize]) -> Result<RateFit> {
    if windows.len() < 2 || windows.contains(&0) {
        return Err(Error::Fit("need at least two positive window starts".into()));
    }
    let h = half_minus_frac(a)?;
    let b = b2(a);
    let top = 2 * windows.iter().max().copied().unwrap_or(1);
    let (mut s, mut c) = (0.0, 0.0);
    let mut se = vec![0.0_f64; windows.len()];
    let mut ce = vec![0.0_f64; windows.len()];
    for q in 1..top {
        let qf = q as f64;
        let t = (qf * a).rem_euclid(1.0);
        s += sin_2pi(t) / (PI * qf);
        c += cos_2pi(t) / (PI * PI * qf * qf);
        for (i, &w) in windows.iter().enumerate() {
            if q >= w && q < 2 * w {
                se[i] = se[i].max((s - h).abs());
                ce[i] = ce[i].max((c - b).abs());
            }
        }
    }
    let xs: Vec<f64> = windows.iter().map(|w| *w as f64).collect();
    let sine_slope = log_log_slope(&xs, &se)?.slope;
    let cosine_slope = log_log_slope(&xs, &ce)?.slope;
    Ok(RateFit {
        windows: windows.to_vec(),
        sine_envelope: se,
        cosine_envelope: ce,
        sine_slope,
        cosine_slope,
    })
}
