//! Fourth-order centered finite differences and small fitting helpers.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Offsets and weights of the five-point first-derivative stencil (divide by `h`).
const D1: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// Fourth-order centered derivative of a scalar function of one variable.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    D1.iter().map(|&(o, w)| w * f(x + o * h)).sum::<f64>() / h
}

/// Fourth-order centered second derivative.
pub fn second_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// Partial derivatives along the three Cartesian axes of a vector-valued map.
///
/// Returns `out[axis][component]`. The first error raised by `f` is propagated.
pub fn gradient_of<const N: usize, F>(f: F, x: &Vector3<f64>, h: f64) -> Result<[[f64; N]; 3]>
where
    F: Fn(&Vector3<f64>) -> Result<[f64; N]>,
{
    let mut out = [[0.0; N]; 3];
    for (axis, row) in out.iter_mut().enumerate() {
        for &(o, w) in &D1 {
            let mut p = *x;
            p[axis] += o * h;
            let v = f(&p)?;
            for (r, vi) in row.iter_mut().zip(v.iter()) {
                *r += w * vi;
            }
        }
        for r in row.iter_mut() {
            *r /= h;
        }
    }
    Ok(out)
}

/// Partial derivatives along four coordinates, `out[axis][component]`.
pub fn gradient4_of<const N: usize, F>(f: F, q: &[f64; 4], h: f64) -> Result<[[f64; N]; 4]>
where
    F: Fn(&[f64; 4]) -> Result<[f64; N]>,
{
    let mut out = [[0.0; N]; 4];
    for (axis, row) in out.iter_mut().enumerate() {
        for &(o, w) in &D1 {
            let mut p = *q;
            p[axis] += o * h;
            let v = f(&p)?;
            for (r, vi) in row.iter_mut().zip(v.iter()) {
                *r += w * vi;
            }
        }
        for r in row.iter_mut() {
            *r /= h;
        }
    }
    Ok(out)
}

/// Result of a least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - intercept - slope * x)
        .collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok(LineFit {
        slope,
        intercept,
        rms,
        max_residual,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit("log-log fit needs positive finite samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Logarithmically spaced samples on `[a, b]`, endpoints included.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
