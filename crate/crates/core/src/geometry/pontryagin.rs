//! Pontryagin number of `TN_k` from boundary fluxes.
//!
//! The density `tr R∧R` is a total Laplacian of `|∇V|²/V³`, so the bulk
//! integral reduces to fluxes of `G = |∇V|²/V³` through a large sphere and
//! through small spheres around each center:
//! `P = (1/48π) (∮_{S_R} ∇G·n dA − Σ_σ ∮_{S_ε(ν_σ)} ∇G·n dA)`,
//! with `n` the normal pointing away from the sphere's center. Each center
//! contributes `1/12`. The outer flux is the bulk integral beyond `R` with
//! opposite sign; it vanishes as `R → ∞`, which is checked from its decay
//! over `R, 2R, 4R` before the limit is taken.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::Serialize;

use super::{harmonic_hessian, harmonic_sum, GhSpace};
use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::fd::log_log_slope;
use crate::quad::SphereRule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PontryaginOptions {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Combine fluxes at `ε` and `ε/2` to cancel the `O(ε²)` error.
    pub richardson: bool,
    pub exec: Exec,
}

impl Default for PontryaginOptions {
    fn default() -> Self {
        Self {
            n_theta: 24,
            n_phi: 48,
            richardson: true,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PontryaginResult {
    /// Limit `R → ∞`: the center sum.
    pub value: f64,
    /// Center sum plus the outer term at `outer_radius`, i.e. the bulk integral inside `S_R`.
    pub truncated_value: f64,
    /// Contribution of each center, `−flux / 48π`.
    pub center_contributions: Vec<f64>,
    /// Outer-sphere term `flux / 48π` at `outer_radius`.
    pub outer_term: f64,
    pub outer_radii: Vec<f64>,
    /// Raw outer fluxes at `outer_radii`.
    pub outer_fluxes: Vec<f64>,
    /// Log-log slope of `|outer flux|` against `R`; `None` when the flux vanishes.
    pub outer_decay_exponent: Option<f64>,
    /// Change of the center sum between `ε` and `ε/2`.
    pub richardson_delta: f64,
}

/// `∇G` for `G = |∇V|²/V³`.
pub fn grad_g(space: &GhSpace, x: &Vector3<f64>) -> Vector3<f64> {
    let (v, gv) = harmonic_sum(space.l(), space.centers(), None, x);
    let hess = harmonic_hessian(space.centers(), None, x);
    2.0 * (hess * gv) / v.powi(3) - 3.0 * gv.norm_squared() * gv / v.powi(4)
}

fn sphere_flux(rule: &SphereRule, exec: Exec, space: &GhSpace, c: &Vector3<f64>, radius: f64) -> f64 {
    rule.integrate(exec, c, radius, |p, n| grad_g(space, p).dot(n))
}

pub fn pontryagin_number(
    space: &GhSpace,
    sphere_radius: f64,
    outer_radius: f64,
    opts: &PontryaginOptions,
) -> Result<PontryaginResult> {
    if !(sphere_radius > 0.0) {
        return Err(Error::Radius(format!("sphere radius must be positive, got {sphere_radius}")));
    }
    if let Some(sep) = space.min_separation() {
        if sphere_radius >= 0.5 * sep {
            return Err(Error::Radius(format!(
                "sphere radius {sphere_radius} is not below half the minimum center separation {sep}"
            )));
        }
    }
    if space.k() > 0 && sphere_radius <= space.exclusion_radius() {
        return Err(Error::Radius(format!(
            "sphere radius {sphere_radius} is inside the exclusion radius {}",
            space.exclusion_radius()
        )));
    }
    let scale = space.extent().max(space.diameter()).max(1.0);
    if outer_radius < 10.0 * scale {
        return Err(Error::Radius(format!(
            "outer radius {outer_radius} must exceed 10x the center-set scale {scale}"
        )));
    }
    let rule = SphereRule::new(opts.n_theta, opts.n_phi)?;
    let norm = 1.0 / (48.0 * PI);

    let centers = space.centers();
    let per_center = |eps: f64| -> Vec<f64> {
        centers
            .iter()
            .map(|c| -norm * sphere_flux(&rule, opts.exec, space, c, eps))
            .collect()
    };
    let coarse = per_center(sphere_radius);
    let (center_contributions, richardson_delta) = if opts.richardson {
        let fine = per_center(0.5 * sphere_radius);
        let combined: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        let delta = pairwise_sum(&fine) - pairwise_sum(&coarse);
        (combined, delta)
    } else {
        (coarse, 0.0)
    };

    let origin = Vector3::zeros();
    let outer_radii = vec![outer_radius, 2.0 * outer_radius, 4.0 * outer_radius];
    let outer_fluxes: Vec<f64> = outer_radii
        .iter()
        .map(|&r| sphere_flux(&rule, opts.exec, space, &origin, r))
        .collect();
    let outer_term = norm * outer_fluxes[0];
    let abs: Vec<f64> = outer_fluxes.iter().map(|f| f.abs()).collect();
    let outer_decay_exponent = if abs.iter().all(|f| *f > 0.0) {
        Some(log_log_slope(&outer_radii, &abs)?.slope)
    } else {
        None
    };
    if let Some(p) = outer_decay_exponent {
        if p >= 0.0 {
            return Err(Error::Fit(format!("outer flux does not decay (exponent {p:.3})")));
        }
    }
    let value = pairwise_sum(&center_contributions);
    Ok(PontryaginResult {
        value,
        truncated_value: value + outer_term,
        center_contributions,
        outer_term,
        outer_radii,
        outer_fluxes,
        outer_decay_exponent,
        richardson_delta,
    })
}
