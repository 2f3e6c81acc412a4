//! Chern–Weil integrals over `TN_k`.
//!
//! For anti-self-dual `F`, `F ∧ F = |F|² dVol`, and `|F_j|² = ½|∇f_j|²`
//! with `f_j = H_j/V`. The fiber integral is `4π` and `dVol = V d³x ∧ dτ`,
//! so `ch₂ = (1/8π²) Σ_j ∫ |F_j|² dVol = (1/4π) Σ_j ∫_{ℝ³} |∇f_j|² V d³x`.
//!
//! The ℝ³ integral is split by a partition of unity
//! `w_σ = ρ_σ^{−4} / Σ_τ ρ_τ^{−4}` into one chart per center. Each chart is
//! integrated in spherical coordinates about its center with Gauss–Legendre
//! panels that double in length from `ε` to `R`, which keeps the `1/ρ`
//! behaviour at the center and the `r^{−4}` tail well resolved. The
//! remaining tail is extrapolated with the model `a + b/R`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::fd::fit_line;
use crate::geometry::GhSpace;
use crate::instanton::{curvature_form, InstantonBundle, LineBundle};
use crate::quad::{GaussLegendre, SphereRule};

/// Node counts for one resolution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    /// Gauss–Legendre nodes per radial panel.
    pub radial: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Resolution {
    pub fn doubled(self) -> Self {
        Self {
            radial: 2 * self.radial,
            n_theta: 2 * self.n_theta,
            n_phi: 2 * self.n_phi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Radius of the excluded ball about each center.
    pub epsilon: f64,
    pub r_max: f64,
    /// Coarse level; the fine level doubles every node count.
    pub coarse: Resolution,
    /// Integrate the fiber with this many Gauss–Legendre nodes instead of the factor `4π`.
    pub tau_nodes: Option<usize>,
    /// Largest accepted `error_estimate / max(|value|, 1e-12)`.
    pub max_relative_error: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            r_max: 1e4,
            coarse: Resolution {
                radial: 8,
                n_theta: 16,
                n_phi: 32,
            },
            tau_nodes: None,
            max_relative_error: 2e-3,
        }
    }
}

impl QuadratureSpec {
    pub const MIN_RADIAL: usize = 2;
    pub const MIN_ANGULAR: usize = 4;

    pub fn validate(&self, space: &GhSpace) -> Result<()> {
        let r = &self.coarse;
        if r.radial < Self::MIN_RADIAL || r.n_theta < Self::MIN_ANGULAR || r.n_phi < Self::MIN_ANGULAR {
            return Err(Error::InvalidParameter(format!(
                "node counts {r:?} below minima (radial {}, angular {})",
                Self::MIN_RADIAL,
                Self::MIN_ANGULAR
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if let Some(sep) = space.min_separation() {
            if self.epsilon >= 0.25 * sep {
                return Err(Error::Radius(format!(
                    "exclusion radius {} must be below a quarter of the center separation {sep}",
                    self.epsilon
                )));
            }
        }
        let scale = space.diameter().max(space.extent()).max(1.0);
        if self.r_max <= 10.0 * scale || self.r_max <= 64.0 * self.epsilon {
            return Err(Error::Radius(format!(
                "r_max {} must exceed 10x the center-set scale {scale}",
                self.r_max
            )));
        }
        if matches!(self.tau_nodes, Some(0)) {
            return Err(Error::InvalidParameter("tau_nodes must be positive".into()));
        }
        Ok(())
    }
}

/// `Σ_j |F_j|² / 8π²`, the density of `ch₂` against `dVol`.
pub fn ch2_density(space: &GhSpace, bundles: &InstantonBundle, x: &Vector3<f64>) -> Result<f64> {
    let mut s = 0.0;
    for b in &bundles.summands {
        s += curvature_form(space, b, x)?.norm().powi(2);
    }
    Ok(s / (8.0 * PI * PI))
}

/// `½ (kΛ² − 2ΛM + Σ_σ v_σ²)` for one summand.
pub fn ch2_closed_form(space: &GhSpace, bundle: &LineBundle) -> f64 {
    let a = bundle.a(space.l());
    let k = space.k() as f64;
    let m = bundle.m() as f64;
    let v2: f64 = bundle.v.iter().map(|v| (v * v) as f64).sum();
    0.5 * (k * a * a - 2.0 * a * m + v2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub radii: Vec<f64>,
    pub partial: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ch2Result {
    pub value: f64,
    pub analytic: f64,
    pub relative_deviation: f64,
    pub error_estimate: f64,
    pub coarse_value: f64,
    pub fine_value: f64,
    pub tail: TailFit,
    /// Bound on the contribution of the excluded balls.
    pub exclusion_estimate: f64,
    pub spec: QuadratureSpec,
}

fn chart_weight(centers: &[Vector3<f64>], sigma: usize, x: &Vector3<f64>) -> f64 {
    if centers.len() <= 1 {
        return 1.0;
    }
    let rho: Vec<f64> = centers.iter().map(|c| (x - c).norm()).collect();
    let rmin = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let denom: f64 = rho.iter().map(|r| (rmin / r).powi(4)).sum();
    (rmin / rho[sigma]).powi(4) / denom
}

fn panel_edges(epsilon: f64, r_max: f64) -> Vec<f64> {
    let mut edges = vec![epsilon];
    let mut r = epsilon;
    while 2.0 * r < 0.25 * r_max {
        r *= 2.0;
        edges.push(r);
    }
    edges.extend([0.25 * r_max, 0.5 * r_max, r_max]);
    edges
}

/// Cumulative `∫ ch₂-density dVol` at each panel edge beyond the first.
fn cumulative(
    space: &GhSpace,
    bundles: &InstantonBundle,
    spec: &QuadratureSpec,
    res: Resolution,
    exec: Exec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let gl = GaussLegendre::new(res.radial)?;
    let sphere = SphereRule::new(res.n_theta, res.n_phi)?;
    let edges = panel_edges(spec.epsilon, spec.r_max);
    let origin = [Vector3::zeros()];
    let charts: &[Vector3<f64>] = if space.k() == 0 { &origin } else { space.centers() };
    let fiber = match spec.tau_nodes {
        None => 4.0 * PI,
        Some(n) => GaussLegendre::new(n)?.integrate(0.0, 4.0 * PI, |_| 1.0),
    };

    // One task per (chart, panel, radial node).
    let n_panels = edges.len() - 1;
    let per_chart = n_panels * gl.len();
    let tasks = charts.len() * per_chart;
    let shells = exec.map_range(tasks, |t| -> Result<f64> {
        let sigma = t / per_chart;
        let rest = t % per_chart;
        let (p, i) = (rest / gl.len(), rest % gl.len());
        let (a, b) = (edges[p], edges[p + 1]);
        let half = 0.5 * (b - a);
        let rho = 0.5 * (a + b) + half * gl.nodes[i];
        let wr = half * gl.weights[i];
        let c = charts[sigma];
        let mut terms = Vec::with_capacity(sphere.directions.len());
        for (n, w) in sphere.directions.iter().zip(&sphere.weights) {
            let x = c + rho * n;
            let v = space.potential(&x)?;
            let dens = ch2_density(space, bundles, &x)?;
            terms.push(w * dens * v * chart_weight(charts, sigma, &x));
        }
        Ok(wr * rho * rho * fiber * pairwise_sum(&terms))
    });
    let shells = shells.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut partial = Vec::with_capacity(n_panels);
    let mut panel_sums = vec![0.0; n_panels];
    for p in 0..n_panels {
        let mut per = Vec::with_capacity(charts.len());
        for sigma in 0..charts.len() {
            let start = sigma * per_chart + p * gl.len();
            per.push(pairwise_sum(&shells[start..start + gl.len()]));
        }
        panel_sums[p] = pairwise_sum(&per);
    }
    for p in 0..n_panels {
        partial.push(pairwise_sum(&panel_sums[..=p]));
    }
    Ok((edges[1..].to_vec(), partial))
}

/// Fits `a + b/R` to the last three cumulative values.
fn tail_fit(radii: &[f64], partial: &[f64]) -> Result<TailFit> {
    let n = radii.len();
    if n < 3 {
        return Err(Error::Fit("tail fit needs three radii".into()));
    }
    let r = radii[n - 3..].to_vec();
    let y = partial[n - 3..].to_vec();
    let inv: Vec<f64> = r.iter().map(|v| 1.0 / v).collect();
    let fit = fit_line(&inv, &y)?;
    let b_over_r = (fit.slope / r[2]).abs();
    if fit.max_residual > 0.1 * b_over_r && fit.max_residual > 1e-12 * fit.intercept.abs().max(1e-300) {
        return Err(Error::Fit(format!(
            "tail model a + b/R residual {:.3e} exceeds 10% of b/R = {b_over_r:.3e}",
            fit.max_residual
        )));
    }
    Ok(TailFit {
        radii: r,
        partial: y,
        a: fit.intercept,
        b: fit.slope,
        max_residual: fit.max_residual,
    })
}

pub fn integrate_ch2(
    space: &GhSpace,
    bundles: &InstantonBundle,
    spec: &QuadratureSpec,
    exec: Exec,
) -> Result<Ch2Result> {
    spec.validate(space)?;
    let analytic: f64 = bundles.summands.iter().map(|b| ch2_closed_form(space, b)).sum();
    if bundles.summands.iter().all(|b| b.is_flat()) {
        return Ok(Ch2Result {
            value: 0.0,
            analytic,
            relative_deviation: 0.0,
            error_estimate: 0.0,
            coarse_value: 0.0,
            fine_value: 0.0,
            tail: TailFit {
                radii: vec![],
                partial: vec![],
                a: 0.0,
                b: 0.0,
                max_residual: 0.0,
            },
            exclusion_estimate: 0.0,
            spec: spec.clone(),
        });
    }
    let (radii_c, partial_c) = cumulative(space, bundles, spec, spec.coarse, exec)?;
    let (radii_f, partial_f) = cumulative(space, bundles, spec, spec.coarse.doubled(), exec)?;
    debug_assert_eq!(radii_c, radii_f);
    let tail_c = tail_fit(&radii_c, &partial_c)?;
    let tail = tail_fit(&radii_f, &partial_f)?;

    // Density near each center behaves like C/ρ; the ball holds at most 2π C ε².
    let eps = spec.epsilon;
    let rule = SphereRule::new(8, 16)?;
    let mut exclusion = 0.0;
    for c in space.centers() {
        let mut peak: f64 = 0.0;
        for n in &rule.directions {
            let x = c + eps * n;
            peak = peak.max(ch2_density(space, bundles, &x)? * space.potential(&x)?);
        }
        exclusion += 4.0 * PI * 2.0 * PI * eps * eps * (eps * peak);
    }

    let value = tail.a;
    let tail_correction = (tail.a - partial_f[partial_f.len() - 1]).abs();
    let error_estimate = (tail.a - tail_c.a).abs() + tail_correction + exclusion;
    let relative_deviation = if analytic != 0.0 {
        (value - analytic).abs() / analytic.abs()
    } else {
        value.abs()
    };
    let rel_err = error_estimate / value.abs().max(1e-12);
    if rel_err > spec.max_relative_error {
        return Err(Error::Quadrature {
            estimate: rel_err,
            threshold: spec.max_relative_error,
        });
    }
    Ok(Ch2Result {
        value,
        analytic,
        relative_deviation,
        error_estimate,
        coarse_value: tail_c.a,
        fine_value: tail.a,
        tail,
        exclusion_estimate: exclusion,
        spec: spec.clone(),
    })
}

/// `(i/2π) ∮_{S²_R} F₂₃ dVol_{S²}` per summand, with `F_A = −i da`.
///
/// On horizontal tangent vectors of the sphere only the `−½ V *₃df` part of
/// `da` survives, so the integrand is `−½ V ∂_n f` against Euclidean area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFlux {
    pub radius: f64,
    pub at_r: Vec<f64>,
    pub at_2r: Vec<f64>,
    /// `2Φ(2R) − Φ(R)`.
    pub extrapolated: Vec<f64>,
    /// `m_j − k λ_j / l`.
    pub expected: Vec<f64>,
}

pub fn boundary_flux_f23_at(
    space: &GhSpace,
    bundle: &LineBundle,
    radius: f64,
    rule: &SphereRule,
    exec: Exec,
) -> Result<f64> {
    let flux = rule.try_integrate(exec, &Vector3::zeros(), radius, |p, n| {
        let (_, df) = bundle.ratio(space, p)?;
        Ok(-0.5 * space.potential(p)? * df.dot(n))
    })?;
    Ok(flux / (2.0 * PI))
}

pub fn boundary_flux_f23(
    space: &GhSpace,
    bundles: &InstantonBundle,
    radius: f64,
    exec: Exec,
) -> Result<BoundaryFlux> {
    let scale = space.diameter().max(space.extent()).max(1.0);
    if radius < 10.0 * scale {
        return Err(Error::Radius(format!(
            "flux radius {radius} must exceed 10x the center-set scale {scale}"
        )));
    }
    let rule = SphereRule::new(24, 48)?;
    let mut at_r = Vec::new();
    let mut at_2r = Vec::new();
    let mut extrapolated = Vec::new();
    let mut expected = Vec::new();
    for b in &bundles.summands {
        let p1 = boundary_flux_f23_at(space, b, radius, &rule, exec)?;
        let p2 = boundary_flux_f23_at(space, b, 2.0 * radius, &rule, exec)?;
        at_r.push(p1);
        at_2r.push(p2);
        extrapolated.push(2.0 * p2 - p1);
        expected.push(b.m() as f64 - space.k() as f64 * b.a(space.l()));
    }
    Ok(BoundaryFlux {
        radius,
        at_r,
        at_2r,
        extrapolated,
        expected,
    })
}
