//! Fiber holonomy of abelian instantons.
//!
//! The fiber circle has length `4π` in `τ`, so the holonomy of a summand is
//! `exp(i ∮ a) = e^{4πiμ}` with `μ = (1/4π) ∮ a(∂_τ) dτ = H/(2V)`, defined
//! modulo `½`. Its gradient is the fiber average of the curvature,
//! `∂_k μ = (1/4π) ∮ da(∂_k, ∂_τ) dτ`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::fd::{fit_line, geomspace, gradient_of, log_log_slope};
use crate::geometry::{GhSpace, PatchChart};
use crate::instanton::{connection_form, curvature_form, InstantonBundle, LineBundle};
use crate::quad::{GaussLegendre, SphereRule};

const FIBER_NODES: usize = 8;

/// Reduces to the representative in `[0, ½)`.
pub fn reduce_half(mu: f64) -> f64 {
    let r = mu.rem_euclid(0.5);
    if r >= 0.5 {
        0.0
    } else {
        r
    }
}

/// Distance from `t` to the nearest integer.
pub fn dist_to_integer(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// `min_{j≠m, n∈ℤ} |2μ_j − 2μ_m − n|`; `None` for a single summand.
pub fn kappa(mu: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in mu.iter().enumerate() {
        for b in &mu[i + 1..] {
            let d = dist_to_integer(2.0 * a - 2.0 * b);
            best = Some(best.map_or(d, |m: f64| m.min(d)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomySample {
    pub x: [f64; 3],
    /// Representatives in `[0, ½)`.
    pub mu: Vec<f64>,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
    pub kappa: Option<f64>,
}

/// `μ_j = H_j / (2V)` without reduction.
pub fn mu_unreduced(space: &GhSpace, bundle: &LineBundle, x: &Vector3<f64>) -> Result<f64> {
    let (h, _) = bundle.harmonic(space, x)?;
    let v = space.potential(x)?;
    Ok(h / (2.0 * v))
}

pub fn holonomy_mu(space: &GhSpace, bundles: &InstantonBundle, x: &Vector3<f64>) -> Result<HolonomySample> {
    let mu = bundles
        .summands
        .iter()
        .map(|b| mu_unreduced(space, b, x).map(reduce_half))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_from_mu(x, mu))
}

fn sample_from_mu(x: &Vector3<f64>, mu: Vec<f64>) -> HolonomySample {
    let eigenvalues = mu.iter().map(|m| Complex64::from_polar(1.0, 4.0 * PI * m)).collect();
    let kappa = kappa(&mu);
    HolonomySample {
        x: [x.x, x.y, x.z],
        mu,
        eigenvalues,
        kappa,
    }
}

/// `μ` by Gauss–Legendre integration of `a(∂_τ)` around the fiber in the given patch.
pub fn holonomy_mu_fiber(
    space: &GhSpace,
    bundles: &InstantonBundle,
    x: &Vector3<f64>,
    patch: &PatchChart,
) -> Result<HolonomySample> {
    let gl = GaussLegendre::new(FIBER_NODES)?;
    let mu = bundles
        .summands
        .iter()
        .map(|b| {
            let a_tau = connection_form(space, b, x, patch)?.coords[3];
            let integral = gl.integrate(0.0, 4.0 * PI, |_| a_tau);
            Ok(reduce_half(integral / (4.0 * PI)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_from_mu(x, mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmuConsistency {
    pub dmu_curvature: [f64; 3],
    pub dmu_fd: [f64; 3],
    pub deviation: f64,
    /// `r² |dμ|` with `r = |x|`.
    pub r2_dmu: f64,
}

/// Gradient of `μ` from the fiber-averaged curvature against a centered difference.
pub fn dmu_consistency(space: &GhSpace, bundle: &LineBundle, x: &Vector3<f64>, h: f64) -> Result<DmuConsistency> {
    let patch = PatchChart::auto(space, x);
    let f = curvature_form(space, bundle, x)?;
    let theta = space.coframe(x, &patch)?;
    let gl = GaussLegendre::new(FIBER_NODES)?;
    let mut dmu_curvature = [0.0; 3];
    for (k, out) in dmu_curvature.iter_mut().enumerate() {
        // da(∂_k, ∂_τ) = F_ab e^a_k e^b_τ
        let mut comp = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                comp += f.0[a][b] * theta[(a, k)] * theta[(b, 3)];
            }
        }
        *out = gl.integrate(0.0, 4.0 * PI, |_| comp) / (4.0 * PI);
    }
    let g = gradient_of::<1, _>(|p| mu_unreduced(space, bundle, p).map(|m| [m]), x, h)?;
    let dmu_fd = [g[0][0], g[1][0], g[2][0]];
    let deviation = (0..3).fold(0.0_f64, |m, k| m.max((dmu_curvature[k] - dmu_fd[k]).abs()));
    let norm = Vector3::from(dmu_curvature).norm();
    Ok(DmuConsistency {
        dmu_curvature,
        dmu_fd,
        deviation,
        r2_dmu: x.norm_squared() * norm,
    })
}

/// Samples of `μ_j`, `κ` and `r²|dμ_j|` along a ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayProfile {
    pub radii: Vec<f64>,
    /// `mu[i][j]`: sample `i`, summand `j`.
    pub mu: Vec<Vec<f64>>,
    pub kappa: Vec<Option<f64>>,
    pub r2_dmu: Vec<Vec<f64>>,
    /// Largest `r²|dμ|` over samples and summands.
    pub sup_r2_dmu: f64,
    /// Log-log slope of `r²|dμ|` against `r` per summand; near zero when bounded.
    pub r2_dmu_trend: Vec<Option<f64>>,
}

pub fn ray_profile(
    space: &GhSpace,
    bundles: &InstantonBundle,
    direction: &Vector3<f64>,
    r_range: (f64, f64),
    n_samples: usize,
    exec: Exec,
) -> Result<RayProfile> {
    let dir = direction
        .try_normalize(0.0)
        .ok_or_else(|| Error::InvalidParameter("ray direction must be nonzero".into()))?;
    let radii = geomspace(r_range.0, r_range.1, n_samples);
    let rows = exec.map(&radii, |&r| -> Result<(HolonomySample, Vec<f64>)> {
        let x = r * dir;
        let s = holonomy_mu(space, bundles, &x)?;
        let d = bundles
            .summands
            .iter()
            .map(|b| dmu_consistency(space, b, &x, 1e-3 * r).map(|c| c.r2_dmu))
            .collect::<Result<Vec<f64>>>()?;
        Ok((s, d))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mu: Vec<Vec<f64>> = rows.iter().map(|(s, _)| s.mu.clone()).collect();
    let kappa: Vec<Option<f64>> = rows.iter().map(|(s, _)| s.kappa).collect();
    let r2_dmu: Vec<Vec<f64>> = rows.into_iter().map(|(_, d)| d).collect();
    let sup_r2_dmu = r2_dmu.iter().flatten().fold(0.0_f64, |m, v| m.max(*v));
    let r2_dmu_trend = (0..bundles.rank())
        .map(|j| {
            let ys: Vec<f64> = r2_dmu.iter().map(|row| row[j]).collect();
            log_log_slope(&radii, &ys).ok().map(|f| f.slope)
        })
        .collect();
    Ok(RayProfile {
        radii,
        mu,
        kappa,
        r2_dmu,
        sup_r2_dmu,
        r2_dmu_trend,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticFit {
    /// `2l c₀` reduced to `[0, l)`.
    pub lambda_hat: f64,
    pub theta_hat: f64,
    pub c0: f64,
    pub fit_max_residual: f64,
    /// Allowed residual from the neglected `1/r²` term.
    pub fit_envelope: f64,
    pub r_range: (f64, f64),
    /// Nearest integer to the flux at `flux_radius`.
    pub m_hat: i64,
    pub flux: f64,
    /// Flux at `2 · flux_radius` minus flux at `flux_radius`.
    pub flux_radius_drift: f64,
    /// `|m̂ − Σ v_σ|`.
    pub m_hat_vs_charges: i64,
    /// `m̂ − (2lϑ̂ + kλ/l)`: relation implied by `μ = H/(2V)`.
    pub exact_model_relation_residual: f64,
    /// `m̂ − (lϑ̂ + kλ)`: relation as written for the general case.
    pub stated_relation_residual: f64,
}

/// `(1/2π) ∮_{S²_R} −½ *₃dH`, which equals `Σ v_σ` for `R` beyond the centers.
pub fn eta_flux(space: &GhSpace, bundle: &LineBundle, radius: f64, rule: &SphereRule, exec: Exec) -> Result<f64> {
    let flux = rule.try_integrate(exec, &Vector3::zeros(), radius, |p, n| {
        bundle.harmonic(space, p).map(|(_, gh)| -0.5 * gh.dot(n))
    })?;
    Ok(flux / (2.0 * PI))
}

/// Unwraps a sequence defined modulo `period` into a continuous one.
pub fn unwrap(values: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut offset = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            let prev = values[i - 1];
            let jump = v - prev;
            offset -= period * (jump / period).round();
        }
        out.push(v + offset);
    }
    out
}

pub fn asymptotic_fit_and_flux(
    space: &GhSpace,
    bundle: &LineBundle,
    direction: &Vector3<f64>,
    r_range: (f64, f64),
    n_samples: usize,
    flux_radius: f64,
    exec: Exec,
) -> Result<AsymptoticFit> {
    let dir = direction
        .try_normalize(0.0)
        .ok_or_else(|| Error::InvalidParameter("ray direction must be nonzero".into()))?;
    let scale = space.extent().max(space.diameter()).max(1.0);
    if r_range.0 < 10.0 * scale {
        return Err(Error::Radius(format!(
            "fit range must start beyond 10x the center-set scale {scale}, got {}",
            r_range.0
        )));
    }
    if flux_radius < 10.0 * scale {
        return Err(Error::Radius(format!("flux radius {flux_radius} too small")));
    }
    let radii = geomspace(r_range.0, r_range.1, n_samples);
    let single = InstantonBundle::new(vec![bundle.clone()]);
    let mu = exec
        .map(&radii, |&r| holonomy_mu(space, &single, &(r * dir)).map(|s| s.mu[0]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mu = unwrap(&mu, 0.5);
    let inv: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let fit = fit_line(&inv, &mu)?;
    let l = space.l();
    let k = space.k() as f64;
    let (c0, c1) = (fit.intercept, fit.slope);
    let envelope = 10.0 * (c1.abs() * (k / l + scale) + bundle.v.iter().map(|v| v.abs()).sum::<i64>() as f64 + 1.0)
        / (r_range.0 * r_range.0);
    if fit.max_residual > envelope {
        return Err(Error::Fit(format!(
            "asymptotic fit residual {:.3e} exceeds the 1/r^2 envelope {envelope:.3e}",
            fit.max_residual
        )));
    }
    let lambda_hat = (2.0 * l * c0).rem_euclid(l);
    let rule = SphereRule::new(16, 32)?;
    let flux = eta_flux(space, bundle, flux_radius, &rule, exec)?;
    let flux2 = eta_flux(space, bundle, 2.0 * flux_radius, &rule, exec)?;
    let m_hat = flux.round() as i64;
    let lambda = bundle.lambda;
    Ok(AsymptoticFit {
        lambda_hat,
        theta_hat: c1,
        c0,
        fit_max_residual: fit.max_residual,
        fit_envelope: envelope,
        r_range,
        m_hat,
        flux,
        flux_radius_drift: flux2 - flux,
        m_hat_vs_charges: (m_hat - bundle.m()).abs(),
        exact_model_relation_residual: m_hat as f64 - (2.0 * l * c1 + k * lambda / l),
        stated_relation_residual: m_hat as f64 - (l * c1 + k * lambda),
    })
}

/// Sum of `μ` representatives, used by determinism checks.
pub fn mu_checksum(samples: &[HolonomySample]) -> f64 {
    let all: Vec<f64> = samples.iter().flat_map(|s| s.mu.iter().copied()).collect();
    pairwise_sum(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;

    fn tn1() -> GhSpace {
        GhSpace::new(1.0, &[[0.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn mu_at_unit_radius() {
        let b = InstantonBundle::new(vec![LineBundle::basic(1, 0.3)]);
        let s = holonomy_mu(&tn1(), &b, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((s.mu[0] - 0.075).abs() < 1e-15);
        assert!(s.kappa.is_none());
    }

    #[test]
    fn fiber_integral_agrees_in_both_patches() {
        let sp = GhSpace::new(1.0, &[[0.0, 0.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        let b = InstantonBundle::new(vec![
            LineBundle::new(0.3, vec![1, 2]).unwrap(),
            LineBundle::new(0.7, vec![0, -1]).unwrap(),
        ]);
        let x = Vector3::new(0.4, 2.0, -0.3);
        let a = holonomy_mu(&sp, &b, &x).unwrap();
        for sides in [vec![Side::North, Side::South], vec![Side::South, Side::South]] {
            let f = holonomy_mu_fiber(&sp, &b, &x, &PatchChart::with_sides(sides)).unwrap();
            for (p, q) in a.mu.iter().zip(&f.mu) {
                assert!((p - q).abs() < 1e-12);
            }
            assert!((a.kappa.unwrap() - f.kappa.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_brute_force() {
        let mu = [0.15, 0.35];
        let mut best = f64::INFINITY;
        for n in -3..=3 {
            best = best.min((2.0 * mu[0] - 2.0 * mu[1] - n as f64).abs());
        }
        assert!((kappa(&mu).unwrap() - best).abs() < 1e-15);
        assert!((best - 0.4).abs() < 1e-15);
    }

    #[test]
    fn dmu_matches_finite_differences() {
        let sp = GhSpace::new(1.0, &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.0]]).unwrap();
        let b = LineBundle::new(0.4, vec![1, 2]).unwrap();
        let c = dmu_consistency(&sp, &b, &Vector3::new(2.0, -1.0, 3.0), 1e-3).unwrap();
        assert!(c.deviation < 1e-9, "{c:?}");
        let flat = dmu_consistency(&sp, &LineBundle::flat(2), &Vector3::new(2.0, -1.0, 3.0), 1e-3).unwrap();
        assert_eq!(flat.dmu_curvature, [0.0; 3]);
    }

    #[test]
    fn reduce_half_range() {
        for v in [-1.3, -0.5, 0.0, 0.49, 0.5, 2.26] {
            let r = reduce_half(v);
            assert!((0.0..0.5).contains(&r));
            assert!(dist_to_integer(2.0 * (r - v)) < 1e-12);
        }
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap(&[0.45, 0.49, 0.02, 0.06], 0.5);
        assert!((u[2] - 0.52).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_lambda_and_charge() {
        let sp = GhSpace::new(1.0, &[[0.0, 0.0, 0.3], [0.2, -0.4, 0.0]]).unwrap();
        let b = LineBundle::new(0.3, vec![1, 2]).unwrap();
        let fit =
            asymptotic_fit_and_flux(&sp, &b, &Vector3::new(0.3, 0.5, 1.0), (1e5, 1e7), 16, 1e3, Exec::Sequential)
                .unwrap();
        assert!((fit.lambda_hat - 0.3).abs() < 1e-4, "{fit:?}");
        assert_eq!(fit.m_hat, 3);
        assert!((fit.theta_hat - (3.0 - 0.6) / 2.0).abs() < 1e-4, "{fit:?}");
        assert!(fit.exact_model_relation_residual.abs() < 1e-3);
    }
}
