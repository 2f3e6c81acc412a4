//! The Gibbons–Hawking metric on multi-Taub-NUT space.
//!
//! The space is a circle bundle over `ℝ³` minus the NUT centers with metric
//! `V dx² + V⁻¹ (dτ + ω)²`, where `V = l + Σ_σ 1/|x − ν_σ|`, `dω = *₃dV`
//! and `τ ∈ [0, 4π)`.
//!
//! The one-form `ω` is only defined on patches. Each center carries a Dirac
//! monopole potential in one of two gauges:
//!
//! * [`Side::North`]: `(cos θ_σ − 1) dφ_σ`, regular on the positive axis ray and
//!   singular on the negative one;
//! * [`Side::South`]: `(cos θ_σ + 1) dφ_σ`, singular on the positive ray.
//!
//! Angles are measured about a fixed axis (default `+z`) through each center.
//! Passing from south to north at a center shifts the fiber coordinate by
//! `τ_N = τ_S + 2 φ_σ`, so `dτ + ω` is the same global one-form in every chart.

mod conformal;
mod curvature;
mod frame_connection;
mod pontryagin;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conformal::{conformal_spin_connection_check, ConformalCheck, ConformalEntry};
pub use curvature::{
    hyperkahler_residuals, riemann_fd, riemann_fd_with_threshold, riemann_single, CurvatureTensor4,
    HyperkahlerResiduals, Riemann,
};
pub use frame_connection::{frame_connection, FrameConnection};
pub use pontryagin::{grad_g, pontryagin_number, PontryaginOptions, PontryaginResult};

/// Default radius around NUT centers inside which pointwise evaluation is refused.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-6;
/// Default `sin θ_σ` below which a point counts as sitting on an active Dirac string.
pub const DEFAULT_STRING_SIN_THRESHOLD: f64 = 1e-6;

/// A multi-Taub-NUT space `TN_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhSpace {
    l: f64,
    centers: Vec<Vector3<f64>>,
    exclusion_radius: f64,
    string_sin_threshold: f64,
}

impl GhSpace {
    pub fn new(l: f64, centers: &[[f64; 3]]) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!("l must be positive, got {l}")));
        }
        let centers: Vec<Vector3<f64>> = centers.iter().map(|c| Vector3::from(*c)).collect();
        if centers.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("center coordinates must be finite".into()));
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                if (centers[i] - centers[j]).norm() <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "centers pairwise distinct: centers {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            l,
            centers,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
            string_sin_threshold: DEFAULT_STRING_SIN_THRESHOLD,
        })
    }

    /// Flat `ℝ³ × S¹` (no centers).
    pub fn flat(l: f64) -> Result<Self> {
        Self::new(l, &[])
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Self {
        self.exclusion_radius = radius;
        self
    }

    pub fn with_string_threshold(mut self, sin_threshold: f64) -> Self {
        self.string_sin_threshold = sin_threshold;
        self
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vector3<f64>] {
        &self.centers
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    /// Largest distance between two centers (0 for k ≤ 1).
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Largest distance of a center from the origin.
    pub fn extent(&self) -> f64 {
        self.centers.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Smallest distance between two centers, `None` for k ≤ 1.
    pub fn min_separation(&self) -> Option<f64> {
        let mut d: Option<f64> = None;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                let s = (a - b).norm();
                d = Some(d.map_or(s, |m: f64| m.min(s)));
            }
        }
        d
    }

    /// Distance from `x` to the nearest center (infinite when k = 0).
    pub fn distance_to_centers(&self, x: &Vector3<f64>) -> f64 {
        self.centers
            .iter()
            .map(|c| (x - c).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_point(&self, x: &Vector3<f64>) -> Result<()> {
        for (i, c) in self.centers.iter().enumerate() {
            let d = (x - c).norm();
            if d < self.exclusion_radius || d == 0.0 {
                return Err(Error::PointAtCenter {
                    center: i,
                    distance: d,
                    radius: self.exclusion_radius,
                });
            }
        }
        Ok(())
    }

    pub fn potential(&self, x: &Vector3<f64>) -> Result<f64> {
        self.potential_and_gradient(x).map(|(v, _)| v)
    }

    /// `V` and `∇V` from the closed forms.
    pub fn potential_and_gradient(&self, x: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
        self.check_point(x)?;
        Ok(harmonic_sum(self.l, &self.centers, None, x))
    }

    /// Hessian `∂_i ∂_j V` from the closed form.
    pub fn potential_hessian(&self, x: &Vector3<f64>) -> Result<Matrix3<f64>> {
        self.check_point(x)?;
        Ok(harmonic_hessian(&self.centers, None, x))
    }

    /// The monopole one-form `ω` in the given patch, Cartesian components.
    pub fn omega(&self, x: &Vector3<f64>, patch: &PatchChart) -> Result<Vector3<f64>> {
        self.check_point(x)?;
        patch.check_len(self.k())?;
        let ones = vec![1.0; self.k()];
        self.weighted_omega(x, patch, &ones)
    }

    /// `Σ_σ q_σ ω_σ` for per-center weights `q_σ`.
    pub(crate) fn weighted_omega(
        &self,
        x: &Vector3<f64>,
        patch: &PatchChart,
        weights: &[f64],
    ) -> Result<Vector3<f64>> {
        let mut w = Vector3::zeros();
        for (s, (c, q)) in self.centers.iter().zip(weights).enumerate() {
            let d = x - c;
            let r = d.norm();
            let z = d.dot(&patch.axis);
            let sin_theta = (d - z * patch.axis).norm() / r;
            let a_cross_d = patch.axis.cross(&d);
            let side = patch.sides[s];
            let on_string_side = match side {
                Side::North => z < 0.0,
                Side::South => z > 0.0,
            };
            if on_string_side && sin_theta < self.string_sin_threshold {
                return Err(Error::NearDiracString {
                    center: s,
                    distance: r * sin_theta,
                });
            }
            // (cos θ ∓ 1)/(r² sin² θ) rewritten without cancellation.
            let coeff = match side {
                Side::North => -1.0 / (r * (r + z)),
                Side::South => 1.0 / (r * (r - z)),
            };
            if *q != 0.0 {
                w += *q * coeff * a_cross_d;
            }
        }
        Ok(w)
    }

    /// Coordinate metric components in `(x, y, z, τ)` order.
    pub fn metric_coords(&self, x: &Vector3<f64>, patch: &PatchChart) -> Result<Matrix4<f64>> {
        let coframe = self.coframe(x, patch)?;
        Ok(coframe.transpose() * coframe)
    }

    /// Orthonormal coframe `e^a_μ` (row `a`, column `μ`): `e^i = √V dx^i`, `e⁴ = (dτ + ω)/√V`.
    pub fn coframe(&self, x: &Vector3<f64>, patch: &PatchChart) -> Result<Matrix4<f64>> {
        let v = self.potential(x)?;
        let omega = self.omega(x, patch)?;
        Ok(coframe_from(v, &omega))
    }

    pub fn metric_and_frame(
        &self,
        x: &Vector3<f64>,
        tau: f64,
        patch: &PatchChart,
    ) -> Result<FramePoint> {
        let (v, grad_v) = self.potential_and_gradient(x)?;
        let omega = self.omega(x, patch)?;
        let coframe = coframe_from(v, &omega);
        Ok(FramePoint {
            x: *x,
            tau: tau.rem_euclid(4.0 * PI),
            patch: patch.clone(),
            v,
            grad_v,
            omega,
            coframe,
        })
    }
}

fn coframe_from(v: f64, omega: &Vector3<f64>) -> Matrix4<f64> {
    let s = v.sqrt();
    Matrix4::new(
        s,
        0.0,
        0.0,
        0.0,
        0.0,
        s,
        0.0,
        0.0,
        0.0,
        0.0,
        s,
        0.0,
        omega.x / s,
        omega.y / s,
        omega.z / s,
        1.0 / s,
    )
}

/// `c + Σ_σ q_σ / |x − ν_σ|` and its gradient; `q_σ = 1` when `weights` is `None`.
pub fn harmonic_sum(
    constant: f64,
    centers: &[Vector3<f64>],
    weights: Option<&[f64]>,
    x: &Vector3<f64>,
) -> (f64, Vector3<f64>) {
    let mut v = constant;
    let mut g = Vector3::zeros();
    for (s, c) in centers.iter().enumerate() {
        let q = weights.map_or(1.0, |w| w[s]);
        if q == 0.0 {
            continue;
        }
        let d = x - c;
        let r = d.norm();
        v += q / r;
        g -= q * d / (r * r * r);
    }
    (v, g)
}

pub fn harmonic_hessian(
    centers: &[Vector3<f64>],
    weights: Option<&[f64]>,
    x: &Vector3<f64>,
) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (s, c) in centers.iter().enumerate() {
        let q = weights.map_or(1.0, |w| w[s]);
        let d = x - c;
        let r2 = d.norm_squared();
        let r5 = r2 * r2 * r2.sqrt();
        h += q * (3.0 * d * d.transpose() - r2 * Matrix3::identity()) / r5;
    }
    h
}

/// Gauge choice of the monopole potential at one center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Regular on the positive axis ray; Dirac string on the negative ray.
    North,
    /// Regular on the negative axis ray; Dirac string on the positive ray.
    South,
}

/// Per-center patch choice together with the axis the angles are measured from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchChart {
    axis: Vector3<f64>,
    basis: (Vector3<f64>, Vector3<f64>),
    sides: Vec<Side>,
}

impl PatchChart {
    pub fn uniform(k: usize, side: Side) -> Self {
        Self::with_sides(vec![side; k])
    }

    pub fn north(k: usize) -> Self {
        Self::uniform(k, Side::North)
    }

    pub fn south(k: usize) -> Self {
        Self::uniform(k, Side::South)
    }

    pub fn with_sides(sides: Vec<Side>) -> Self {
        let axis = Vector3::z();
        Self {
            axis,
            basis: orthonormal_completion(&axis),
            sides,
        }
    }

    /// Re-orients the chart about `axis` (normalised).
    pub fn with_axis(mut self, axis: Vector3<f64>) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("patch axis must be a nonzero vector".into()));
        }
        self.axis = axis / n;
        self.basis = orthonormal_completion(&self.axis);
        Ok(self)
    }

    /// Chooses, per center, the gauge whose Dirac string points away from `x`.
    pub fn auto(space: &GhSpace, x: &Vector3<f64>) -> Self {
        Self::auto_about(space, x, Vector3::z())
    }

    pub fn auto_about(space: &GhSpace, x: &Vector3<f64>, axis: Vector3<f64>) -> Self {
        let axis = axis.normalize();
        let sides = space
            .centers()
            .iter()
            .map(|c| {
                if (x - c).dot(&axis) >= 0.0 {
                    Side::North
                } else {
                    Side::South
                }
            })
            .collect();
        Self {
            axis,
            basis: orthonormal_completion(&axis),
            sides,
        }
    }

    pub fn axis(&self) -> &Vector3<f64> {
        &self.axis
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    /// Short identifier such as `"NSN"`.
    pub fn id(&self) -> String {
        self.sides
            .iter()
            .map(|s| match s {
                Side::North => 'N',
                Side::South => 'S',
            })
            .collect()
    }

    fn check_len(&self, k: usize) -> Result<()> {
        if self.sides.len() != k {
            return Err(Error::InvalidParameter(format!(
                "patch chart has {} sides for {k} centers",
                self.sides.len()
            )));
        }
        Ok(())
    }

    /// Azimuth `φ_σ ∈ (−π, π]` of `x` about the axis through `center`.
    pub fn azimuth(&self, center: &Vector3<f64>, x: &Vector3<f64>) -> f64 {
        let d = x - center;
        d.dot(&self.basis.1).atan2(d.dot(&self.basis.0))
    }

    /// Distance from `x` to the nearest Dirac string that is active in this chart.
    pub fn string_distance(&self, space: &GhSpace, x: &Vector3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for (c, side) in space.centers().iter().zip(&self.sides) {
            let d = x - c;
            let z = d.dot(&self.axis);
            let along = match side {
                Side::North => -z,
                Side::South => z,
            };
            let dist = if along > 0.0 {
                (d - z * self.axis).norm()
            } else {
                d.norm()
            };
            best = best.min(dist);
        }
        best
    }

    /// Shift `s` with `τ_other = τ_self + s` at `x`.
    pub fn tau_shift_to(&self, other: &PatchChart, space: &GhSpace, x: &Vector3<f64>) -> Result<f64> {
        self.check_len(space.k())?;
        other.check_len(space.k())?;
        if (self.axis - other.axis).norm() > 1e-15 {
            return Err(Error::InvalidParameter(
                "patch transition requires a common axis".into(),
            ));
        }
        let mut shift = 0.0;
        for (s, c) in space.centers().iter().enumerate() {
            let phi = self.azimuth(c, x);
            shift += match (self.sides[s], other.sides[s]) {
                (Side::South, Side::North) => 2.0 * phi,
                (Side::North, Side::South) => -2.0 * phi,
                _ => 0.0,
            };
        }
        Ok(shift)
    }
}

/// Unit vectors `(b₁, b₂)` with `b₁ × b₂ = axis`.
fn orthonormal_completion(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let trial = if axis.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let b1 = (trial - trial.dot(axis) * axis).normalize();
    let b2 = axis.cross(&b1);
    (b1, b2)
}

/// A point of `TN_k` with the frame data evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePoint {
    pub x: Vector3<f64>,
    /// Fiber coordinate in `[0, 4π)`.
    pub tau: f64,
    pub patch: PatchChart,
    pub v: f64,
    pub grad_v: Vector3<f64>,
    pub omega: Vector3<f64>,
    /// `e^a_μ`, row `a`, column `μ` in `(x, y, z, τ)` order.
    pub coframe: Matrix4<f64>,
}

impl FramePoint {
    pub fn metric(&self) -> Matrix4<f64> {
        self.coframe.transpose() * self.coframe
    }

    /// Dual frame: column `a` holds the components of `e_a`.
    pub fn frame(&self) -> Matrix4<f64> {
        let s = self.v.sqrt();
        let mut e = Matrix4::zeros();
        for i in 0..3 {
            e[(i, i)] = 1.0 / s;
            e[(3, i)] = -self.omega[i] / s;
        }
        e[(3, 3)] = s;
        e
    }

    /// `√det g`, which equals `V`.
    pub fn volume_density(&self) -> f64 {
        self.metric().determinant().abs().sqrt()
    }

    /// `Σ_a e^a ⊗ e^a − g`, largest absolute component.
    pub fn frame_identity_residual(&self) -> f64 {
        let g = closed_form_metric(self.v, &self.omega);
        (self.metric() - g).abs().max()
    }
}

/// `g_ij = V δ_ij + ω_i ω_j / V`, `g_iτ = ω_i / V`, `g_ττ = 1 / V`.
pub fn closed_form_metric(v: f64, omega: &Vector3<f64>) -> Matrix4<f64> {
    let mut g = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] = omega[i] * omega[j] / v + if i == j { v } else { 0.0 };
        }
        g[(i, 3)] = omega[i] / v;
        g[(3, i)] = omega[i] / v;
    }
    g[(3, 3)] = 1.0 / v;
    g
}
