//! Spin connection of the conformally rescaled metric `g' = g / (V r²)`.
//!
//! In coordinates `(y, φ, θ, τ)` with `r = e^y`, `φ` the polar and `θ` the
//! azimuthal angle, `g' = dy² + dφ² + sin²φ dθ² + e^{−2y} V^{−2} (dτ + ω)²`
//! with coframe `e¹ = dy`, `e² = dφ`, `e³ = sin φ dθ`, `e⁴ = e^{−y} V^{−1} (dτ + ω)`.

use nalgebra::{Matrix4, Vector3};
use serde::Serialize;

use super::frame_connection::{frame_connection, FrameConnection};
use super::{GhSpace, PatchChart};
use crate::error::{Error, Result};

/// One coefficient compared with its large-`r` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalEntry {
    /// Label such as `"g^4_23"`.
    pub label: String,
    /// One-based `(a, b, c)` of `γ^a_bc`.
    pub index: [usize; 3],
    pub computed: f64,
    pub expected: f64,
    /// Unit in which the residual is measured: 1, or `e^{−y}` for fiber-mixing terms.
    pub scale: f64,
    /// `|computed − expected| / scale`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalCheck {
    pub y: f64,
    pub phi: f64,
    pub theta: f64,
    pub entries: Vec<ConformalEntry>,
    pub connection: FrameConnection,
}

impl ConformalCheck {
    pub fn entry(&self, a: usize, b: usize, c: usize) -> Option<&ConformalEntry> {
        self.entries.iter().find(|e| e.index == [a, b, c])
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.residual))
    }
}

fn cartesian(q: &[f64; 4]) -> (Vector3<f64>, [Vector3<f64>; 3]) {
    let (r, phi, theta) = (q[0].exp(), q[1], q[2]);
    let (sp, cp, st, ct) = (phi.sin(), phi.cos(), theta.sin(), theta.cos());
    let x = Vector3::new(r * sp * ct, r * sp * st, r * cp);
    let jac = [
        x,
        Vector3::new(r * cp * ct, r * cp * st, -r * sp),
        Vector3::new(-r * sp * st, r * sp * ct, 0.0),
    ];
    (x, jac)
}

fn conformal_coframe(space: &GhSpace, patch: &PatchChart, q: &[f64; 4]) -> Result<Matrix4<f64>> {
    let (x, jac) = cartesian(q);
    let v = space.potential(&x)?;
    let w = space.omega(&x, patch)?;
    let s = (-q[0]).exp() / v;
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    m[(2, 2)] = q[1].sin();
    for (mu, j) in jac.iter().enumerate() {
        m[(3, mu)] = s * w.dot(j);
    }
    m[(3, 3)] = s;
    Ok(m)
}

/// Finite-difference `γ^a_bc` of `g'` at `(y, φ, θ)` against their large-`r` forms.
///
/// The expected fiber-mixing coefficients are `±(k / 2l) e^{−y}`.
pub fn conformal_spin_connection_check(
    space: &GhSpace,
    y: f64,
    phi: f64,
    theta: f64,
    y_floor: f64,
) -> Result<ConformalCheck> {
    if y < y_floor {
        return Err(Error::Radius(format!("y = {y} is below the floor {y_floor}")));
    }
    if !(phi > 0.0 && phi < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!("polar angle {phi} must lie in (0, pi)")));
    }
    let q = [y, phi, theta, 0.0];
    let (x, _) = cartesian(&q);
    let patch = PatchChart::auto(space, &x);
    let h = 1e-3;
    let conn = frame_connection(|p| conformal_coframe(space, &patch, p), &q, h)?;
    let ey = (-y).exp();
    let c = space.k() as f64 * ey / space.l();
    let table: [(usize, usize, usize, f64, f64); 6] = [
        (1, 4, 4, 1.0, 1.0),
        (2, 3, 3, -1.0 / phi.tan(), 1.0),
        (4, 2, 3, 0.5 * c, ey),
        (4, 3, 2, -0.5 * c, ey),
        (3, 4, 2, -0.5 * c, ey),
        (3, 2, 4, -0.5 * c, ey),
    ];
    let entries = table
        .iter()
        .map(|&(a, b, cc, expected, scale)| {
            let computed = conn.get1(a, b, cc);
            ConformalEntry {
                label: format!("g^{a}_{b}{cc}"),
                index: [a, b, cc],
                computed,
                expected,
                scale,
                residual: (computed - expected).abs() / scale,
            }
        })
        .collect();
    Ok(ConformalCheck {
        y,
        phi,
        theta,
        entries,
        connection: conn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taub_nut_radial_coefficient() {
        let s = GhSpace::new(1.0, &[[0.0, 0.0, 0.0]]).unwrap();
        let chk = conformal_spin_connection_check(&s, 6.0, 1.0, 0.4, 3.0).unwrap();
        assert!(chk.entry(1, 4, 4).unwrap().residual < 5e-3);
        assert!(chk.entry(2, 3, 3).unwrap().residual < 1e-8);
    }

    #[test]
    fn two_centers_fiber_mixing() {
        let s = GhSpace::new(1.0, &[[0.0, 0.0, 0.5], [0.3, -0.2, -0.4]]).unwrap();
        let chk = conformal_spin_connection_check(&s, 7.0, 1.1, 2.0, 3.0).unwrap();
        for e in &chk.entries[2..] {
            assert!(e.residual < 5e-2, "{e:?}");
        }
    }

    #[test]
    fn flat_space_has_no_fiber_mixing() {
        let s = GhSpace::flat(1.0).unwrap();
        let chk = conformal_spin_connection_check(&s, 4.0, 0.8, 0.1, 3.0).unwrap();
        for e in &chk.entries[2..] {
            assert!(e.computed.abs() < 1e-9, "{e:?}");
        }
        assert!(chk.entry(1, 4, 4).unwrap().residual < 1e-9);
    }

    #[test]
    fn floor_is_enforced() {
        let s = GhSpace::flat(1.0).unwrap();
        assert!(matches!(
            conformal_spin_connection_check(&s, 1.0, 0.8, 0.1, 3.0),
            Err(Error::Radius(_))
        ));
    }
}
