//! Bochner–Weitzenböck identity for the curvature two-form.
//!
//! A closed anti-self-dual `F` is harmonic, so
//! `∇*∇F − Σ_{i,j} e^i ∧ ι_{e_j} R(e_i, e_j) F = ΔF = 0`.
//! Both terms are assembled from finite differences; the residual measures
//! how well they cancel.

use nalgebra::Vector3;
use serde::Serialize;

use super::{covariant_derivative, curvature_form, gh_frame_connection, LineBundle};
use crate::error::Result;
use crate::fd::gradient_of;
use crate::forms::TwoForm;
use crate::geometry::{riemann_fd, GhSpace, PatchChart};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BochnerResult {
    pub rough_laplacian_norm: f64,
    pub curvature_term_norm: f64,
    pub residual_norm: f64,
    /// Residual over the larger of the two term norms.
    pub relative: f64,
    pub step: f64,
}

pub fn bochner_residual(space: &GhSpace, bundle: &LineBundle, x: &Vector3<f64>, step: f64) -> Result<BochnerResult> {
    let patch = PatchChart::auto(space, x);
    let curv = riemann_fd(space, x, &patch, step)?;
    let f = curvature_form(space, bundle, x)?;
    let flat = |t: &[TwoForm; 4]| {
        let mut o = [0.0; 64];
        for c in 0..4 {
            for a in 0..4 {
                for b in 0..4 {
                    o[c * 16 + a * 4 + b] = t[c].0[a][b];
                }
            }
        }
        o
    };
    let t = covariant_derivative(space, bundle, x, &patch, step)?;
    let dt = gradient_of::<64, _>(
        |p| covariant_derivative(space, bundle, p, &patch, step).map(|t| flat(&t)),
        x,
        step,
    )?;
    let gamma = gh_frame_connection(space, x, &patch, step)?.gamma;
    let e = space.metric_and_frame(x, 0.0, &patch)?.frame();

    let mut lap = TwoForm::zero();
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for c in 0..4 {
                let mut v: f64 = (0..3).map(|mu| e[(mu, c)] * dt[mu][c * 16 + a * 4 + b]).sum();
                for d in 0..4 {
                    v -= gamma[d][c][c] * t[d].0[a][b]
                        + gamma[d][c][a] * t[c].0[d][b]
                        + gamma[d][c][b] * t[c].0[a][d];
                }
                s += v;
            }
            lap.0[a][b] = -s;
        }
    }

    let r = &curv.r;
    // (R_ij F)_ab = −Σ_d R_daij F_db − Σ_d R_dbij F_ad
    let rf = |i: usize, j: usize, a: usize, b: usize| -> f64 {
        (0..4)
            .map(|d| -r[d][a][i][j] * f.0[d][b] - r[d][b][i][j] * f.0[a][d])
            .sum()
    };
    let mut term = TwoForm::zero();
    for a in 0..4 {
        for b in 0..4 {
            term.0[a][b] = (0..4).map(|j| rf(a, j, j, b) - rf(b, j, j, a)).sum();
        }
    }
    let residual = lap.sub(&term);
    let scale = lap.norm().max(term.norm());
    Ok(BochnerResult {
        rough_laplacian_norm: lap.norm(),
        curvature_term_norm: term.norm(),
        residual_norm: residual.norm(),
        relative: if scale > 0.0 { residual.norm() / scale } else { 0.0 },
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_instanton_satisfies_bochner() {
        let s = GhSpace::new(1.0, &[[0.0, 0.0, 0.0]]).unwrap();
        let b = LineBundle::basic(1, 2.5);
        let res = bochner_residual(&s, &b, &Vector3::new(4.0, 0.0, 0.0), 0.05).unwrap();
        assert!(res.rough_laplacian_norm > 1e-4, "{res:?}");
        assert!(res.relative < 1e-3, "{res:?}");
    }

    #[test]
    fn flat_space_residual_vanishes() {
        let s = GhSpace::flat(1.0).unwrap();
        let b = LineBundle::basic(0, 0.4);
        let res = bochner_residual(&s, &b, &Vector3::new(1.0, 2.0, 3.0), 0.1).unwrap();
        assert_eq!(res.residual_norm, 0.0);
    }
}
