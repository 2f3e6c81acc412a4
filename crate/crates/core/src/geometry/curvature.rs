//! Riemann curvature by nested finite differences of the coordinate metric.

use nalgebra::{Matrix4, Vector3};

use super::{closed_form_metric, GhSpace, PatchChart};
use crate::error::{Error, Result};
use crate::fd::gradient_of;
use crate::forms::{Orientation, TwoForm};

/// `R[a][b][c][d]`.
pub type Riemann = [[[[f64; 4]; 4]; 4]; 4];

type Christoffel = [[[f64; 4]; 4]; 4];

/// Minimum distance to centers and active strings, in units of the step.
pub const MIN_CLEARANCE_STEPS: f64 = 10.0;
/// Default relative threshold on the Richardson error estimate.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-4;

/// Riemann tensor `R_abcd = ⟨R(e_c, e_d) e_b, e_a⟩` in the orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor4 {
    pub r: Riemann,
    /// `max |R(h) − R(h/2)|` over components.
    pub error_estimate: f64,
    pub step: f64,
}

impl CurvatureTensor4 {
    pub fn zero() -> Self {
        Self {
            r: [[[[0.0; 4]; 4]; 4]; 4],
            error_estimate: 0.0,
            step: 0.0,
        }
    }

    /// `Ric_bd = Σ_a R_abad`.
    pub fn ricci(&self) -> [[f64; 4]; 4] {
        let mut ric = [[0.0; 4]; 4];
        for (b, row) in ric.iter_mut().enumerate() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|a| self.r[a][b][a][d]).sum();
            }
        }
        ric
    }

    /// `(Σ_{a<b, c<d} R_abcd²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                s += self.pair_form(a, b).norm().powi(2);
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.r
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// The 2-form `R_ab··` on the second index pair.
    pub fn pair_form(&self, a: usize, b: usize) -> TwoForm {
        TwoForm(self.r[a][b])
    }

    /// Largest violation of the pair antisymmetries and pair exchange.
    pub fn symmetry_residual(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let x = self.r[a][b][c][d];
                        m = m
                            .max((x + self.r[b][a][c][d]).abs())
                            .max((x + self.r[a][b][d][c]).abs())
                            .max((x - self.r[c][d][a][b]).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest violation of `R_abcd + R_acdb + R_adbc = 0`.
    pub fn bianchi_residual(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let s = self.r[a][b][c][d] + self.r[a][c][d][b] + self.r[a][d][b][c];
                        m = m.max(s.abs());
                    }
                }
            }
        }
        m
    }
}

/// Ricci and self-dual-projection norms, absolute and relative to `|R|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperkahlerResiduals {
    pub ricci_norm: f64,
    pub sd_projection_norm: f64,
    pub riemann_norm: f64,
    pub ricci_relative: f64,
    pub sd_relative: f64,
}

pub fn hyperkahler_residuals(curv: &CurvatureTensor4, orientation: Orientation) -> HyperkahlerResiduals {
    let ric = curv.ricci();
    let ricci_norm = ric.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let mut sd = 0.0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            sd += curv.pair_form(a, b).self_dual_part(orientation).norm().powi(2);
        }
    }
    let sd_projection_norm = sd.sqrt();
    let riemann_norm = curv.norm();
    let scale = if riemann_norm > 0.0 { riemann_norm } else { 1.0 };
    HyperkahlerResiduals {
        ricci_norm,
        sd_projection_norm,
        riemann_norm,
        ricci_relative: ricci_norm / scale,
        sd_relative: sd_projection_norm / scale,
    }
}

/// Riemann tensor at `x` with a Richardson pair `(step, step/2)`.
///
/// Fails with [`Error::StepTooLarge`] when the step is not small against the
/// distance to centers and active strings, or when the error estimate exceeds
/// `DEFAULT_RELATIVE_THRESHOLD · max |R|`.
pub fn riemann_fd(space: &GhSpace, x: &Vector3<f64>, patch: &PatchChart, step: f64) -> Result<CurvatureTensor4> {
    riemann_fd_with_threshold(space, x, patch, step, DEFAULT_RELATIVE_THRESHOLD)
}

pub fn riemann_fd_with_threshold(
    space: &GhSpace,
    x: &Vector3<f64>,
    patch: &PatchChart,
    step: f64,
    relative_threshold: f64,
) -> Result<CurvatureTensor4> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    space.check_point(x)?;
    space.omega(x, patch)?;
    let clearance = space
        .distance_to_centers(x)
        .min(patch.string_distance(space, x));
    if clearance < MIN_CLEARANCE_STEPS * step {
        return Err(Error::StepTooLarge {
            step,
            reason: format!(
                "clearance {clearance:.3e} to centers/strings is below {MIN_CLEARANCE_STEPS}x step"
            ),
        });
    }
    let coarse = riemann_single(space, x, patch, step)?;
    let fine = riemann_single(space, x, patch, 0.5 * step)?;
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let (rc, rf) = (coarse[a][b][c][d], fine[a][b][c][d]);
                    r[a][b][c][d] = (16.0 * rf - rc) / 15.0;
                    err = err.max((rf - rc).abs());
                    scale = scale.max(rf.abs());
                }
            }
        }
    }
    let threshold = relative_threshold * scale.max(1e-300);
    if err > threshold && err > 1e-12 {
        return Err(Error::StepTooLarge {
            step,
            reason: format!("Richardson estimate {err:.3e} exceeds {threshold:.3e}"),
        });
    }
    Ok(CurvatureTensor4 {
        r,
        error_estimate: err,
        step,
    })
}

/// Riemann tensor from a single step, orthonormal frame components.
pub fn riemann_single(space: &GhSpace, x: &Vector3<f64>, patch: &PatchChart, h: f64) -> Result<Riemann> {
    let gamma = christoffel(space, patch, x, h)?;
    let dgamma = gradient_of::<64, _>(
        |p| christoffel(space, patch, p, h).map(|g| flatten3(&g)),
        x,
        h,
    )?;
    let d = |mu: usize, rho: usize, nu: usize, sigma: usize| -> f64 {
        if mu == 3 {
            0.0
        } else {
            dgamma[mu][rho * 16 + nu * 4 + sigma]
        }
    };
    // R^ρ_{σμν}
    let mut up = [[[[0.0; 4]; 4]; 4]; 4];
    for rho in 0..4 {
        for sigma in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    let mut v = d(mu, rho, nu, sigma) - d(nu, rho, mu, sigma);
                    for lam in 0..4 {
                        v += gamma[rho][mu][lam] * gamma[lam][nu][sigma]
                            - gamma[rho][nu][lam] * gamma[lam][mu][sigma];
                    }
                    up[rho][sigma][mu][nu] = v;
                }
            }
        }
    }
    let point = space.metric_and_frame(x, 0.0, patch)?;
    let g = point.metric();
    let e = point.frame();
    let mut low = [[[[0.0; 4]; 4]; 4]; 4];
    for rho in 0..4 {
        for sigma in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    low[rho][sigma][mu][nu] = (0..4).map(|l| g[(rho, l)] * up[l][sigma][mu][nu]).sum();
                }
            }
        }
    }
    Ok(to_frame(&low, &e))
}

fn to_frame(t: &Riemann, e: &Matrix4<f64>) -> Riemann {
    // Contract one slot at a time.
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = [[[[0.0; 4]; 4]; 4]; 4];
        for i0 in 0..4 {
            for i1 in 0..4 {
                for i2 in 0..4 {
                    for i3 in 0..4 {
                        let idx = [i0, i1, i2, i3];
                        let mut v = 0.0;
                        for m in 0..4 {
                            let mut j = idx;
                            j[slot] = m;
                            v += cur[j[0]][j[1]][j[2]][j[3]] * e[(m, idx[slot])];
                        }
                        next[i0][i1][i2][i3] = v;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

fn flatten3(g: &Christoffel) -> [f64; 64] {
    let mut out = [0.0; 64];
    for (i, v) in g.iter().flatten().flatten().enumerate() {
        out[i] = *v;
    }
    out
}

fn metric_flat(space: &GhSpace, patch: &PatchChart, x: &Vector3<f64>) -> Result<[f64; 16]> {
    let v = space.potential(x)?;
    let w = space.omega(x, patch)?;
    let g = closed_form_metric(v, &w);
    let mut out = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            out[i * 4 + j] = g[(i, j)];
        }
    }
    Ok(out)
}

/// `Γ^ρ_{μν}` of the coordinate metric; the metric does not depend on `τ`.
pub(crate) fn christoffel(space: &GhSpace, patch: &PatchChart, x: &Vector3<f64>, h: f64) -> Result<Christoffel> {
    let v = space.potential(x)?;
    let w = space.omega(x, patch)?;
    let g = closed_form_metric(v, &w);
    let ginv = g
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular metric".into()))?;
    let dg = gradient_of::<16, _>(|p| metric_flat(space, patch, p), x, h)?;
    let dgc = |mu: usize, a: usize, b: usize| -> f64 {
        if mu == 3 {
            0.0
        } else {
            dg[mu][a * 4 + b]
        }
    };
    let mut gam = [[[0.0; 4]; 4]; 4];
    for rho in 0..4 {
        for mu in 0..4 {
            for nu in 0..4 {
                let mut s = 0.0;
                for sig in 0..4 {
                    s += ginv[(rho, sig)] * (dgc(mu, sig, nu) + dgc(nu, sig, mu) - dgc(sig, mu, nu));
                }
                gam[rho][mu][nu] = 0.5 * s;
            }
        }
    }
    Ok(gam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_space_has_no_curvature() {
        let s = GhSpace::flat(1.3).unwrap();
        let x = Vector3::new(0.4, -2.0, 1.0);
        let c = riemann_fd(&s, &x, &PatchChart::north(0), 0.05).unwrap();
        assert!(c.max_abs() < 1e-10);
        let h = hyperkahler_residuals(&c, Orientation::Standard);
        assert!(h.ricci_norm < 1e-10 && h.sd_projection_norm < 1e-10);
    }

    #[test]
    fn taub_nut_is_ricci_flat_and_anti_self_dual() {
        let s = GhSpace::new(1.0, &[[0.0, 0.0, 0.0]]).unwrap();
        let x = Vector3::new(3.0, 0.0, 0.0);
        let c = riemann_fd(&s, &x, &PatchChart::north(1), 0.02).unwrap();
        let h = hyperkahler_residuals(&c, Orientation::Standard);
        assert!(h.riemann_norm > 1e-3);
        assert!(h.ricci_relative < 1e-4, "{h:?}");
        assert!(h.sd_relative < 1e-4, "{h:?}");
        let flipped = hyperkahler_residuals(&c, Orientation::Reversed);
        assert!(flipped.sd_relative > 0.5, "{flipped:?}");
        assert!(c.symmetry_residual() < 1e-6 * c.max_abs());
        assert!(c.bianchi_residual() < 1e-6 * c.max_abs());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let s = GhSpace::new(1.0, &[[0.0, 0.0, 0.0]]).unwrap();
        let err = riemann_fd(&s, &Vector3::new(3.0, 0.0, 0.0), &PatchChart::north(1), 0.5).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn frame_contraction_with_identity_is_noop() {
        let mut t = [[[[0.0; 4]; 4]; 4]; 4];
        t[0][1][2][3] = 2.0;
        t[3][2][1][0] = -1.0;
        assert_eq!(to_frame(&t, &Matrix4::identity()), t);
    }
}
