//! Levi-Civita connection coefficients of an orthonormal coframe.
//!
//! With `[e_b, e_c] = C^a_bc e_a` the coefficients
//! `γ^a_bc = ⟨∇_{e_b} e_c, e_a⟩ = ½(C^a_bc − C^c_ba − C^b_ca)` follow from
//! the Koszul formula. The structure functions come from `de^a(e_b, e_c) = −C^a_bc`.

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::fd::gradient4_of;

/// `gamma[a][b][c] = γ^a_bc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConnection {
    pub gamma: [[[f64; 4]; 4]; 4],
}

impl FrameConnection {
    /// One-based lookup `γ^a_bc`, matching the usual frame labels `1..=4`.
    pub fn get1(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[a - 1][b - 1][c - 1]
    }

    /// Largest violation of metric compatibility `γ^a_bc = −γ^c_ba`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    m = m.max((self.gamma[a][b][c] + self.gamma[c][b][a]).abs());
                }
            }
        }
        m
    }
}

/// Connection coefficients at `q` for a coframe given as `e^a_μ` (row `a`, column `μ`).
pub fn frame_connection<F>(coframe: F, q: &[f64; 4], h: f64) -> Result<FrameConnection>
where
    F: Fn(&[f64; 4]) -> Result<Matrix4<f64>>,
{
    let theta = coframe(q)?;
    let frame = theta
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("degenerate coframe".into()))?;
    let d = gradient4_of::<16, _>(
        |p| {
            coframe(p).map(|m| {
                let mut out = [0.0; 16];
                for a in 0..4 {
                    for mu in 0..4 {
                        out[a * 4 + mu] = m[(a, mu)];
                    }
                }
                out
            })
        },
        q,
        h,
    )?;
    // de^a_{μν} = ∂_μ θ^a_ν − ∂_ν θ^a_μ
    let mut c = [[[0.0; 4]; 4]; 4];
    for (a, ca) in c.iter_mut().enumerate() {
        for b in 0..4 {
            for cc in 0..4 {
                let mut s = 0.0;
                for mu in 0..4 {
                    for nu in 0..4 {
                        let de = d[mu][a * 4 + nu] - d[nu][a * 4 + mu];
                        s += de * frame[(mu, b)] * frame[(nu, cc)];
                    }
                }
                ca[b][cc] = -s;
            }
        }
    }
    let mut gamma = [[[0.0; 4]; 4]; 4];
    for (a, ga) in gamma.iter_mut().enumerate() {
        for (b, gab) in ga.iter_mut().enumerate() {
            for (cc, v) in gab.iter_mut().enumerate() {
                *v = 0.5 * (c[a][b][cc] - c[cc][b][a] - c[b][cc][a]);
            }
        }
    }
    Ok(FrameConnection { gamma })
}
