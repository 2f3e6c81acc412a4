//! Abelian anti-self-dual instantons on `TN_k`.
//!
//! A summand with asymptotic parameter `λ` and integer center charges `v_σ`
//! has connection `A = −i a` with
//! `a = ½ ((H/V)(dτ + ω) − η)`, `H = λ + Σ_σ v_σ / r_σ`, `η = Σ_σ v_σ ω_σ`.
//! With `f = H/V` its curvature is `da = ½ (df ∧ ϖ − V *₃df)`, which in the
//! orthonormal frame reads `F_i4 = ½ ∂_i f`, `F_jk = −½ ε_jki ∂_i f`.
//! All quantities are independent of the fiber coordinate.

mod bochner;

use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fd::{geomspace, gradient_of, log_log_slope};
use crate::forms::{Orientation, TwoForm};
use crate::geometry::{frame_connection, harmonic_sum, FrameConnection, GhSpace, PatchChart};

pub use bochner::{bochner_residual, BochnerResult};

/// Distance below which `λ/l` counts as an integer.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

/// One U(1) summand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineBundle {
    pub lambda: f64,
    /// Per-center charges `v_σ`.
    pub v: Vec<i64>,
}

impl LineBundle {
    pub fn new(lambda: f64, v: Vec<i64>) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        Ok(Self { lambda, v })
    }

    /// `v = 0`: the basic instanton with parameter `λ`.
    pub fn basic(k: usize, lambda: f64) -> Self {
        Self {
            lambda,
            v: vec![0; k],
        }
    }

    pub fn flat(k: usize) -> Self {
        Self::basic(k, 0.0)
    }

    /// Total charge `m = Σ_σ v_σ`.
    pub fn m(&self) -> i64 {
        self.v.iter().sum()
    }

    pub fn is_flat(&self) -> bool {
        self.lambda == 0.0 && self.v.iter().all(|v| *v == 0)
    }

    /// `λ/l`.
    pub fn a(&self, l: f64) -> f64 {
        self.lambda / l
    }

    /// Whether `λ/l` lies within [`INTEGER_TOLERANCE`] of an integer.
    pub fn has_integer_holonomy(&self, l: f64) -> bool {
        let a = self.a(l);
        (a - a.round()).abs() < INTEGER_TOLERANCE
    }

    fn weights(&self) -> Vec<f64> {
        self.v.iter().map(|&q| q as f64).collect()
    }

    fn check(&self, space: &GhSpace) -> Result<()> {
        if self.v.len() != space.k() {
            return Err(Error::InvalidParameter(format!(
                "bundle has {} charges for {} centers",
                self.v.len(),
                space.k()
            )));
        }
        Ok(())
    }

    /// `H` and `∇H`.
    pub fn harmonic(&self, space: &GhSpace, x: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
        self.check(space)?;
        space.check_point(x)?;
        Ok(harmonic_sum(self.lambda, space.centers(), Some(&self.weights()), x))
    }

    /// `f = H/V` and `∇f`.
    pub fn ratio(&self, space: &GhSpace, x: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
        let (h, gh) = self.harmonic(space, x)?;
        let (v, gv) = space.potential_and_gradient(x)?;
        Ok((h / v, (gh * v - h * gv) / (v * v)))
    }

    /// `η = Σ_σ v_σ ω_σ` in the given patch.
    pub fn eta(&self, space: &GhSpace, x: &Vector3<f64>, patch: &PatchChart) -> Result<Vector3<f64>> {
        self.check(space)?;
        space.omega(x, patch)?;
        space.weighted_omega(x, patch, &self.weights())
    }
}

/// Ordered Whitney sum of line bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonBundle {
    pub summands: Vec<LineBundle>,
}

impl InstantonBundle {
    pub fn new(summands: Vec<LineBundle>) -> Self {
        Self { summands }
    }

    pub fn rank(&self) -> usize {
        self.summands.len()
    }

    /// Smallest distance between `λ_i/l` and `λ_j/l` modulo `ℤ` over pairs; `None` for rank ≤ 1.
    pub fn asymptotic_separation(&self, l: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.summands.iter().enumerate() {
            for b in &self.summands[i + 1..] {
                let d = a.a(l) - b.a(l);
                let d = (d - d.round()).abs();
                best = Some(best.map_or(d, |m: f64| m.min(d)));
            }
        }
        best
    }

    /// Fails unless the asymptotic holonomy eigenvalues are pairwise distinct.
    pub fn check_generic(&self, l: f64) -> Result<()> {
        match self.asymptotic_separation(l) {
            Some(s) if s < INTEGER_TOLERANCE => Err(Error::InvalidParameter(
                "asymptotic holonomy is not generic: two values of lambda/l agree mod Z".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Connection one-form `a` of a summand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionForm {
    /// Components along `(dx, dy, dz, dτ)`.
    pub coords: [f64; 4],
    /// Components on the orthonormal frame `e_1..e_4`.
    pub frame: [f64; 4],
}

pub fn connection_form(
    space: &GhSpace,
    bundle: &LineBundle,
    x: &Vector3<f64>,
    patch: &PatchChart,
) -> Result<ConnectionForm> {
    let (h, _) = bundle.harmonic(space, x)?;
    let v = space.potential(x)?;
    let w = space.omega(x, patch)?;
    let eta = bundle.eta(space, x, patch)?;
    let f = h / v;
    let coords = [
        0.5 * (f * w.x - eta.x),
        0.5 * (f * w.y - eta.y),
        0.5 * (f * w.z - eta.z),
        0.5 * f,
    ];
    let s = v.sqrt();
    let frame = [
        -eta.x / (2.0 * s),
        -eta.y / (2.0 * s),
        -eta.z / (2.0 * s),
        h / (2.0 * s),
    ];
    Ok(ConnectionForm { coords, frame })
}

/// Gauge function `χ` with `a_to = a_from + dχ` on the overlap.
pub fn gauge_function(
    space: &GhSpace,
    bundle: &LineBundle,
    x: &Vector3<f64>,
    from: &PatchChart,
    to: &PatchChart,
) -> Result<f64> {
    // Each S→N switch shifts τ by 2φ_σ; the connection picks up v_σ dφ_σ.
    bundle.check(space)?;
    let mut chi = 0.0;
    for (s, c) in space.centers().iter().enumerate() {
        let phi = from.azimuth(c, x);
        let q = bundle.v[s] as f64;
        chi += match (from.sides()[s], to.sides()[s]) {
            (crate::geometry::Side::South, crate::geometry::Side::North) => q * phi,
            (crate::geometry::Side::North, crate::geometry::Side::South) => -q * phi,
            _ => 0.0,
        };
    }
    Ok(chi)
}

/// Curvature `da` of one summand in the orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub form: TwoForm,
    pub norm: f64,
    pub self_dual: TwoForm,
    pub anti_self_dual: TwoForm,
    /// The sample equals its own zero fiber-Fourier mode.
    pub zero_mode: bool,
}

impl CurvatureSample {
    pub fn from_form(form: TwoForm, orientation: Orientation) -> Self {
        Self {
            form,
            norm: form.norm(),
            self_dual: form.self_dual_part(orientation),
            anti_self_dual: form.anti_self_dual_part(orientation),
            zero_mode: true,
        }
    }
}

fn form_from_grad_f(df: &Vector3<f64>) -> TwoForm {
    let h = 0.5 * df;
    // PAIRS order: 12, 13, 14, 23, 24, 34
    TwoForm::from_components([-h.z, h.y, h.x, -h.x, h.y, h.z])
}

/// Closed-form curvature.
pub fn curvature(space: &GhSpace, bundle: &LineBundle, x: &Vector3<f64>) -> Result<CurvatureSample> {
    let (_, df) = bundle.ratio(space, x)?;
    Ok(CurvatureSample::from_form(form_from_grad_f(&df), Orientation::Standard))
}

pub fn curvature_form(space: &GhSpace, bundle: &LineBundle, x: &Vector3<f64>) -> Result<TwoForm> {
    bundle.ratio(space, x).map(|(_, df)| form_from_grad_f(&df))
}

/// Curvature by differencing [`connection_form`] in the given patch.
pub fn curvature_fd(
    space: &GhSpace,
    bundle: &LineBundle,
    x: &Vector3<f64>,
    patch: &PatchChart,
    h: f64,
) -> Result<TwoForm> {
    let da = gradient_of::<4, _>(|p| connection_form(space, bundle, p, patch).map(|c| c.coords), x, h)?;
    let d = |mu: usize, nu: usize| if mu == 3 { 0.0 } else { da[mu][nu] };
    let e = space.metric_and_frame(x, 0.0, patch)?.frame();
    let mut f = [[0.0; 4]; 4];
    for (a, row) in f.iter_mut().enumerate() {
        for (b, val) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for mu in 0..4 {
                for nu in 0..4 {
                    s += (d(mu, nu) - d(nu, mu)) * e[(mu, a)] * e[(nu, b)];
                }
            }
            *val = s;
        }
    }
    Ok(TwoForm(f))
}

/// `|F + *F| / max(|F|, floor)`; zero for anti-self-dual input.
pub fn asd_residual(form: &TwoForm, orientation: Orientation) -> f64 {
    let num = form.add(&form.hodge(orientation)).norm();
    num / form.norm().max(f64::MIN_POSITIVE)
}

/// Levi-Civita coefficients of the Gibbons–Hawking frame at `x`.
pub fn gh_frame_connection(
    space: &GhSpace,
    x: &Vector3<f64>,
    patch: &PatchChart,
    h: f64,
) -> Result<FrameConnection> {
    frame_connection(
        |q| space.coframe(&Vector3::new(q[0], q[1], q[2]), patch),
        &[x.x, x.y, x.z, 0.0],
        h,
    )
}

/// `∇_c F_ab` for the orthonormal frame, `out[c]` a two-form.
pub fn covariant_derivative(
    space: &GhSpace,
    bundle: &LineBundle,
    x: &Vector3<f64>,
    patch: &PatchChart,
    h: f64,
) -> Result<[TwoForm; 4]> {
    let gamma = gh_frame_connection(space, x, patch, h)?;
    let f = curvature_form(space, bundle, x)?;
    let df = gradient_of::<16, _>(
        |p| {
            curvature_form(space, bundle, p).map(|t| {
                let mut o = [0.0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        o[a * 4 + b] = t.0[a][b];
                    }
                }
                o
            })
        },
        x,
        h,
    )?;
    let e = space.metric_and_frame(x, 0.0, patch)?.frame();
    Ok(covariant_from_parts(&f, &df, &e, &gamma))
}

pub(crate) fn covariant_from_parts(
    f: &TwoForm,
    df: &[[f64; 16]; 3],
    e: &Matrix4<f64>,
    gamma: &FrameConnection,
) -> [TwoForm; 4] {
    let mut out = [TwoForm::zero(); 4];
    for (c, oc) in out.iter_mut().enumerate() {
        for a in 0..4 {
            for b in 0..4 {
                let mut v: f64 = (0..3).map(|mu| e[(mu, c)] * df[mu][a * 4 + b]).sum();
                for d in 0..4 {
                    v -= gamma.gamma[d][c][a] * f.0[d][b] + gamma.gamma[d][c][b] * f.0[a][d];
                }
                oc.0[a][b] = v;
            }
        }
    }
    out
}

/// `(Σ_c Σ_{a<b} (∇_c F_ab)²)^{1/2}`.
pub fn covariant_norm(t: &[TwoForm; 4]) -> f64 {
    t.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
}

/// Power-law fit of `|F|` and `|∇F|` along a ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub radii: Vec<f64>,
    pub f_norms: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub exponent_f: Option<f64>,
    pub exponent_grad_f: Option<f64>,
    pub sup_r2_f: f64,
    pub sup_r3_grad_f: f64,
    /// Set when the curvature vanishes identically along the ray.
    pub degenerate: bool,
}

pub fn decay_fit(
    space: &GhSpace,
    bundle: &LineBundle,
    direction: &Vector3<f64>,
    r_range: (f64, f64),
    n_samples: usize,
    exec: Exec,
) -> Result<DecayFit> {
    if n_samples < 3 {
        return Err(Error::Fit(format!("decay fit needs at least 3 samples, got {n_samples}")));
    }
    let (r0, r1) = r_range;
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::InvalidParameter(format!("invalid radius range [{r0}, {r1}]")));
    }
    let dir = direction
        .try_normalize(0.0)
        .ok_or_else(|| Error::InvalidParameter("ray direction must be nonzero".into()))?;
    let radii = geomspace(r0, r1, n_samples);
    let samples = exec.map(&radii, |&r| -> Result<(f64, f64)> {
        let x = r * dir;
        let patch = PatchChart::auto(space, &x);
        let f = curvature_form(space, bundle, &x)?.norm();
        let g = covariant_norm(&covariant_derivative(space, bundle, &x, &patch, 1e-2 * r)?);
        Ok((f, g))
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let f_norms: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let grad_norms: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sup_r2_f = radii.iter().zip(&f_norms).fold(0.0_f64, |m, (r, f)| m.max(r * r * f));
    let sup_r3_grad_f = radii
        .iter()
        .zip(&grad_norms)
        .fold(0.0_f64, |m, (r, g)| m.max(r * r * r * g));
    let degenerate = f_norms.iter().all(|f| *f == 0.0);
    let (exponent_f, exponent_grad_f) = if degenerate {
        (None, None)
    } else {
        (
            Some(log_log_slope(&radii, &f_norms)?.slope),
            Some(log_log_slope(&radii, &grad_norms)?.slope),
        )
    };
    Ok(DecayFit {
        radii,
        f_norms,
        grad_norms,
        exponent_f,
        exponent_grad_f,
        sup_r2_f,
        sup_r3_grad_f,
        degenerate,
    })
}
