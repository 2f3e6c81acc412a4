//! Verification suites. Each returns check records; expensive pieces go through the cache.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, Result};
use nalgebra::Vector3;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tnk_core::chernweil::{boundary_flux_f23, integrate_ch2, QuadratureSpec, Resolution};
use tnk_core::fd::gradient_of;
use tnk_core::forms::Orientation;
use tnk_core::geometry::{
    conformal_spin_connection_check, hyperkahler_residuals, pontryagin_number, riemann_fd, PontryaginOptions,
};
use tnk_core::holonomy::{
    asymptotic_fit_and_flux, dist_to_integer, dmu_consistency, holonomy_mu, holonomy_mu_fiber, ray_profile,
};
use tnk_core::index::{
    a_hat_cancellation, b2_exact, boundary_and_assembly, envelope_rates, fredholm_and_decay, fuzz_equivalence,
    index_closed_forms, DecayClass, FuzzConfig, NumericPieces, Scalar, SpectralParams, SummandParams,
};
use tnk_core::instanton::{
    asd_residual, bochner_residual, curvature_fd, curvature_form, decay_fit, InstantonBundle,
};
use tnk_core::{Exec, GhSpace, PatchChart};

use crate::cache::Cache;
use crate::config::{RunConfig, Suite, ToleranceProfile};
use crate::report::{Record, SuiteReport};

/// Thresholds per check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub metric_volume: f64,
    pub monopole: f64,
    pub hyperkahler: f64,
    /// Lower bound on the self-dual residual under the reversed orientation.
    pub tripwire: f64,
    pub riemann_r3_ratio: f64,
    pub conformal: f64,
    pub asd: f64,
    pub curvature_fd: f64,
    pub decay_f: f64,
    pub decay_grad: f64,
    pub bochner: f64,
    pub dmu: f64,
    pub r2_dmu_trend: f64,
    pub lambda: f64,
    pub patch: f64,
    pub ch2: f64,
    pub flux: f64,
    pub pontryagin: f64,
    pub outer_decay: f64,
    pub bernoulli_slope: f64,
}

impl Tolerances {
    pub fn for_profile(p: ToleranceProfile) -> Self {
        let strict = Self {
            metric_volume: 1e-12,
            monopole: 1e-6,
            hyperkahler: 1e-4,
            tripwire: 0.5,
            riemann_r3_ratio: 1.5,
            conformal: 5e-2,
            asd: 1e-10,
            curvature_fd: 1e-5,
            decay_f: 0.05,
            decay_grad: 0.1,
            bochner: 1e-3,
            dmu: 1e-6,
            r2_dmu_trend: 0.05,
            lambda: 1e-4,
            patch: 1e-12,
            ch2: 5e-3,
            flux: 1e-2,
            pontryagin: 1e-6,
            outer_decay: -1.0,
            bernoulli_slope: 0.15,
        };
        match p {
            ToleranceProfile::Strict => strict,
            ToleranceProfile::Fast => Self {
                metric_volume: 1e-11,
                monopole: 1e-5,
                hyperkahler: 1e-3,
                conformal: 1e-1,
                asd: 1e-9,
                curvature_fd: 1e-4,
                bochner: 1e-2,
                dmu: 1e-5,
                lambda: 1e-3,
                patch: 1e-11,
                ch2: 5e-2,
                flux: 5e-2,
                pontryagin: 1e-5,
                ..strict
            },
        }
    }
}

/// Shared state of one run.
pub struct RunContext<'a> {
    pub cfg: &'a RunConfig,
    pub space: GhSpace,
    pub bundles: InstantonBundle,
    pub hash: String,
    pub tol: Tolerances,
    pub exec: Exec,
    pub cache: &'a Cache,
    pub out_dir: Option<PathBuf>,
    pub cache_hits: Mutex<Vec<String>>,
}

impl<'a> RunContext<'a> {
    pub fn new(cfg: &'a RunConfig, cache: &'a Cache, exec: Exec, out_dir: Option<&Path>) -> Result<Self> {
        Ok(Self {
            space: cfg.space()?,
            bundles: cfg.bundles()?,
            hash: cfg.hash(),
            tol: Tolerances::for_profile(cfg.profile),
            exec,
            cache,
            out_dir: out_dir.map(Path::to_path_buf),
            cache_hits: Mutex::new(Vec::new()),
            cfg,
        })
    }

    fn fast(&self) -> bool {
        self.cfg.profile == ToleranceProfile::Fast
    }

    fn sample_count(&self) -> usize {
        let n = self.cfg.numerics.sample_points;
        if self.fast() {
            n.min(20)
        } else {
            n
        }
    }

    fn rng(&self, suite: Suite) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        r.set_stream(suite.stream());
        r
    }

    /// Points with `r` uniform in the sampling range and isotropic directions,
    /// at least `0.25` from every center.
    fn sample_points(&self, suite: Suite) -> Vec<Vector3<f64>> {
        let mut rng = self.rng(suite);
        let [r0, r1] = self.cfg.numerics.sample_radii;
        let mut pts = Vec::new();
        while pts.len() < self.sample_count() {
            let r = rng.random_range(r0..=r1);
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            let x = r * Vector3::new(s * phi.cos(), s * phi.sin(), z);
            if self.space.distance_to_centers(&x) >= 0.25 {
                pts.push(x);
            }
        }
        pts
    }

    fn clearance(&self, x: &Vector3<f64>, patch: &PatchChart) -> f64 {
        self.space.distance_to_centers(x).min(patch.string_distance(&self.space, x))
    }

    fn hit(&self, piece: &str) {
        self.cache_hits.lock().expect("cache-hit log").push(piece.to_string());
    }

    fn scale(&self) -> f64 {
        self.space.extent().max(self.space.diameter()).max(1.0)
    }
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0_f64, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn rays() -> [Vector3<f64>; 3] {
    [
        Vector3::new(1.0, 0.2, 0.1),
        Vector3::new(-0.3, 1.0, 0.5),
        Vector3::new(0.2, -0.4, -1.0),
    ]
}

/// Runs `f` and converts an error into a failed record.
fn guarded(op: &str, inputs: Value, f: impl FnOnce() -> Result<Record>) -> Record {
    match f() {
        Ok(r) => r,
        Err(e) => Record::failed(op, inputs, format!("{e:#}")),
    }
}

pub fn run_suite(ctx: &RunContext<'_>, suite: Suite) -> SuiteReport {
    let records = match suite {
        Suite::Geometry => geometry(ctx),
        Suite::Instanton => instanton(ctx),
        Suite::Holonomy => holonomy(ctx),
        Suite::Chern2 => chern2(ctx),
        Suite::Pontryagin => pontryagin(ctx),
        Suite::Index => index(ctx),
        Suite::All => unreachable!("`all` is expanded before running"),
    };
    SuiteReport::new(suite.name(), records)
}

fn geometry(ctx: &RunContext<'_>) -> Vec<Record> {
    let pts = ctx.sample_points(Suite::Geometry);
    let n = ctx.cfg.numerics.riemann_step;
    let space = &ctx.space;
    let inputs = json!({"points": pts.len(), "sample_radii": ctx.cfg.numerics.sample_radii});
    let mut out = Vec::new();

    out.push(guarded("metric_volume", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<f64> {
            let patch = PatchChart::auto(space, x);
            let g = space.metric_coords(x, &patch)?;
            let v = space.potential(x)?;
            Ok((g.determinant().sqrt() - v).abs() / v)
        });
        let worst = max(res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?);
        Ok(Record::check("metric_volume", inputs.clone(), json!({"max_relative": worst}), worst, ctx.tol.metric_volume))
    }));

    out.push(guarded("monopole_identity", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<f64> {
            let patch = PatchChart::auto(space, x);
            let h = 1e-3 * ctx.clearance(x, &patch);
            let g = gradient_of::<3, _>(|p| space.omega(p, &patch).map(Into::into), x, h)?;
            let curl = Vector3::new(g[1][2] - g[2][1], g[2][0] - g[0][2], g[0][1] - g[1][0]);
            let (_, gv) = space.potential_and_gradient(x)?;
            Ok((curl - gv).norm() / gv.norm().max(f64::MIN_POSITIVE))
        });
        let worst = max(res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?);
        Ok(Record::check("monopole_identity", inputs.clone(), json!({"max_relative": worst}), worst, ctx.tol.monopole))
    }));

    let curv = ctx.exec.map(&pts, |x| -> tnk_core::Result<(f64, f64, f64)> {
        let patch = PatchChart::auto(space, x);
        let c = riemann_fd(space, x, &patch, n * ctx.clearance(x, &patch))?;
        let s = hyperkahler_residuals(&c, Orientation::Standard);
        let r = hyperkahler_residuals(&c, Orientation::Reversed);
        Ok((s.ricci_relative, s.sd_relative, r.sd_relative))
    });
    let hk_inputs = json!({"points": pts.len(), "riemann_step": n, "sample_radii": ctx.cfg.numerics.sample_radii});
    match curv.into_iter().collect::<tnk_core::Result<Vec<_>>>() {
        Ok(c) => {
            let ric = max(c.iter().map(|t| t.0));
            let sd = max(c.iter().map(|t| t.1));
            let trip = c.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
            out.push(Record::check("hyperkahler_ricci", hk_inputs.clone(), json!({"max_relative": ric}), ric, ctx.tol.hyperkahler));
            out.push(Record::check("hyperkahler_self_dual", hk_inputs.clone(), json!({"max_relative": sd}), sd, ctx.tol.hyperkahler));
            out.push(Record::at_least(
                "orientation_tripwire",
                hk_inputs,
                json!({"min_reversed_sd_relative": trip}),
                trip,
                ctx.tol.tripwire,
            ));
        }
        Err(e) => {
            for op in ["hyperkahler_ricci", "hyperkahler_self_dual", "orientation_tripwire"] {
                out.push(Record::failed(op, hk_inputs.clone(), &e));
            }
        }
    }

    if space.k() > 0 {
        let r3_inputs = json!({"radii": [20.0, 40.0, 80.0, 160.0, 320.0], "scale": ctx.scale()});
        out.push(guarded("riemann_r3_bounded", r3_inputs.clone(), || {
            let dir = rays()[0].normalize();
            let mut scaled = Vec::new();
            for r in [20.0, 40.0, 80.0, 160.0, 320.0] {
                let x = ctx.scale() * r * dir;
                let patch = PatchChart::auto(space, &x);
                let c = riemann_fd(space, &x, &patch, n * ctx.clearance(&x, &patch))?;
                scaled.push(c.norm() * x.norm().powi(3));
            }
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let ratio = max(scaled.iter().cloned()) / lo;
            Ok(Record::check("riemann_r3_bounded", r3_inputs.clone(), json!({"r3_norm": scaled}), ratio, ctx.tol.riemann_r3_ratio))
        }));

        let y = (1e3 * ctx.scale()).ln();
        let c_inputs = json!({"y": y, "phi": 1.1, "theta": 2.0});
        out.push(guarded("conformal_connection", c_inputs.clone(), || {
            let chk = conformal_spin_connection_check(space, y, 1.1, 2.0, (10.0 * ctx.scale()).ln())?;
            let worst = chk.max_residual();
            Ok(Record::check(
                "conformal_connection",
                c_inputs.clone(),
                serde_json::to_value(&chk.entries)?,
                worst,
                ctx.tol.conformal,
            ))
        }));
    }
    out
}

fn instanton(ctx: &RunContext<'_>) -> Vec<Record> {
    let pts = ctx.sample_points(Suite::Instanton);
    let space = &ctx.space;
    let bundles = &ctx.bundles;
    let step = ctx.cfg.numerics.connection_step;
    let inputs = json!({"points": pts.len(), "connection_step": step});
    let mut out = Vec::new();

    out.push(guarded("asd_residual", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<f64> {
            let mut worst: f64 = 0.0;
            for b in &bundles.summands {
                let f = curvature_form(space, b, x)?;
                if f.norm() > 0.0 {
                    worst = worst.max(asd_residual(&f, Orientation::Standard));
                }
            }
            Ok(worst)
        });
        let worst = max(res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?);
        Ok(Record::check("asd_residual", inputs.clone(), json!({"max": worst}), worst, ctx.tol.asd))
    }));

    out.push(guarded("curvature_fd_deviation", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<(f64, f64)> {
            let mut dev: f64 = 0.0;
            let mut gauge: f64 = 0.0;
            for b in &bundles.summands {
                let f = curvature_form(space, b, x)?;
                let scale = f.norm().max(1e-300);
                let auto = PatchChart::auto(space, x);
                let fd = curvature_fd(space, b, x, &auto, step * ctx.clearance(x, &auto))?;
                dev = dev.max(fd.max_abs_diff(&f) / scale);
                // Compare against the uniform patches where their strings stay clear.
                for p in [PatchChart::north(space.k()), PatchChart::south(space.k())] {
                    let c = ctx.clearance(x, &p);
                    if c > 0.2 * x.norm() {
                        let other = curvature_fd(space, b, x, &p, step * c)?;
                        gauge = gauge.max(other.max_abs_diff(&fd) / scale);
                    }
                }
            }
            Ok((dev, gauge))
        });
        let v = res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?;
        let dev = max(v.iter().map(|t| t.0));
        let gauge = max(v.iter().map(|t| t.1));
        Ok(Record::check(
            "curvature_fd_deviation",
            inputs.clone(),
            json!({"max_relative_deviation": dev, "max_patch_disagreement": gauge}),
            dev.max(gauge),
            ctx.tol.curvature_fd,
        ))
    }));

    let [r0, r1] = ctx.cfg.numerics.decay_radii;
    let n_decay = ctx.cfg.numerics.decay_samples;
    let d_inputs = json!({"radii": [r0, r1], "samples": n_decay, "rays": rays().iter().map(|d| [d.x, d.y, d.z]).collect::<Vec<_>>()});
    let fits: Result<Vec<(usize, usize, tnk_core::instanton::DecayFit)>> = (|| {
        let mut v = Vec::new();
        for (j, b) in bundles.summands.iter().enumerate() {
            for (i, dir) in rays().iter().enumerate() {
                v.push((j, i, decay_fit(space, b, dir, (r0, r1), n_decay, ctx.exec)?));
            }
        }
        Ok(v)
    })();
    match fits {
        Ok(fits) => {
            let live: Vec<_> = fits.iter().filter(|f| !f.2.degenerate).collect();
            let ef: Vec<f64> = live.iter().map(|f| f.2.exponent_f.unwrap_or(f64::NAN)).collect();
            let eg: Vec<f64> = live.iter().map(|f| f.2.exponent_grad_f.unwrap_or(f64::NAN)).collect();
            let rf = max(ef.iter().map(|e| (e + 2.0).abs()));
            let rg = max(eg.iter().map(|e| (e + 3.0).abs()));
            let sup_r2 = max(live.iter().map(|f| f.2.sup_r2_f));
            let sup_r3 = max(live.iter().map(|f| f.2.sup_r3_grad_f));
            out.push(Record::check(
                "decay_exponent_f",
                d_inputs.clone(),
                json!({"exponents": ef, "sup_r2_f": sup_r2, "degenerate_summands": fits.len() - live.len()}),
                rf,
                ctx.tol.decay_f,
            ));
            out.push(Record::check(
                "decay_exponent_grad_f",
                d_inputs,
                json!({"exponents": eg, "sup_r3_grad_f": sup_r3}),
                rg,
                ctx.tol.decay_grad,
            ));
        }
        Err(e) => {
            out.push(Record::failed("decay_exponent_f", d_inputs.clone(), &e));
            out.push(Record::failed("decay_exponent_grad_f", d_inputs, &e));
        }
    }

    let b_pts: Vec<Vector3<f64>> = pts.iter().take(if ctx.fast() { 2 } else { 5 }).cloned().collect();
    let b_inputs = json!({"points": b_pts.len(), "riemann_step": ctx.cfg.numerics.riemann_step});
    out.push(guarded("bochner_identity", b_inputs.clone(), || {
        let res = ctx.exec.map(&b_pts, |x| -> tnk_core::Result<f64> {
            let patch = PatchChart::auto(space, x);
            let h = 0.5 * ctx.cfg.numerics.riemann_step * ctx.clearance(x, &patch);
            let mut worst: f64 = 0.0;
            for b in bundles.summands.iter().filter(|b| !b.is_flat()) {
                worst = worst.max(bochner_residual(space, b, x, h)?.relative);
            }
            Ok(worst)
        });
        let worst = max(res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?);
        Ok(Record::check("bochner_identity", b_inputs.clone(), json!({"max_relative": worst}), worst, ctx.tol.bochner))
    }));
    out
}

fn holonomy(ctx: &RunContext<'_>) -> Vec<Record> {
    let pts = ctx.sample_points(Suite::Holonomy);
    let space = &ctx.space;
    let bundles = &ctx.bundles;
    let num = &ctx.cfg.numerics;
    let inputs = json!({"points": pts.len()});
    let mut out = Vec::new();

    out.push(guarded("dmu_consistency", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<f64> {
            let h = 1e-3 * space.distance_to_centers(x);
            let mut worst: f64 = 0.0;
            for b in &bundles.summands {
                worst = worst.max(dmu_consistency(space, b, x, h)?.deviation);
            }
            Ok(worst)
        });
        let worst = max(res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?);
        Ok(Record::check("dmu_consistency", inputs.clone(), json!({"max_deviation": worst}), worst, ctx.tol.dmu))
    }));

    let [b0, b1] = num.holonomy_bounded_radii;
    let r_inputs = json!({"radii": [b0, b1], "samples": 16});
    out.push(guarded("r2_dmu_bounded", r_inputs.clone(), || {
        let mut trend: f64 = f64::NEG_INFINITY;
        let mut sup: f64 = 0.0;
        for dir in rays() {
            let p = ray_profile(space, bundles, &dir, (b0, b1), 16, ctx.exec)?;
            sup = sup.max(p.sup_r2_dmu);
            for t in p.r2_dmu_trend.iter().flatten() {
                trend = trend.max(*t);
            }
        }
        // Flat summands have no trend; treat them as bounded.
        let residual = trend.max(0.0);
        Ok(Record::check("r2_dmu_bounded", r_inputs.clone(), json!({"sup_r2_dmu": sup, "max_trend": trend}), residual, ctx.tol.r2_dmu_trend))
    }));

    let [f0, f1] = num.holonomy_fit_radii;
    let fit_inputs = json!({"fit_radii": [f0, f1], "samples": num.holonomy_fit_samples, "flux_radius": num.flux_radius});
    let fits: Result<Vec<_>> = bundles
        .summands
        .iter()
        .map(|b| {
            asymptotic_fit_and_flux(space, b, &rays()[1], (f0, f1), num.holonomy_fit_samples, num.flux_radius, ctx.exec)
                .map_err(|e| anyhow!(e))
        })
        .collect();
    match fits {
        Ok(fits) => {
            let l = space.l();
            let lam_err = max(fits.iter().zip(&bundles.summands).map(|(f, b)| {
                let d = (f.lambda_hat - b.lambda.rem_euclid(l)).abs();
                d.min(l - d)
            }));
            out.push(Record::check(
                "asymptotic_lambda",
                fit_inputs.clone(),
                serde_json::to_value(&fits).unwrap_or(Value::Null),
                lam_err,
                ctx.tol.lambda,
            ));
            let mismatch: i64 = fits.iter().map(|f| f.m_hat_vs_charges).sum();
            out.push(Record::check(
                "flux_integer",
                fit_inputs,
                json!({"m_hat": fits.iter().map(|f| f.m_hat).collect::<Vec<_>>(), "charges": bundles.summands.iter().map(|b| b.m()).collect::<Vec<_>>()}),
                mismatch as f64,
                0.0,
            ));
        }
        Err(e) => {
            out.push(Record::failed("asymptotic_lambda", fit_inputs.clone(), &e));
            out.push(Record::failed("flux_integer", fit_inputs, &e));
        }
    }

    out.push(guarded("patch_invariance", inputs.clone(), || {
        let res = ctx.exec.map(&pts, |x| -> tnk_core::Result<(f64, f64)> {
            let a = holonomy_mu(space, bundles, x)?;
            let mut dm: f64 = 0.0;
            let mut dk: f64 = 0.0;
            for p in [PatchChart::north(space.k()), PatchChart::south(space.k())] {
                let f = holonomy_mu_fiber(space, bundles, x, &p)?;
                for (u, w) in a.mu.iter().zip(&f.mu) {
                    dm = dm.max(dist_to_integer(2.0 * (u - w)) / 2.0);
                }
                if let (Some(k1), Some(k2)) = (a.kappa, f.kappa) {
                    dk = dk.max((k1 - k2).abs());
                }
            }
            Ok((dm, dk))
        });
        let v = res.into_iter().collect::<tnk_core::Result<Vec<_>>>()?;
        let dm = max(v.iter().map(|t| t.0));
        let dk = max(v.iter().map(|t| t.1));
        let kappa_inf = bundles.asymptotic_separation(space.l());
        Ok(Record::check(
            "patch_invariance",
            inputs.clone(),
            json!({"max_mu_deviation": dm, "max_kappa_deviation": dk, "asymptotic_kappa": kappa_inf}),
            dm.max(dk),
            ctx.tol.patch,
        ))
    }));
    out
}

/// Pieces shared by `chern2`, `pontryagin` and `index`, cached by config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub records: Vec<Record>,
    pub values: Vec<f64>,
}

fn ch2_spec(ctx: &RunContext<'_>) -> QuadratureSpec {
    let n = &ctx.cfg.numerics;
    QuadratureSpec {
        epsilon: n.ch2_epsilon,
        r_max: n.ch2_r_max,
        coarse: Resolution {
            radial: n.ch2_radial_nodes,
            n_theta: n.ch2_theta_nodes,
            n_phi: n.ch2_phi_nodes,
        },
        tau_nodes: None,
        max_relative_error: 2.0 * ctx.tol.ch2,
    }
}

fn piece(ctx: &RunContext<'_>, name: &str, f: impl FnOnce() -> Piece) -> Piece {
    let res = ctx.cache.get_or_compute(&ctx.hash, name, || Ok(f()));
    match res {
        Ok((p, hit)) => {
            if hit {
                ctx.hit(name);
            }
            p
        }
        Err(e) => Piece {
            records: vec![Record::failed(name, json!({}), format!("cache: {e:#}"))],
            values: vec![],
        },
    }
}

fn ch2_piece(ctx: &RunContext<'_>) -> Piece {
    piece(ctx, "ch2", || {
        let spec = ch2_spec(ctx);
        let inputs = serde_json::to_value(&spec).unwrap_or(Value::Null);
        match integrate_ch2(&ctx.space, &ctx.bundles, &spec, ctx.exec) {
            Ok(r) => Piece {
                records: vec![Record::check(
                    "ch2_quadrature",
                    inputs,
                    json!({"value": r.value, "analytic": r.analytic, "error_estimate": r.error_estimate,
                           "coarse": r.coarse_value, "fine": r.fine_value, "exclusion_estimate": r.exclusion_estimate,
                           "tail_a": r.tail.a, "tail_b": r.tail.b}),
                    r.relative_deviation,
                    ctx.tol.ch2,
                )],
                values: vec![r.value],
            },
            Err(e) => Piece {
                records: vec![Record::failed("ch2_quadrature", inputs, e)],
                values: vec![],
            },
        }
    })
}

fn flux_piece(ctx: &RunContext<'_>) -> Piece {
    piece(ctx, "flux", || {
        let radius = ctx.cfg.numerics.flux_radius;
        let inputs = json!({"radius": radius, "extrapolation": "2*Phi(2R) - Phi(R)"});
        match boundary_flux_f23(&ctx.space, &ctx.bundles, radius, ctx.exec) {
            Ok(f) => {
                let rel = max(f.extrapolated.iter().zip(&f.expected).map(|(x, e)| {
                    if *e == 0.0 {
                        x.abs()
                    } else {
                        (x - e).abs() / e.abs()
                    }
                }));
                Piece {
                    records: vec![Record::check(
                        "boundary_flux",
                        inputs,
                        serde_json::to_value(&f).unwrap_or(Value::Null),
                        rel,
                        ctx.tol.flux,
                    )],
                    values: f.extrapolated,
                }
            }
            Err(e) => Piece {
                records: vec![Record::failed("boundary_flux", inputs, e)],
                values: vec![],
            },
        }
    })
}

fn pontryagin_piece(ctx: &RunContext<'_>) -> Piece {
    piece(ctx, "pontryagin", || {
        let n = &ctx.cfg.numerics;
        let outer = n.pontryagin_outer.max(10.0 * ctx.scale());
        let inputs = json!({"sphere_radius": n.pontryagin_sphere, "outer_radius": outer, "n_theta": 24, "n_phi": 48});
        let opts = PontryaginOptions {
            exec: ctx.exec,
            ..PontryaginOptions::default()
        };
        match pontryagin_number(&ctx.space, n.pontryagin_sphere, outer, &opts) {
            Ok(p) => {
                let expected = ctx.space.k() as f64 / 12.0;
                let decay = p.outer_decay_exponent;
                Piece {
                    records: vec![
                        Record::check(
                            "pontryagin_number",
                            inputs.clone(),
                            json!({"value": p.value, "expected": expected, "truncated_value": p.truncated_value,
                                   "center_contributions": p.center_contributions, "richardson_delta": p.richardson_delta}),
                            (p.value - expected).abs(),
                            ctx.tol.pontryagin,
                        ),
                        Record::check(
                            "outer_flux_decay",
                            inputs,
                            json!({"exponent": decay, "radii": p.outer_radii, "fluxes": p.outer_fluxes}),
                            // A vanishing outer flux (flat space) decays trivially.
                            decay.unwrap_or(ctx.tol.outer_decay),
                            ctx.tol.outer_decay,
                        ),
                    ],
                    values: vec![p.value],
                }
            }
            Err(e) => Piece {
                records: vec![Record::failed("pontryagin_number", inputs, e)],
                values: vec![],
            },
        }
    })
}

fn chern2(ctx: &RunContext<'_>) -> Vec<Record> {
    let mut out = ch2_piece(ctx).records;
    out.extend(flux_piece(ctx).records);
    out
}

fn pontryagin(ctx: &RunContext<'_>) -> Vec<Record> {
    pontryagin_piece(ctx).records
}

fn spectral_params(ctx: &RunContext<'_>) -> Result<SpectralParams> {
    let a = ctx.cfg.exact_a()?;
    Ok(SpectralParams {
        k: ctx.space.k(),
        summands: a
            .into_iter()
            .zip(&ctx.bundles.summands)
            .map(|(a, b)| SummandParams {
                a,
                m: b.m(),
                v: Some(b.v.clone()),
            })
            .collect(),
    })
}

fn index(ctx: &RunContext<'_>) -> Vec<Record> {
    let mut out = Vec::new();
    let params = match spectral_params(ctx) {
        Ok(p) => p,
        Err(e) => return vec![Record::failed("closed_forms", json!({}), format!("{e:#}"))],
    };
    let p_inputs = serde_json::to_value(&params).unwrap_or(Value::Null);

    out.push(guarded("closed_forms", p_inputs.clone(), || {
        let ch2 = params.ch2_closed_form().ok_or_else(|| anyhow!("charges missing"))?;
        let c = index_closed_forms(&params, &ch2)?;
        let w = c.residual_wa.unwrap_or(0.0);
        Ok(Record::check(
            "closed_forms",
            p_inputs.clone(),
            serde_json::to_value(&c)?,
            c.residual_ab.max(w),
            0.0,
        ))
    }));

    let cancel = a_hat_cancellation(params.n(), params.k);
    out.push(Record::check(
        "a_hat_cancellation",
        json!({"n": params.n(), "k": params.k}),
        json!({"value": cancel.to_string()}),
        if cancel == BigRational::from_integer(0.into()) { 0.0 } else { 1.0 },
        0.0,
    ));

    let pieces = [pontryagin_piece(ctx), ch2_piece(ctx), flux_piece(ctx)];
    let a_inputs = json!({"gap_tolerance": ctx.cfg.numerics.assembly_gap});
    out.push(guarded("assembly", a_inputs.clone(), || {
        let first = |p: &Piece, name: &str| p.values.first().copied().ok_or_else(|| anyhow!("{name} piece unavailable"));
        let np = NumericPieces {
            pontryagin: Some(first(&pieces[0], "Pontryagin")?),
            ch2: Some(first(&pieces[1], "ch2")?),
            flux: Some(pieces[2].values.clone()),
        };
        let r = boundary_and_assembly(&params, &np, f64::INFINITY)?;
        let closed = r.closed.index_a.to_f64();
        Ok(Record::check(
            "assembly",
            a_inputs.clone(),
            serde_json::to_value(&r)?,
            r.gap.max((r.rounded as f64 - closed).abs()),
            ctx.cfg.numerics.assembly_gap,
        ))
    }));

    out.push(fuzz_record(ctx));

    let windows = ctx.cfg.numerics.bernoulli_windows.clone();
    let b_inputs = json!({"a": [0.1, 0.3, 0.77], "windows": windows});
    out.push(guarded("bernoulli_rates", b_inputs.clone(), || {
        let mut sine = Vec::new();
        let mut cosine = Vec::new();
        for a in [0.1, 0.3, 0.77] {
            let f = envelope_rates(a, &windows)?;
            sine.push(f.sine_slope);
            cosine.push(f.cosine_slope);
        }
        let res = max(sine.iter().map(|s| (s + 1.0).abs()).chain(cosine.iter().map(|s| (s + 2.0).abs())));
        Ok(Record::check("bernoulli_rates", b_inputs.clone(), json!({"sine_slopes": sine, "cosine_slopes": cosine}), res, ctx.tol.bernoulli_slope))
    }));
    let quarter = BigRational::new(1.into(), 4.into());
    let spot = b2_exact(&quarter);
    out.push(Record::check(
        "bernoulli_spot",
        json!({"a": "1/4"}),
        json!({"b2": spot.to_string()}),
        if spot == BigRational::new((-1).into(), 48.into()) { 0.0 } else { 1.0 },
        0.0,
    ));

    let fr = fredholm_and_decay(&params);
    let independent = params
        .summands
        .iter()
        .map(|s| {
            let a = s.a.to_f64();
            (a - a.round()).abs()
        })
        .fold(f64::INFINITY, f64::min);
    let classes_ok = fr
        .classes
        .iter()
        .zip(&params.summands)
        .all(|(c, s)| matches!(c, DecayClass::Exponential { .. }) != (s.a.to_f64().fract() == 0.0));
    out.push(Record::check(
        "fredholm",
        p_inputs,
        json!({"fredholm": fr.fredholm, "alpha": fr.alpha, "classes": fr.classes.iter().map(|c| c.to_string()).collect::<Vec<_>>()}),
        (fr.alpha - independent).abs() + if classes_ok && fr.fredholm { 0.0 } else { 1.0 },
        1e-12,
    ));

    out.push(worked_examples_record());
    out
}

fn fuzz_record(ctx: &RunContext<'_>) -> Record {
    let cases = if ctx.fast() {
        ctx.cfg.numerics.fuzz_cases.min(10_000)
    } else {
        ctx.cfg.numerics.fuzz_cases
    };
    let cfg = FuzzConfig {
        cases,
        seed: ctx.cfg.seed,
        ..FuzzConfig::default()
    };
    let inputs = serde_json::to_value(&cfg).unwrap_or(Value::Null);
    guarded("fuzz_equivalence", inputs.clone(), || {
        let s = fuzz_equivalence(&cfg, ctx.exec)?;
        let mut files = Vec::new();
        if let Some(dir) = &ctx.out_dir {
            if !s.mismatches.is_empty() {
                let d = dir.join("fuzz_failures");
                std::fs::create_dir_all(&d)?;
                for c in &s.mismatches {
                    let p = d.join(format!("case-{}-{}-{}.json", c.seed, c.id, c.kind));
                    std::fs::write(&p, serde_json::to_string_pretty(c)?)?;
                    files.push(p.display().to_string());
                }
            }
        }
        Ok(Record::check(
            "fuzz_equivalence",
            inputs.clone(),
            json!({"ab_cases": s.ab_cases, "whitney_cases": s.whitney_cases, "mismatches": s.mismatches.len(), "failure_files": files}),
            s.mismatches.len() as f64,
            0.0,
        ))
    })
}

/// The triangular law on `TN_1` and the two-center Whitney sum, independent of the config.
fn worked_examples_record() -> Record {
    let table = [((3, 10), 0), ((6, 5), 1), ((5, 2), 3), ((37, 10), 6)];
    let mut got = Vec::new();
    let mut wrong = 0;
    for ((p, q), want) in table {
        let params = SpectralParams {
            k: 1,
            summands: vec![SummandParams {
                a: Scalar::ratio(p, q),
                m: 0,
                v: Some(vec![0]),
            }],
        };
        let v = params
            .ch2_closed_form()
            .and_then(|c| index_closed_forms(&params, &c).ok())
            .map(|c| c.index_a);
        if v != Some(Scalar::ratio(want, 1)) {
            wrong += 1;
        }
        got.push(v.map(|s| s.to_string()));
    }
    let whitney = SpectralParams {
        k: 2,
        summands: vec![SummandParams {
            a: Scalar::ratio(2, 5),
            m: 3,
            v: Some(vec![1, 2]),
        }],
    };
    let w = whitney
        .ch2_closed_form()
        .and_then(|c| index_closed_forms(&whitney, &c).ok())
        .and_then(|c| c.index_w);
    if w != Some(Scalar::ratio(1, 1)) {
        wrong += 1;
    }
    Record::check(
        "worked_examples",
        json!({"k1_a": ["3/10", "6/5", "5/2", "37/10"], "whitney": {"k": 2, "a": "2/5", "v": [1, 2]}}),
        json!({"k1_index": got, "whitney_index": w.map(|s| s.to_string())}),
        wrong as f64,
        0.0,
    )
}
