//! Acceptance criteria, one line per criterion. Exits nonzero if any criterion fails.

use std::time::Instant;

use nalgebra::Vector3;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnk_cli::cache::Cache;
use tnk_cli::config::{BundleConfig, RunConfig, SpaceConfig, Suite};
use tnk_cli::report::RunReport;
use tnk_core::chernweil::{boundary_flux_f23, integrate_ch2, QuadratureSpec};
use tnk_core::geometry::{pontryagin_number, PontryaginOptions};
use tnk_core::index::{
    a_hat_cancellation, b2_exact, bernoulli_tools, boundary_and_assembly, envelope_rates, fredholm_and_decay,
    fuzz_equivalence, index_closed_forms, FuzzConfig, NumericPieces, Scalar, SpectralParams, SummandParams,
};
use tnk_core::instanton::{InstantonBundle, LineBundle};
use tnk_core::{Exec, GhSpace};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

/// Centers in the unit ball with pairwise separation at least `0.3`.
fn random_centers(k: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<[f64; 3]> = Vec::new();
    while out.len() < k {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let v = Vector3::from(p);
        if v.norm() <= 1.0 && out.iter().all(|q| (Vector3::from(*q) - v).norm() >= 0.3) {
            out.push(p);
        }
    }
    out
}

fn config(l: f64, centers: Vec<[f64; 3]>, bundles: &[(f64, Vec<i64>)], suites: &[Suite]) -> RunConfig {
    let mut c = RunConfig::basic();
    c.space = SpaceConfig { l, centers };
    c.bundles = bundles
        .iter()
        .map(|(lambda, v)| BundleConfig {
            lambda: *lambda,
            v: v.clone(),
        })
        .collect();
    c.suites = suites.to_vec();
    c
}

fn basic(suites: &[Suite]) -> RunConfig {
    config(1.0, vec![[0.0; 3]], &[(2.5, vec![0])], suites)
}

fn two_center(suites: &[Suite]) -> RunConfig {
    config(1.0, vec![[0.0, 0.0, -0.5], [0.0, 0.0, 0.5]], &[(0.4, vec![1, 2])], suites)
}

fn three_center(suites: &[Suite]) -> RunConfig {
    config(2.0, random_centers(3, 303), &[(0.7, vec![1, 0, -2]), (1.3, vec![0, 2, 1])], suites)
}

fn run(cfg: &RunConfig) -> RunReport {
    tnk_cli::run(cfg, &Cache::disabled(), Exec::Parallel, None).expect("valid config")
}

/// Requires the named records to pass; returns their residuals.
fn records(report: &RunReport, suite: &str, ops: &[&str]) -> Result<Vec<f64>, String> {
    ops.iter()
        .map(|op| {
            let r = report.record(suite, op).ok_or_else(|| format!("missing record {suite}/{op}"))?;
            if r.pass {
                Ok(r.residual)
            } else {
                Err(format!("{suite}/{op}: residual {:e} vs {:e} {}", r.residual, r.tolerance, r.error.clone().unwrap_or_default()))
            }
        })
        .collect()
}

fn pontryagin() -> Outcome {
    let mut notes = Vec::new();
    for k in 1..=3 {
        let t = Instant::now();
        let space = GhSpace::new(1.0, &random_centers(k, 100 + k as u64)).map_err(|e| e.to_string())?;
        let p = pontryagin_number(&space, 1e-3, 100.0, &PontryaginOptions::default()).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let err = (p.value - k as f64 / 12.0).abs();
        let decay = p.outer_decay_exponent.ok_or("no outer decay fit")?;
        if err > 1e-6 || decay > -1.0 || secs >= 60.0 {
            return Err(format!("k={k}: |P-k/12|={err:.2e}, exponent {decay:.2}, {secs:.1}s"));
        }
        notes.push(format!("k={k} err {err:.1e} exp {decay:.2} {secs:.2}s"));
    }
    Ok(notes.join("; "))
}

fn hyperkahler() -> Outcome {
    let mut notes = Vec::new();
    for k in 1..=3 {
        let mut cfg = config(1.0, random_centers(k, 200 + k as u64), &[(0.3, vec![0; k])], &[Suite::Geometry]);
        cfg.numerics.sample_points = 100;
        cfg.numerics.sample_radii = [2.0, 50.0];
        let r = run(&cfg);
        let res = records(&r, "geometry", &["hyperkahler_ricci", "hyperkahler_self_dual", "orientation_tripwire"])?;
        notes.push(format!("k={k} ricci {:.1e} sd {:.1e} reversed {:.2}", res[0], res[1], res[2]));
    }
    Ok(notes.join("; "))
}

fn instanton_reports() -> Vec<(&'static str, RunReport)> {
    vec![
        ("basic", run(&basic(&[Suite::Instanton]))),
        ("k=2", run(&two_center(&[Suite::Instanton]))),
    ]
}

fn asd(reports: &[(&str, RunReport)]) -> Outcome {
    let mut notes = Vec::new();
    for (name, r) in reports {
        let res = records(r, "instanton", &["asd_residual", "curvature_fd_deviation"])?;
        if res[0] >= 1e-10 || res[1] >= 1e-5 {
            return Err(format!("{name}: asd {:e} fd {:e}", res[0], res[1]));
        }
        notes.push(format!("{name} asd {:.1e} fd {:.1e}", res[0], res[1]));
    }
    Ok(notes.join("; "))
}

fn decay(reports: &[(&str, RunReport)]) -> Outcome {
    let mut notes = Vec::new();
    for (name, r) in reports {
        let res = records(r, "instanton", &["decay_exponent_f", "decay_exponent_grad_f"])?;
        let rec = r.record("instanton", "decay_exponent_f").expect("present");
        let rays = rec.inputs["rays"].as_array().map_or(0, Vec::len);
        if rays != 3 || rec.inputs["radii"] != serde_json::json!([1e2, 1e4]) {
            return Err(format!("{name}: unexpected fit setup {}", rec.inputs));
        }
        notes.push(format!("{name} |e_F+2| {:.1e} |e_dF+3| {:.1e}", res[0], res[1]));
    }
    Ok(notes.join("; "))
}

fn ch2() -> Outcome {
    let cases = [
        (GhSpace::new(1.0, &[[0.0; 3]]), LineBundle::new(2.5, vec![0]), 3.125),
        (
            GhSpace::new(1.0, &[[0.0, 0.0, -0.5], [0.0, 0.0, 0.5]]),
            LineBundle::new(0.4, vec![1, 2]),
            1.46,
        ),
    ];
    let mut notes = Vec::new();
    for (space, bundle, want) in cases {
        let t = Instant::now();
        let space = space.map_err(|e| e.to_string())?;
        let bundles = InstantonBundle::new(vec![bundle.map_err(|e| e.to_string())?]);
        let r = integrate_ch2(&space, &bundles, &QuadratureSpec::default(), Exec::Parallel).map_err(|e| e.to_string())?;
        let rel = (r.value - want).abs() / want;
        if rel >= 5e-3 {
            return Err(format!("ch2 {} vs {want}: {rel:.2e}", r.value));
        }
        notes.push(format!("{:.6} vs {want} ({rel:.1e}, {:.1}s)", r.value, t.elapsed().as_secs_f64()));
    }
    Ok(notes.join("; "))
}

fn flux() -> Outcome {
    // Expected values m − kλ/l worked out by hand.
    let cases = [
        (GhSpace::new(1.0, &[[0.0; 3]]), vec![(2.5, vec![0])], vec![-2.5]),
        (
            GhSpace::new(1.0, &[[0.0, 0.0, -0.5], [0.0, 0.0, 0.5]]),
            vec![(0.4, vec![1, 2]), (0.75, vec![0, -1])],
            vec![2.2, -2.5],
        ),
    ];
    let mut notes = Vec::new();
    for (space, bundles, want) in cases {
        let space = space.map_err(|e| e.to_string())?;
        let b = InstantonBundle::new(bundles.into_iter().map(|(l, v)| LineBundle::new(l, v).unwrap()).collect());
        let f = boundary_flux_f23(&space, &b, 1e3, Exec::Parallel).map_err(|e| e.to_string())?;
        for (got, w) in f.extrapolated.iter().zip(&want) {
            let rel = (got - w).abs() / w.abs();
            if rel >= 1e-2 {
                return Err(format!("flux {got} vs {w}"));
            }
            notes.push(format!("{got:.5} vs {w}"));
        }
    }
    Ok(notes.join("; "))
}

fn fuzz() -> Outcome {
    let cfg = FuzzConfig {
        cases: 100_000,
        ..FuzzConfig::default()
    };
    let s = fuzz_equivalence(&cfg, Exec::Parallel).map_err(|e| e.to_string())?;
    if !s.mismatches.is_empty() || s.ab_cases != 100_000 || s.whitney_cases != 100_000 {
        return Err(format!("{} mismatches over {} + {}", s.mismatches.len(), s.ab_cases, s.whitney_cases));
    }
    Ok(format!("{} intro/trace and {} Whitney cases, 0 mismatches", s.ab_cases, s.whitney_cases))
}

fn closed(k: usize, a: Scalar, m: i64, v: Vec<i64>) -> Result<tnk_core::index::ClosedForms, String> {
    let p = SpectralParams {
        k,
        summands: vec![SummandParams { a, m, v: Some(v) }],
    };
    let ch2 = p.ch2_closed_form().ok_or("no closed-form ch2")?;
    index_closed_forms(&p, &ch2).map_err(|e| e.to_string())
}

fn worked_examples() -> Outcome {
    let mut got = Vec::new();
    for ((p, q), want) in [((3, 10), 0), ((6, 5), 1), ((5, 2), 3), ((37, 10), 6)] {
        let c = closed(1, Scalar::ratio(p, q), 0, vec![0])?;
        if c.index_a != Scalar::ratio(want, 1) || c.index_b != Scalar::ratio(want, 1) {
            return Err(format!("s/l={p}/{q}: {} / {}", c.index_a, c.index_b));
        }
        got.push(c.index_a.to_string());
    }
    let w = closed(2, Scalar::ratio(2, 5), 3, vec![1, 2])?;
    if w.index_w != Some(Scalar::ratio(1, 1)) || w.index_a != Scalar::ratio(1, 1) {
        return Err(format!("Whitney example: {:?}", w.index_w));
    }
    Ok(format!("triangular law {{{}}}, Whitney 1", got.join(", ")))
}

fn assembly() -> Outcome {
    let mut notes = Vec::new();
    for (name, cfg) in [
        ("basic", basic(&[])),
        ("k=2", two_center(&[])),
        ("k=3 rank 2", three_center(&[])),
    ] {
        let space = cfg.space().map_err(|e| e.to_string())?;
        let bundles = cfg.bundles().map_err(|e| e.to_string())?;
        let p = pontryagin_number(&space, 1e-3, 100.0, &PontryaginOptions::default()).map_err(|e| e.to_string())?;
        let c = integrate_ch2(&space, &bundles, &QuadratureSpec::default(), Exec::Parallel).map_err(|e| e.to_string())?;
        let f = boundary_flux_f23(&space, &bundles, 1e3, Exec::Parallel).map_err(|e| e.to_string())?;
        let a = cfg.exact_a().map_err(|e| e.to_string())?;
        let params = SpectralParams {
            k: space.k(),
            summands: a
                .into_iter()
                .zip(&bundles.summands)
                .map(|(a, b)| SummandParams {
                    a,
                    m: b.m(),
                    v: Some(b.v.clone()),
                })
                .collect(),
        };
        let pieces = NumericPieces {
            pontryagin: Some(p.value),
            ch2: Some(c.value),
            flux: Some(f.extrapolated),
        };
        let r = boundary_and_assembly(&params, &pieces, 0.02).map_err(|e| format!("{name}: {e}"))?;
        if Scalar::ratio(r.rounded, 1) != r.closed.index_a || r.gap >= 0.02 {
            return Err(format!("{name}: assembled {} vs closed {}", r.assembled, r.closed.index_a));
        }
        notes.push(format!("{name} {:.5} -> {}", r.assembled, r.rounded));
    }
    for n in 0..=8 {
        for k in 0..=8 {
            if a_hat_cancellation(n, k) != BigRational::from_integer(0.into()) {
                return Err(format!("cancellation fails at n={n}, k={k}"));
            }
        }
    }
    Ok(format!("{}; cancellation exact for n,k <= 8", notes.join("; ")))
}

fn holonomy() -> Outcome {
    let ops = ["dmu_consistency", "r2_dmu_bounded", "asymptotic_lambda", "flux_integer", "patch_invariance"];
    let mut notes = Vec::new();
    for (name, cfg) in [
        ("basic", basic(&[Suite::Holonomy])),
        ("k=2", two_center(&[Suite::Holonomy])),
        ("k=3 rank 2", three_center(&[Suite::Holonomy])),
    ] {
        let r = run(&cfg);
        let res = records(&r, "holonomy", &ops)?;
        let rec = r.record("holonomy", "flux_integer").expect("present");
        let sums: Vec<i64> = cfg.bundles.iter().map(|b| b.v.iter().sum()).collect();
        if rec.values["m_hat"] != serde_json::json!(sums) {
            return Err(format!("{name}: m_hat {} vs {sums:?}", rec.values["m_hat"]));
        }
        notes.push(format!("{name} dmu {:.0e} lambda {:.0e} patch {:.0e}", res[0], res[2], res[4]));
    }
    Ok(notes.join("; "))
}

fn bernoulli() -> Outcome {
    let windows = [100, 200, 400, 800, 1600];
    let mut notes = Vec::new();
    for a in [0.1, 0.3, 0.77, -1.35] {
        let f = envelope_rates(a, &windows).map_err(|e| e.to_string())?;
        if (f.sine_slope + 1.0).abs() > 0.15 || (f.cosine_slope + 2.0).abs() > 0.15 {
            return Err(format!("a={a}: slopes {:.3}, {:.3}", f.sine_slope, f.cosine_slope));
        }
        let t = bernoulli_tools(a, 20_000).map_err(|e| e.to_string())?;
        let frac = a - a.floor();
        let half = 0.5 - frac;
        let b2 = frac * frac - frac + 1.0 / 6.0;
        if (t.sine_partial - half).abs() > 1e-3 || (t.cosine_partial - b2).abs() > 1e-5 {
            return Err(format!("a={a}: partial sums {} vs {half}, {} vs {b2}", t.sine_partial, t.cosine_partial));
        }
        notes.push(format!("a={a} slopes {:.2}/{:.2}", f.sine_slope, f.cosine_slope));
    }
    let q = b2_exact(&BigRational::new(1.into(), 4.into()));
    if q != BigRational::new((-1).into(), 48.into()) {
        return Err(format!("B2(1/4) = {q}"));
    }
    Ok(format!("{}; B2(1/4) = {q}", notes.join("; ")))
}

fn fredholm() -> Outcome {
    // (a_j as p/q with m_j, expected Fredholm, expected α, expected classes)
    type Row = (&'static [(i64, i64, i64)], bool, f64, &'static [&'static str]);
    const E3: &str = "exponential(rate<0.3)";
    let table: [Row; 20] = [
        (&[(3, 10, 0)], true, 0.3, &[E3]),
        (&[(3, 10, 0), (7, 10, 1)], true, 0.3, &[E3, E3]),
        (&[(0, 1, 0), (2, 5, 0)], false, 0.0, &["quadratic", "exponential(rate<0.4)"]),
        (&[(0, 1, 0)], false, 0.0, &["quadratic"]),
        (&[(1, 2, 0)], true, 0.5, &["exponential(rate<0.5)"]),
        (&[(5, 2, 3)], true, 0.5, &["exponential(rate<0.5)"]),
        (&[(1, 1, 0)], false, 0.0, &["quadratic"]),
        (&[(-3, 1, 2)], false, 0.0, &["quadratic"]),
        (&[(1, 10, 0)], true, 0.1, &["exponential(rate<0.1)"]),
        (&[(9, 10, 0)], true, 0.1, &["exponential(rate<0.1)"]),
        (&[(-1, 10, 0)], true, 0.1, &["exponential(rate<0.1)"]),
        (&[(37, 10, 0)], true, 0.3, &[E3]),
        (&[(6, 5, -1)], true, 0.2, &["exponential(rate<0.2)"]),
        (&[(1, 4, 0), (3, 4, 0)], true, 0.25, &["exponential(rate<0.25)", "exponential(rate<0.25)"]),
        (&[(1, 3, 0), (1, 1, 0)], false, 0.0, &["exponential(rate<0.3333333333333333)", "quadratic"]),
        (&[(2, 5, 1), (3, 5, -1), (11, 10, 0)], true, 0.1, &["exponential(rate<0.1)", "exponential(rate<0.1)", "exponential(rate<0.1)"]),
        (&[(-7, 2, 0)], true, 0.5, &["exponential(rate<0.5)"]),
        (&[(0, 1, 0), (0, 1, 0)], false, 0.0, &["quadratic", "quadratic"]),
        (&[(1, 64, 0)], true, 0.015625, &["exponential(rate<0.015625)"]),
        (&[(5, 1, 0), (1, 2, 0)], false, 0.0, &["quadratic", "exponential(rate<0.5)"]),
    ];
    for (i, (a, fredholm, alpha, classes)) in table.iter().enumerate() {
        let params = SpectralParams {
            k: 1,
            summands: a
                .iter()
                .map(|&(p, q, m)| SummandParams {
                    a: Scalar::ratio(p, q),
                    m,
                    v: None,
                })
                .collect(),
        };
        let r = fredholm_and_decay(&params);
        let got: Vec<String> = r.classes.iter().map(|c| c.to_string()).collect();
        if r.fredholm != *fredholm || (r.alpha - alpha).abs() > 1e-15 || got != *classes {
            return Err(format!("row {i}: got ({}, {}, {got:?})", r.fredholm, r.alpha));
        }
    }
    Ok("20/20 rows match".into())
}

fn determinism() -> Outcome {
    let cfg = two_center(&[Suite::Geometry, Suite::Holonomy, Suite::Chern2, Suite::Pontryagin]);
    let a = tnk_cli::run(&cfg, &Cache::disabled(), Exec::Parallel, None).map_err(|e| e.to_string())?;
    let b = tnk_cli::run(&cfg, &Cache::disabled(), Exec::Parallel, None).map_err(|e| e.to_string())?;
    let s = tnk_cli::run(&cfg, &Cache::disabled(), Exec::Sequential, None).map_err(|e| e.to_string())?;
    if a.deterministic_json() != b.deterministic_json() {
        return Err("repeat runs differ".into());
    }
    if a.deterministic_json() != s.deterministic_json() {
        return Err("sequential and parallel runs differ".into());
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = Cache::at(dir.path());
    let cold = tnk_cli::run(&cfg, &cache, Exec::Parallel, None).map_err(|e| e.to_string())?;
    let warm = tnk_cli::run(&cfg, &cache, Exec::Parallel, None).map_err(|e| e.to_string())?;
    if !cold.run.cache_hits.is_empty() || warm.run.cache_hits.len() < 3 {
        return Err(format!("cache hits: cold {:?}, warm {:?}", cold.run.cache_hits, warm.run.cache_hits));
    }
    if warm.deterministic_json() != a.deterministic_json() {
        return Err("cached report differs from fresh computation".into());
    }
    Ok(format!("3 fresh runs and a cached run bit-identical; warm hits {:?}", warm.run.cache_hits))
}

fn main() {
    let t = Instant::now();
    let inst = instanton_reports();
    let criteria: Vec<Criterion<'_>> = vec![
        ("Pontryagin number k/12", Box::new(pontryagin)),
        ("hyperkahler residuals", Box::new(hyperkahler)),
        ("ASD curvature", Box::new(|| asd(&inst))),
        ("curvature decay rates", Box::new(|| decay(&inst))),
        ("second Chern character", Box::new(ch2)),
        ("boundary flux", Box::new(flux)),
        ("index formula equivalence", Box::new(fuzz)),
        ("worked examples", Box::new(worked_examples)),
        ("assembled index", Box::new(assembly)),
        ("holonomy", Box::new(holonomy)),
        ("Bernoulli identities", Box::new(bernoulli)),
        ("Fredholm and decay classifier", Box::new(fredholm)),
        ("determinism and caching", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let c = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {}: {name} ({:.1}s): {detail}", i + 1, c.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
