use nalgebra::Vector3;
use proptest::prelude::*;
use tnk_core::forms::Orientation;
use tnk_core::holonomy::{holonomy_mu, holonomy_mu_fiber, kappa};
use tnk_core::instanton::{
    asd_residual, bochner_residual, connection_form, curvature_fd, curvature_form, decay_fit, gauge_function,
    InstantonBundle, LineBundle,
};
use tnk_core::{Exec, GhSpace, PatchChart, Side};

fn two_center() -> GhSpace {
    GhSpace::new(1.0, &[[0.0, 0.0, 0.4], [0.5, -0.3, -0.2]]).unwrap()
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (2.0..30.0_f64, 0.4..2.7_f64, 0.0..std::f64::consts::TAU).prop_map(|(r, th, ph)| {
        Vector3::new(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos())
    })
}

fn bundle() -> impl Strategy<Value = LineBundle> {
    (0.05..3.9_f64, -3..=3_i64, -3..=3_i64).prop_map(|(l, a, b)| LineBundle::new(l, vec![a, b]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analytic_curvature_is_anti_self_dual(b in bundle(), x in point()) {
        let f = curvature_form(&two_center(), &b, &x).unwrap();
        prop_assume!(f.norm() > 0.0);
        prop_assert!(asd_residual(&f, Orientation::Standard) < 1e-10);
    }

    #[test]
    fn curvature_is_gauge_invariant(b in bundle(), x in point()) {
        let s = two_center();
        let analytic = curvature_form(&s, &b, &x).unwrap();
        for sides in [vec![Side::North, Side::North], vec![Side::South, Side::North], vec![Side::South, Side::South]] {
            let patch = PatchChart::with_sides(sides);
            prop_assume!(patch.string_distance(&s, &x) > 0.5);
            let fd = curvature_fd(&s, &b, &x, &patch, 1e-3 * x.norm()).unwrap();
            prop_assert!(fd.max_abs_diff(&analytic) < 1e-5 * analytic.norm().max(1e-6));
        }
    }

    #[test]
    fn connection_changes_by_exact_gauge_term(b in bundle(), x in point()) {
        let s = two_center();
        let (n, so) = (PatchChart::north(2), PatchChart::south(2));
        prop_assume!(n.string_distance(&s, &x) > 0.5 && so.string_distance(&s, &x) > 0.5);
        let an = connection_form(&s, &b, &x, &n).unwrap().coords;
        let asouth = connection_form(&s, &b, &x, &so).unwrap().coords;
        let h = 1e-4;
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = h;
            let d = (gauge_function(&s, &b, &(x + e), &so, &n).unwrap() - gauge_function(&s, &b, &(x - e), &so, &n).unwrap()) / (2.0 * h);
            // Coordinate components also differ through τ_N = τ_S + 2φ, which moves dτ weight.
            let dshift = (so.tau_shift_to(&n, &s, &(x + e)).unwrap() - so.tau_shift_to(&n, &s, &(x - e)).unwrap()) / (2.0 * h);
            let expected = asouth[i] + d - an[3] * dshift;
            prop_assert!((an[i] - expected).abs() < 1e-6 * (1.0 + an[i].abs()), "axis {}: {} vs {}", i, an[i], expected);
        }
    }

    #[test]
    fn curvature_is_additive(a in bundle(), b in bundle(), x in point()) {
        let s = two_center();
        let sum = LineBundle::new(a.lambda + b.lambda, a.v.iter().zip(&b.v).map(|(p, q)| p + q).collect()).unwrap();
        let fa = curvature_form(&s, &a, &x).unwrap();
        let fb = curvature_form(&s, &b, &x).unwrap();
        let fs = curvature_form(&s, &sum, &x).unwrap();
        prop_assert!(fs.max_abs_diff(&fa.add(&fb)) < 1e-13 * (1.0 + fs.norm()));
    }

    #[test]
    fn holonomy_is_patch_invariant(a in bundle(), b in bundle(), x in point()) {
        let s = two_center();
        let bs = InstantonBundle::new(vec![a, b]);
        let ref_sample = holonomy_mu(&s, &bs, &x).unwrap();
        for sides in [vec![Side::North, Side::South], vec![Side::South, Side::South]] {
            let f = holonomy_mu_fiber(&s, &bs, &x, &PatchChart::with_sides(sides)).unwrap();
            for (p, q) in ref_sample.mu.iter().zip(&f.mu) {
                let d = (p - q).abs();
                prop_assert!(d.min(0.5 - d) < 1e-12);
            }
            if let (Some(k1), Some(k2)) = (ref_sample.kappa, f.kappa) {
                prop_assert!((k1 - k2).abs() < 1e-12);
            }
        }
        prop_assert_eq!(kappa(&ref_sample.mu), ref_sample.kappa);
    }
}

#[test]
fn decay_exponents_on_three_rays() {
    let s = two_center();
    let b = LineBundle::new(0.4, vec![1, 2]).unwrap();
    for dir in [Vector3::new(1.0, 0.2, 0.1), Vector3::new(-0.3, 1.0, 0.5), Vector3::new(0.2, -0.4, -1.0)] {
        let fit = decay_fit(&s, &b, &dir, (1e2, 1e4), 12, Exec::Parallel).unwrap();
        assert!((fit.exponent_f.unwrap() + 2.0).abs() < 0.05, "{fit:?}");
        assert!((fit.exponent_grad_f.unwrap() + 3.0).abs() < 0.1, "{fit:?}");
    }
}

#[test]
fn bochner_identity_holds_away_from_centers() {
    let s = two_center();
    let b = LineBundle::new(0.7, vec![2, -1]).unwrap();
    let r = bochner_residual(&s, &b, &Vector3::new(2.0, 1.5, -1.0), 1e-2).unwrap();
    assert!(r.relative < 1e-4, "{r:?}");
}
