use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use tnk_core::index::{
    a_hat_cancellation, b2_exact, envelope_rates, fredholm_and_decay, fuzz_equivalence, index_closed_forms,
    index_intro, index_trace, index_whitney, replay_case, DecayClass, FuzzCase, FuzzConfig, Scalar, SpectralParams,
    SummandParams,
};
use tnk_core::Exec;

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(d))
}

/// Index assembled from its pieces with the Pontryagin number set to k/12:
/// `ch₂ + Σ_j (−k/12 + (k/2) B₂({a_j}) + ({a_j} − ½)(m_j − k a_j))`.
fn assembled_oracle(k: i64, a: &[BigRational], m: &[i64], ch2: &BigRational) -> BigRational {
    let kq = BigRational::from_integer(k.into());
    let mut s = ch2.clone();
    for (aj, mj) in a.iter().zip(m) {
        let fr = aj - aj.floor();
        let phi = BigRational::from_integer((*mj).into()) - kq.clone() * aj;
        s += -kq.clone() / BigRational::from_integer(12.into())
            + kq.clone() / BigRational::from_integer(2.into()) * b2_exact(aj)
            + (fr - q(1, 2)) * phi;
    }
    s
}

fn rational() -> impl Strategy<Value = BigRational> {
    (2..60_i64, -600..600_i64).prop_filter_map("non-integer", |(d, p)| (p % d != 0).then(|| q(p, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn presentations_agree_with_assembled_oracle(
        k in 0..=6_usize,
        a in prop::collection::vec(rational(), 1..=5),
        m in prop::collection::vec(-10..=10_i64, 5),
        ch2 in rational(),
    ) {
        let m = &m[..a.len()];
        let ia = index_intro(k, &a, m, &ch2);
        let ib = index_trace(k, &a, m, &ch2);
        prop_assert_eq!(&ia, &ib);
        prop_assert_eq!(ia, assembled_oracle(k as i64, &a, m, &ch2));
    }

    #[test]
    fn whitney_matches_intro_with_closed_form_ch2(
        k in 1..=4_usize,
        a in prop::collection::vec(rational(), 1..=3),
        v in prop::collection::vec(prop::collection::vec(-4..=4_i64, 4), 3),
    ) {
        let v: Vec<Vec<i64>> = v[..a.len()].iter().map(|row| row[..k].to_vec()).collect();
        let params = SpectralParams {
            k,
            summands: a.iter().zip(&v).map(|(a, v)| SummandParams {
                a: Scalar::Exact(a.clone()),
                m: v.iter().sum(),
                v: Some(v.clone()),
            }).collect(),
        };
        let ch2 = params.ch2_closed_form().unwrap();
        let c = index_closed_forms(&params, &ch2).unwrap();
        prop_assert!(c.index_w.is_some());
        prop_assert_eq!(c.index_w.unwrap(), c.index_a.clone());
        let refs: Vec<&Vec<i64>> = v.iter().collect();
        prop_assert!(index_whitney(&a, &refs).is_integer());
    }
}

#[test]
fn triangular_law_up_to_twenty() {
    for n in 0..=20_i64 {
        for frac in [q(1, 7), q(1, 2), q(5, 6)] {
            let a = BigRational::from_integer(n.into()) + frac;
            let ch2 = a.clone() * a.clone() / BigRational::from_integer(2.into());
            let idx = index_intro(1, std::slice::from_ref(&a), &[0], &ch2);
            assert_eq!(idx, BigRational::from_integer((n * (n + 1) / 2).into()), "n={n}");
        }
    }
}

#[test]
fn worked_examples() {
    for (a, want) in [(q(3, 10), 0), (q(6, 5), 1), (q(5, 2), 3), (q(37, 10), 6)] {
        let params = SpectralParams {
            k: 1,
            summands: vec![SummandParams {
                a: Scalar::Exact(a),
                m: 0,
                v: Some(vec![0]),
            }],
        };
        let c = index_closed_forms(&params, &params.ch2_closed_form().unwrap()).unwrap();
        assert_eq!(c.index_a, Scalar::ratio(want, 1));
        assert_eq!(c.index_b, Scalar::ratio(want, 1));
    }
    let params = SpectralParams {
        k: 2,
        summands: vec![SummandParams {
            a: Scalar::ratio(2, 5),
            m: 3,
            v: Some(vec![1, 2]),
        }],
    };
    let ch2 = params.ch2_closed_form().unwrap();
    assert_eq!(ch2, Scalar::ratio(73, 50));
    let c = index_closed_forms(&params, &ch2).unwrap();
    assert_eq!(c.index_a, Scalar::ratio(1, 1));
    assert_eq!(c.index_w, Some(Scalar::ratio(1, 1)));
}

#[test]
fn a_hat_term_cancels_symbolically() {
    for n in 0..6 {
        for k in 0..6 {
            assert!(a_hat_cancellation(n, k).is_zero());
        }
    }
}

#[test]
fn bernoulli_rates_and_spot_value() {
    assert_eq!(b2_exact(&q(1, 4)), q(-1, 48));
    assert_eq!(b2_exact(&q(0, 1)), q(1, 6));
    for a in [0.1, 0.3, 0.77] {
        let f = envelope_rates(a, &[100, 200, 400, 800, 1600]).unwrap();
        assert!((f.sine_slope + 1.0).abs() < 0.15, "{a}: {f:?}");
        assert!((f.cosine_slope + 2.0).abs() < 0.15, "{a}: {f:?}");
    }
}

#[test]
fn fuzz_smoke_and_replay() {
    let cfg = FuzzConfig {
        cases: 2000,
        seed: 99,
        ..FuzzConfig::default()
    };
    let s = fuzz_equivalence(&cfg, Exec::Sequential).unwrap();
    assert!(s.mismatches.is_empty());
    let p = fuzz_equivalence(&cfg, Exec::Parallel).unwrap();
    assert_eq!(s, p);
}

#[test]
fn replay_of_known_whitney_case() {
    let case = FuzzCase {
        id: 0,
        seed: 0,
        kind: "whitney".into(),
        k: 2,
        a: vec!["2/5".into()],
        m: vec![3],
        v: Some(vec![vec![1, 2]]),
        ch2: "73/50".into(),
        lhs: "1".into(),
        rhs: "1".into(),
    };
    assert!(replay_case(&case).unwrap());
}

#[test]
fn fredholm_classifier_cases() {
    let p = |items: &[(BigRational, i64)]| SpectralParams {
        k: 1,
        summands: items
            .iter()
            .map(|(a, m)| SummandParams {
                a: Scalar::Exact(a.clone()),
                m: *m,
                v: None,
            })
            .collect(),
    };
    let r = fredholm_and_decay(&p(&[(q(3, 10), 0)]));
    assert!(r.fredholm);
    assert!((r.alpha - 0.3).abs() < 1e-15);
    let r = fredholm_and_decay(&p(&[(q(3, 10), 0), (q(7, 10), 1)]));
    assert!((r.alpha - 0.3).abs() < 1e-15);
    let r = fredholm_and_decay(&p(&[(BigRational::zero(), 0), (q(2, 5), 0)]));
    assert!(!r.fredholm);
    assert_eq!(r.classes[0], DecayClass::Quadratic);
    assert_eq!(r.classes[0].to_string(), "quadratic");
    assert!(matches!(r.classes[1], DecayClass::Exponential { .. }));
}
