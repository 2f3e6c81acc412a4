//! Exact-arithmetic fuzzing of the equivalence of the index presentations.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{index_intro, index_trace, index_whitney, reduced, IndexScalar, Scalar, SpectralParams, SummandParams};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub cases: usize,
    pub seed: u64,
    pub k_max: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// `m_j ∈ [−m_abs_max, m_abs_max]`.
    pub m_abs_max: i64,
    pub den_max: i64,
    pub a_abs_max: i64,
    /// Charges for Whitney cases lie in `[−v_abs_max, v_abs_max]`.
    pub v_abs_max: i64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            cases: 100_000,
            seed: 0,
            k_max: 6,
            n_min: 1,
            n_max: 5,
            m_abs_max: 10,
            den_max: 64,
            a_abs_max: 20,
            v_abs_max: 5,
        }
    }
}

/// A self-contained, replayable case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzCase {
    pub id: u64,
    pub seed: u64,
    /// `"ab"` compares A and B; `"whitney"` compares W and A with the closed-form `ch₂`.
    pub kind: String,
    pub k: usize,
    /// `"p/q"` strings.
    pub a: Vec<String>,
    pub m: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<i64>>>,
    pub ch2: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzSummary {
    pub seed: u64,
    pub ab_cases: usize,
    pub whitney_cases: usize,
    pub mismatches: Vec<FuzzCase>,
}

fn rational(rng: &mut ChaCha8Rng, den_max: i64, abs_max: i64, non_integer: bool) -> (i64, i64) {
    loop {
        let den = rng.random_range(2..=den_max.max(2));
        let num = rng.random_range(-abs_max * den..=abs_max * den);
        if non_integer && num % den == 0 {
            continue;
        }
        return reduced(num, den);
    }
}

fn big(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn evaluate(case: &FuzzCase) -> Result<(BigRational, BigRational)> {
    let a = case
        .a
        .iter()
        .map(|s| match Scalar::parse(s)? {
            Scalar::Exact(r) => Ok(r),
            Scalar::Real(_) => Err(Error::InvalidParameter("fuzz inputs must be exact".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    let ch2 = match Scalar::parse(&case.ch2)? {
        Scalar::Exact(r) => r,
        Scalar::Real(_) => return Err(Error::InvalidParameter("fuzz ch2 must be exact".into())),
    };
    if a.iter().any(|x| x.is_integer()) {
        return Err(Error::IntegerHolonomy { value: format!("{:?}", case.a) });
    }
    let lhs_rhs = match case.kind.as_str() {
        "ab" => (
            index_intro(case.k, &a, &case.m, &ch2),
            index_trace(case.k, &a, &case.m, &ch2),
        ),
        "whitney" => {
            let v = case
                .v
                .as_ref()
                .ok_or_else(|| Error::MissingPiece("center charges".into()))?;
            let refs: Vec<&Vec<i64>> = v.iter().collect();
            (index_whitney(&a, &refs), index_intro(case.k, &a, &case.m, &ch2))
        }
        other => return Err(Error::InvalidParameter(format!("unknown fuzz kind {other}"))),
    };
    Ok(lhs_rhs)
}

fn generate(cfg: &FuzzConfig, id: u64, whitney: bool) -> Result<FuzzCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2 * id + whitney as u64);
    let k = rng.random_range(0..=cfg.k_max);
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let mut a = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, q) = rational(&mut rng, cfg.den_max, cfg.a_abs_max, true);
        a.push(format!("{p}/{q}"));
        if whitney {
            let v: Vec<i64> = (0..k).map(|_| rng.random_range(-cfg.v_abs_max..=cfg.v_abs_max)).collect();
            m.push(v.iter().sum());
            vs.push(v);
        } else {
            m.push(rng.random_range(-cfg.m_abs_max..=cfg.m_abs_max));
        }
    }
    let ch2 = if whitney {
        let params = SpectralParams {
            k,
            summands: a
                .iter()
                .zip(&m)
                .zip(&vs)
                .map(|((a, m), v)| {
                    Ok(SummandParams {
                        a: Scalar::parse(a)?,
                        m: *m,
                        v: Some(v.clone()),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        params
            .ch2_closed_form()
            .ok_or_else(|| Error::MissingPiece("closed-form ch2".into()))?
            .to_string()
    } else {
        let (p, q) = rational(&mut rng, cfg.den_max, 50, false);
        big(p, q).to_string()
    };
    let mut case = FuzzCase {
        id,
        seed: cfg.seed,
        kind: if whitney { "whitney" } else { "ab" }.into(),
        k,
        a,
        m,
        v: whitney.then_some(vs),
        ch2,
        lhs: String::new(),
        rhs: String::new(),
    };
    let (l, r) = evaluate(&case)?;
    case.lhs = l.to_string();
    case.rhs = r.to_string();
    Ok(case)
}

/// Runs `cfg.cases` A-vs-B cases and as many Whitney cases; returns every mismatch.
pub fn fuzz_equivalence(cfg: &FuzzConfig, exec: Exec) -> Result<FuzzSummary> {
    let results = exec.map_range(2 * cfg.cases, |i| -> Result<Option<FuzzCase>> {
        let case = generate(cfg, (i / 2) as u64, i % 2 == 1)?;
        Ok((case.lhs != case.rhs).then_some(case))
    });
    let mut mismatches = Vec::new();
    for r in results {
        if let Some(c) = r? {
            mismatches.push(c);
        }
    }
    Ok(FuzzSummary {
        seed: cfg.seed,
        ab_cases: cfg.cases,
        whitney_cases: cfg.cases,
        mismatches,
    })
}

/// Re-evaluates a persisted case; `true` when both sides agree.
pub fn replay_case(case: &FuzzCase) -> Result<bool> {
    let (l, r) = evaluate(case)?;
    Ok(l == r)
}

/// Float evaluation of a case, for diagnostics.
pub fn case_values_f64(case: &FuzzCase) -> Result<(f64, f64)> {
    let (l, r) = evaluate(case)?;
    Ok((IndexScalar::to_f64(&l), IndexScalar::to_f64(&r)))
}
