//! Closed-form L² index of the Dirac operator coupled to a diagonal instanton.
//!
//! With `a_j = λ_j / l`, total charges `m_j`, `k` centers and `ch₂` the second
//! Chern character, three presentations of the index are evaluated:
//!
//! * `A = Σ_j ((½ − {a_j})(k⌊a_j⌋ − m_j) − (k/2){a_j}²) + ch₂`
//! * `B = Σ_j ((k/2){a_j}² − (k/2){a_j} − {a_j}(k a_j − m_j) + ½(k a_j − m_j)) + ch₂`
//! * `W = Σ_{j,σ} (⌊a_j⌋ − v_jσ)(⌊a_j⌋ − v_jσ + 1)/2` when per-center charges are known.
//!
//! All three are computed in exact rational arithmetic when the inputs are rational.

mod bernoulli;
mod fuzz;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GhSpace;
use crate::instanton::{InstantonBundle, INTEGER_TOLERANCE};

pub use bernoulli::{
    b2, b2_exact, bernoulli_tools, cos_2pi, envelope_rates, half_minus_frac, sin_2pi, BernoulliReport, RateFit,
};
pub use fuzz::{case_values_f64, fuzz_equivalence, replay_case, FuzzCase, FuzzConfig, FuzzSummary};

/// Arithmetic needed by the index formulas.
pub trait IndexScalar:
    Clone + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn half() -> Self;
    fn floor_part(&self) -> Self;
    fn is_integer(&self) -> bool;
    fn to_f64(&self) -> f64;

    fn frac_part(&self) -> Self {
        self.clone() - self.floor_part()
    }
}

impl IndexScalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn half() -> Self {
        BigRational::new(BigInt::one(), BigInt::from(2))
    }
    fn floor_part(&self) -> Self {
        self.floor()
    }
    fn is_integer(&self) -> bool {
        BigRational::is_integer(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl IndexScalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn half() -> Self {
        0.5
    }
    fn floor_part(&self) -> Self {
        self.floor()
    }
    fn is_integer(&self) -> bool {
        (self - self.round()).abs() < INTEGER_TOLERANCE
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// A value that is either an exact rational or a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Real(f64),
}

impl Scalar {
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => IndexScalar::to_f64(r),
            Scalar::Real(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Real(_) => None,
        }
    }

    /// Parses `"p/q"`, an integer, or a float literal; decimals become exact rationals.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad rational {s}")))?;
            let q: BigInt = q.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad rational {s}")))?;
            if q.is_zero() {
                return Err(Error::InvalidParameter(format!("zero denominator in {s}")));
            }
            return Ok(Scalar::Exact(BigRational::new(p, q)));
        }
        decimal_to_rational(s)
            .map(Scalar::Exact)
            .ok_or_else(|| Error::InvalidParameter(format!("cannot parse number {s}")))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{r}"),
            Scalar::Real(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => s.serialize_str(&r.to_string()),
            Scalar::Real(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Scalar::Real(v)),
            Raw::S(s) => Scalar::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Exact value of a plain decimal literal such as `-2.5` or `1e-3`.
fn decimal_to_rational(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(all);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Spectral data of one summand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummandParams {
    /// `a = λ/l`.
    pub a: Scalar,
    pub m: i64,
    /// Per-center charges, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub k: usize,
    pub summands: Vec<SummandParams>,
}

impl SpectralParams {
    pub fn n(&self) -> usize {
        self.summands.len()
    }

    /// Floating parameters from a space and bundle; `a = λ/l` is not rationalised.
    pub fn from_bundles(space: &GhSpace, bundles: &InstantonBundle) -> Self {
        Self {
            k: space.k(),
            summands: bundles
                .summands
                .iter()
                .map(|b| SummandParams {
                    a: Scalar::Real(b.a(space.l())),
                    m: b.m(),
                    v: Some(b.v.clone()),
                })
                .collect(),
        }
    }

    pub fn all_exact(&self) -> bool {
        self.summands.iter().all(|s| s.a.is_exact())
    }

    /// Rejects integer `a_j`.
    pub fn validate(&self) -> Result<()> {
        for s in &self.summands {
            let integer = match &s.a {
                Scalar::Exact(r) => r.is_integer(),
                Scalar::Real(v) => IndexScalar::is_integer(v),
            };
            if integer {
                return Err(Error::IntegerHolonomy { value: s.a.to_string() });
            }
            if let Some(v) = &s.v {
                if v.len() != self.k {
                    return Err(Error::InvalidParameter(format!(
                        "summand has {} center charges for k = {}",
                        v.len(),
                        self.k
                    )));
                }
                if v.iter().sum::<i64>() != s.m {
                    return Err(Error::InvalidParameter("center charges do not sum to m".into()));
                }
            }
        }
        Ok(())
    }

    fn exact_a(&self) -> Option<Vec<BigRational>> {
        self.summands.iter().map(|s| s.a.as_exact().cloned()).collect()
    }

    fn real_a(&self) -> Vec<f64> {
        self.summands.iter().map(|s| s.a.to_f64()).collect()
    }

    /// `Σ_j ½(k a_j² − 2 a_j m_j + Σ_σ v_jσ²)`, when all charges are known.
    pub fn ch2_closed_form(&self) -> Option<Scalar> {
        let v: Option<Vec<&Vec<i64>>> = self.summands.iter().map(|s| s.v.as_ref()).collect();
        let v = v?;
        let m: Vec<i64> = self.summands.iter().map(|s| s.m).collect();
        Some(match self.exact_a() {
            Some(a) => Scalar::Exact(ch2_generic(self.k, &a, &m, &v)),
            None => Scalar::Real(ch2_generic(self.k, &self.real_a(), &m, &v)),
        })
    }
}

fn ch2_generic<T: IndexScalar>(k: usize, a: &[T], m: &[i64], v: &[&Vec<i64>]) -> T {
    let k = T::from_i64(k as i64);
    let mut s = T::from_i64(0);
    for ((a, m), v) in a.iter().zip(m).zip(v) {
        let v2: i64 = v.iter().map(|x| x * x).sum();
        let m = T::from_i64(*m);
        s = s + T::half() * (k.clone() * a.clone() * a.clone() - T::from_i64(2) * a.clone() * m + T::from_i64(v2));
    }
    s
}

/// Intro form `A`.
pub fn index_intro<T: IndexScalar>(k: usize, a: &[T], m: &[i64], ch2: &T) -> T {
    let kk = T::from_i64(k as i64);
    let mut s = ch2.clone();
    for (a, m) in a.iter().zip(m) {
        let fr = a.frac_part();
        let fl = a.floor_part();
        s = s + (T::half() - fr.clone()) * (kk.clone() * fl - T::from_i64(*m))
            - T::half() * kk.clone() * fr.clone() * fr;
    }
    s
}

/// Trace form `B`.
pub fn index_trace<T: IndexScalar>(k: usize, a: &[T], m: &[i64], ch2: &T) -> T {
    let kk = T::from_i64(k as i64);
    let mut s = ch2.clone();
    for (a, m) in a.iter().zip(m) {
        let fr = a.frac_part();
        let phi = kk.clone() * a.clone() - T::from_i64(*m);
        s = s + T::half() * kk.clone() * fr.clone() * fr.clone() - T::half() * kk.clone() * fr.clone()
            - fr * phi.clone()
            + T::half() * phi;
    }
    s
}

/// Whitney-sum form `W`.
pub fn index_whitney<T: IndexScalar>(a: &[T], v: &[&Vec<i64>]) -> T {
    let mut s = T::from_i64(0);
    for (a, v) in a.iter().zip(v) {
        let fl = a.floor_part();
        for q in v.iter() {
            let d = fl.clone() - T::from_i64(*q);
            s = s + T::half() * d.clone() * (d + T::from_i64(1));
        }
    }
    s
}

/// The three closed forms for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedForms {
    pub index_a: Scalar,
    pub index_b: Scalar,
    pub index_w: Option<Scalar>,
    pub ch2: Scalar,
    pub exact: bool,
    /// `|A − B|` (zero in exact arithmetic).
    pub residual_ab: f64,
    /// `|W − A|` when `W` applies.
    pub residual_wa: Option<f64>,
}

/// Evaluates the closed forms; exact when `params` and `ch2` are exact.
///
/// `W` is only meaningful when `ch2` is the closed form
/// `½ tr(kΛ² − 2ΛM + diag Σ v²)`, and is evaluated only then.
pub fn index_closed_forms(params: &SpectralParams, ch2: &Scalar) -> Result<ClosedForms> {
    params.validate()?;
    let m: Vec<i64> = params.summands.iter().map(|s| s.m).collect();
    let v: Option<Vec<&Vec<i64>>> = params.summands.iter().map(|s| s.v.as_ref()).collect();
    let closed = params.ch2_closed_form();
    let w_applies = v.is_some()
        && closed.as_ref().is_some_and(|c| match (c, ch2) {
            (Scalar::Exact(x), Scalar::Exact(y)) => x == y,
            _ => (c.to_f64() - ch2.to_f64()).abs() <= 1e-12 * (1.0 + ch2.to_f64().abs()),
        });
    match (params.exact_a(), ch2) {
        (Some(a), Scalar::Exact(c)) => {
            let ia = index_intro(params.k, &a, &m, c);
            let ib = index_trace(params.k, &a, &m, c);
            let iw = if w_applies { v.as_ref().map(|v| index_whitney(&a, v)) } else { None };
            let residual_ab = IndexScalar::to_f64(&(ia.clone() - ib.clone())).abs();
            let residual_wa = iw.as_ref().map(|w| IndexScalar::to_f64(&(w.clone() - ia.clone())).abs());
            Ok(ClosedForms {
                index_a: Scalar::Exact(ia),
                index_b: Scalar::Exact(ib),
                index_w: iw.map(Scalar::Exact),
                ch2: ch2.clone(),
                exact: true,
                residual_ab,
                residual_wa,
            })
        }
        _ => {
            let a = params.real_a();
            let c = ch2.to_f64();
            let ia = index_intro(params.k, &a, &m, &c);
            let ib = index_trace(params.k, &a, &m, &c);
            let iw = if w_applies { v.as_ref().map(|v| index_whitney(&a, v)) } else { None };
            Ok(ClosedForms {
                index_a: Scalar::Real(ia),
                index_b: Scalar::Real(ib),
                index_w: iw.map(Scalar::Real),
                ch2: ch2.clone(),
                exact: false,
                residual_ab: (ia - ib).abs(),
                residual_wa: iw.map(|w| (w - ia).abs()),
            })
        }
    }
}

/// `(k/2) · n · (1/6) − n · k/12`, evaluated exactly.
pub fn a_hat_cancellation(n: usize, k: usize) -> BigRational {
    let n = BigRational::from_i64(n as i64);
    let k = BigRational::from_i64(k as i64);
    let sixth = BigRational::new(BigInt::one(), BigInt::from(6));
    let twelfth = BigRational::new(BigInt::one(), BigInt::from(12));
    BigRational::half() * k.clone() * n.clone() * sixth - n * k * twelfth
}

/// Numerically computed inputs to the assembled index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NumericPieces {
    /// Pontryagin number `(1/192π²)∫ tr R∧R`.
    pub pontryagin: Option<f64>,
    pub ch2: Option<f64>,
    /// `(i/2π)∮ F₂₃` per summand.
    pub flux: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub closed: ClosedForms,
    /// `−n · P`.
    pub a_hat_term: f64,
    pub ch2_numeric: f64,
    /// `(k/2) Σ_j ({a_j}² − {a_j} + 1/6)`.
    pub bernoulli_term: f64,
    /// `Σ_j ({a_j} Φ_j − Φ_j / 2)`.
    pub flux_term: f64,
    pub assembled: f64,
    pub rounded: i64,
    pub gap: f64,
    /// `|assembled − A|`.
    pub residual_vs_closed: f64,
    /// Whether the `1/6` term cancels `−n k/12` exactly.
    pub cancellation_exact: bool,
    /// `|−n P + n k/12|` with the numeric Pontryagin number.
    pub cancellation_numeric: f64,
}

/// Assembles `−n P + ch₂ + (k/2) tr({Λ}² − {Λ} + 1/6) + Σ_j ({a_j} Φ_j − Φ_j/2)`.
pub fn boundary_and_assembly(params: &SpectralParams, pieces: &NumericPieces, tolerance: f64) -> Result<IndexReport> {
    params.validate()?;
    let p = pieces
        .pontryagin
        .ok_or_else(|| Error::MissingPiece("Pontryagin number".into()))?;
    let ch2 = pieces.ch2.ok_or_else(|| Error::MissingPiece("ch2".into()))?;
    let flux = pieces
        .flux
        .as_ref()
        .ok_or_else(|| Error::MissingPiece("boundary flux".into()))?;
    if flux.len() != params.n() {
        return Err(Error::MissingPiece(format!(
            "boundary flux has {} entries for {} summands",
            flux.len(),
            params.n()
        )));
    }
    let closed_ch2 = params.ch2_closed_form().unwrap_or(Scalar::Real(ch2));
    let closed = index_closed_forms(params, &closed_ch2)?;
    let n = params.n();
    let k = params.k as f64;
    let a = params.real_a();
    let a_hat_term = -(n as f64) * p;
    let mut bern = Vec::with_capacity(n);
    let mut fl = Vec::with_capacity(n);
    for (aj, phi) in a.iter().zip(flux) {
        let fr = aj.frac_part();
        bern.push(0.5 * k * (fr * fr - fr + 1.0 / 6.0));
        fl.push(fr * phi - 0.5 * phi);
    }
    let bernoulli_term: f64 = bern.iter().sum();
    let flux_term: f64 = fl.iter().sum();
    let assembled = a_hat_term + ch2 + bernoulli_term + flux_term;
    let rounded = assembled.round() as i64;
    let gap = (assembled - rounded as f64).abs();
    let cancellation_exact = a_hat_cancellation(n, params.k).is_zero();
    let report = IndexReport {
        residual_vs_closed: (assembled - closed.index_a.to_f64()).abs(),
        closed,
        a_hat_term,
        ch2_numeric: ch2,
        bernoulli_term,
        flux_term,
        assembled,
        rounded,
        gap,
        cancellation_exact,
        cancellation_numeric: (a_hat_term + n as f64 * k / 12.0).abs(),
    };
    if gap > tolerance {
        return Err(Error::NotInteger {
            value: assembled,
            gap,
            tolerance,
        });
    }
    Ok(report)
}

/// Decay class of harmonic spinors for one summand.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum DecayClass {
    /// Decays like `e^{−b r}` for every `b < rate_bound`.
    Exponential { rate_bound: f64 },
    /// `r² h` stays bounded.
    Quadratic,
}

impl fmt::Display for DecayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayClass::Exponential { rate_bound } => write!(f, "exponential(rate<{rate_bound})"),
            DecayClass::Quadratic => write!(f, "quadratic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmReport {
    pub fredholm: bool,
    /// `min_j dist(a_j, ℤ)`.
    pub alpha: f64,
    pub classes: Vec<DecayClass>,
}

pub fn fredholm_and_decay(params: &SpectralParams) -> FredholmReport {
    let dists: Vec<f64> = params
        .summands
        .iter()
        .map(|s| match &s.a {
            Scalar::Exact(r) => {
                let fr = r.frac_part();
                let d = if fr > BigRational::half() { BigRational::one() - fr } else { fr };
                IndexScalar::to_f64(&d)
            }
            Scalar::Real(v) => {
                let d = (v - v.round()).abs();
                if d < INTEGER_TOLERANCE {
                    0.0
                } else {
                    d
                }
            }
        })
        .collect();
    let alpha = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha = if alpha.is_finite() { alpha } else { 0.0 };
    let fredholm = dists.iter().all(|d| *d > 0.0);
    let classes = dists
        .iter()
        .map(|d| {
            if *d > 0.0 {
                // Without Fredholmness α is zero; the summand's own gap still bounds its rate.
                DecayClass::Exponential {
                    rate_bound: if fredholm { alpha } else { *d },
                }
            } else {
                DecayClass::Quadratic
            }
        })
        .collect();
    FredholmReport {
        fredholm,
        alpha,
        classes,
    }
}

/// Greatest common divisor helper used when normalising fuzz inputs.
pub(crate) fn reduced(num: i64, den: i64) -> (i64, i64) {
    let g = num.gcd(&den).max(1);
    (num / g, den / g)
}
