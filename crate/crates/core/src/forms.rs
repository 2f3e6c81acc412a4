//! Two-forms in a four-dimensional orthonormal frame and their Hodge duals.
//!
//! Frame indices run `0..4` and stand for `e¹, e², e³, e⁴`; `e⁴` is the
//! fiber direction. The reference orientation is `e¹∧e²∧e³∧e⁴`, which equals
//! `V d³x ∧ (dτ + ω)`.

use serde::{Deserialize, Serialize};

/// Orientation used when taking Hodge duals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `dVol = V d³x ∧ (dτ + ω)`.
    #[default]
    Standard,
    /// The opposite orientation; swaps self-dual and anti-self-dual.
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }
}

/// Levi-Civita symbol on four indices.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Antisymmetric `F_ab` in an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoForm(pub [[f64; 4]; 4]);

/// Index pairs `a < b` in the order used by [`TwoForm::components`].
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl TwoForm {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from the six independent components `F_ab`, `a < b`, in [`PAIRS`] order.
    pub fn from_components(c: [f64; 6]) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            m[a][b] = c[k];
            m[b][a] = -c[k];
        }
        Self(m)
    }

    /// The wedge `e^a ∧ e^b` of two frame covectors (zero-based).
    pub fn basis(a: usize, b: usize) -> Self {
        let mut m = [[0.0; 4]; 4];
        if a != b {
            m[a][b] = 1.0;
            m[b][a] = -1.0;
        }
        Self(m)
    }

    pub fn components(&self) -> [f64; 6] {
        PAIRS.map(|(a, b)| self.0[a][b])
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[a][b]
    }

    /// Pointwise norm `|F|² = Σ_{a<b} F_ab²`.
    pub fn norm(&self) -> f64 {
        self.components().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn hodge(&self, orientation: Orientation) -> Self {
        let s = orientation.sign();
        let mut out = [[0.0; 4]; 4];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for c in 0..4 {
                    for d in 0..4 {
                        acc += levi_civita([a, b, c, d]) * self.0[c][d];
                    }
                }
                *v = 0.5 * s * acc;
            }
        }
        Self(out)
    }

    /// `½(F + *F)`.
    pub fn self_dual_part(&self, orientation: Orientation) -> Self {
        self.add(&self.hodge(orientation)).scale(0.5)
    }

    /// `½(F − *F)`.
    pub fn anti_self_dual_part(&self, orientation: Orientation) -> Self {
        self.sub(&self.hodge(orientation)).scale(0.5)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.0;
        for (a, row) in m.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v += other.0[a][b];
            }
        }
        Self(m)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other)
            .components()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
