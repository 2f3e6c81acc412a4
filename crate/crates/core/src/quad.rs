//! Gauss–Legendre rules and the product rule on spheres.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes via Newton iteration on the three-term recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Gauss-Legendre rule needs n >= 1".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let terms: Vec<f64> = self.on_interval(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Product rule on the unit sphere: Gauss–Legendre in `cos θ`, uniform in `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    /// Unit normals.
    pub directions: Vec<Vector3<f64>>,
    /// Solid-angle weights, summing to `4π`.
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_phi == 0 {
            return Err(Error::InvalidParameter("sphere rule needs n_phi >= 1".into()));
        }
        let gl = GaussLegendre::new(n_theta)?;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (c, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_phi {
                // Half-step offset keeps nodes off the φ = 0 meridian.
                let phi = (j as f64 + 0.5) * dphi;
                directions.push(Vector3::new(s * phi.cos(), s * phi.sin(), *c));
                weights.push(w * dphi);
            }
        }
        Ok(Self { directions, weights })
    }

    /// `∮ f dA` over the sphere of radius `radius` centred at `center`.
    ///
    /// `f` receives the point and the outward unit normal.
    pub fn integrate<F>(&self, exec: Exec, center: &Vector3<f64>, radius: f64, f: F) -> f64
    where
        F: Fn(&Vector3<f64>, &Vector3<f64>) -> f64 + Sync + Send,
    {
        let r2 = radius * radius;
        let terms = exec.map_range(self.directions.len(), |i| {
            let n = &self.directions[i];
            self.weights[i] * r2 * f(&(center + radius * n), n)
        });
        pairwise_sum(&terms)
    }

    /// Fallible variant of [`SphereRule::integrate`]; the first error in node order wins.
    pub fn try_integrate<F>(&self, exec: Exec, center: &Vector3<f64>, radius: f64, f: F) -> Result<f64>
    where
        F: Fn(&Vector3<f64>, &Vector3<f64>) -> Result<f64> + Sync + Send,
    {
        let r2 = radius * radius;
        let terms = exec.map_range(self.directions.len(), |i| {
            let n = &self.directions[i];
            f(&(center + radius * n), n).map(|v| self.weights[i] * r2 * v)
        });
        let values = terms.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(pairwise_sum(&values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for n in 1..40 {
            let gl = GaussLegendre::new(n).unwrap();
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((gl.nodes[i] + gl.nodes[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let gl = GaussLegendre::new(6).unwrap();
        for deg in 0..12 {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let approx = gl.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((approx - exact).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn known_three_point_rule() {
        let gl = GaussLegendre::new(3).unwrap();
        assert!((gl.nodes[0] - (0.6_f64).sqrt()).abs() < 1e-15);
        assert!((gl.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_rule_area_and_moments() {
        let rule = SphereRule::new(8, 16).unwrap();
        let c = Vector3::new(1.0, -2.0, 0.5);
        let area = rule.integrate(Exec::Sequential, &c, 2.0, |_, _| 1.0);
        assert!((area - 16.0 * PI).abs() < 1e-12);
        // ∮ z² dΩ = 4π/3 on the unit sphere.
        let m = rule.integrate(Exec::Sequential, &Vector3::zeros(), 1.0, |_, n| n.z * n.z);
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_empty_rules() {
        assert!(GaussLegendre::new(0).is_err());
        assert!(SphereRule::new(4, 0).is_err());
    }
}
