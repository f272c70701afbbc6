//! Gauss-Legendre rules and planar density grids.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature nodes in the plane with density samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(nodes: Vec<[f64; 2]>, weights: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.len() != values.len() {
            return Err(Error::InvalidInput(
                "nodes, weights and values must have equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("quadrature weights must be positive".into()));
        }
        if nodes.iter().flatten().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite grid entry".into()));
        }
        Ok(Self {
            nodes,
            weights,
            values,
        })
    }

    /// Disk of the given center and radius: Gauss-Legendre in the radius
    /// (`n_radial` nodes), uniform trapezoid in the angle (`n_angular`).
    pub fn disk<F>(center: [f64; 2], radius: f64, n_radial: usize, n_angular: usize, rho: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let (xs, ws) = gauss_legendre(n_radial);
        let mut nodes = Vec::with_capacity(n_radial * n_angular);
        let mut weights = Vec::with_capacity(n_radial * n_angular);
        let mut values = Vec::with_capacity(n_radial * n_angular);
        let dt = 2.0 * PI / n_angular as f64;
        for (x, w) in xs.iter().zip(&ws) {
            let r = 0.5 * radius * (x + 1.0);
            let wr = 0.5 * radius * w * r * dt;
            for k in 0..n_angular {
                let t = (k as f64 + 0.5) * dt;
                let p = [center[0] + r * t.cos(), center[1] + r * t.sin()];
                nodes.push(p);
                weights.push(wr);
                values.push(rho(p[0], p[1]));
            }
        }
        Self::new(nodes, weights, values)
    }

    /// Tensor Gauss-Legendre grid on a box, masked by `inside`.
    pub fn masked_box<M, F>(
        lo: [f64; 2],
        hi: [f64; 2],
        n: usize,
        inside: M,
        rho: F,
    ) -> Result<Self>
    where
        M: Fn(f64, f64) -> bool,
        F: Fn(f64, f64) -> f64,
    {
        let (xs, ws) = gauss_legendre(n);
        let hx = 0.5 * (hi[0] - lo[0]);
        let hy = 0.5 * (hi[1] - lo[1]);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut values = Vec::new();
        for (xa, wa) in xs.iter().zip(&ws) {
            for (xb, wb) in xs.iter().zip(&ws) {
                let p = [lo[0] + hx * (xa + 1.0), lo[1] + hy * (xb + 1.0)];
                if inside(p[0], p[1]) {
                    nodes.push(p);
                    weights.push(hx * hy * wa * wb);
                    values.push(rho(p[0], p[1]));
                }
            }
        }
        Self::new(nodes, weights, values)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node centroid and the largest node distance from it. Twice the
    /// radius bounds the grid diameter.
    pub fn enclosing_circle(&self) -> ([f64; 2], f64) {
        if self.nodes.is_empty() {
            return ([0.0, 0.0], 0.0);
        }
        let n = self.nodes.len() as f64;
        let c = self
            .nodes
            .iter()
            .fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
        let r = self
            .nodes
            .iter()
            .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        (c, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for p in 0..(2 * n) {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - exact).abs() < 1e-12, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn disk_area_and_second_moment() {
        let g = DensityGrid::disk([0.0, 0.0], 1.0, 32, 64, |_, _| 1.0).unwrap();
        let area: f64 = g.weights().iter().sum();
        assert!((area - PI).abs() < 1e-13);
        let r2: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .map(|(p, w)| w * (p[0] * p[0] + p[1] * p[1]))
            .sum();
        assert!((r2 - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn masked_box_converges_to_disk_area() {
        let g = DensityGrid::masked_box([-1.0, -1.0], [1.0, 1.0], 200, |x, y| x * x + y * y <= 1.0, |_, _| 1.0).unwrap();
        let area: f64 = g.weights().iter().sum();
        assert!((area - PI).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DensityGrid::new(vec![[0.0, 0.0]], vec![0.0], vec![1.0]).is_err());
        assert!(DensityGrid::new(vec![[0.0, 0.0]], vec![1.0], vec![]).is_err());
    }
}
