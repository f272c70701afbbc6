//! Moment identities satisfied by planar equilibria.
//!
//! For charges `q_i` at `z_i` in equilibrium under the log law, the square
//! of the complex field `G(z) = (sum q_i / (z - z_i))^2` has two Laurent
//! expansions at infinity. Equating them gives, for every k >= 0,
//!
//! ```text
//! (k+1) sum_i q_i^2 z_i^k = sum_{l=0..k} p_l p_{k-l},   p_l = sum_i q_i z_i^l
//! ```
//!
//! and at k = 0, `sum q_i^2 = (sum q_i)^2`. This module evaluates both sides
//! for discrete and quadrature-discretized continuous charges, plus the
//! general pair-law identity and the planar dilation identity.

pub mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use quadrature::{gauss_legendre, DensityGrid};

use crate::config::{distance, ChargeConfiguration};
use crate::error::{Error, Result};
use crate::fields::pairwise_energy;
use crate::kernel::InteractionLaw;

pub const DEFAULT_K_MAX: usize = 10;
/// Power sums of |z| > 1 lose all precision beyond this order.
pub const K_MAX_CAP: usize = 30;
/// Trapezoid nodes on the contour used to extract Laurent coefficients.
pub const CONTOUR_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub k_max: usize,
    pub lhs: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
    /// `|lhs_k - rhs_k|`
    pub residuals: Vec<f64>,
}

impl MomentReport {
    fn from_sides(k_max: usize, lhs: Vec<Complex64>, rhs: Vec<Complex64>) -> Self {
        let residuals = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).collect();
        Self {
            k_max,
            lhs,
            rhs,
            residuals,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn check_k(k_max: usize) -> Result<()> {
    if k_max > K_MAX_CAP {
        return Err(Error::InvalidInput(format!(
            "k_max {k_max} exceeds the cap {K_MAX_CAP}"
        )));
    }
    Ok(())
}

fn planar(cfg: &ChargeConfiguration) -> Result<Vec<(Complex64, f64)>> {
    if cfg.dimension() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cfg.dimension(),
        });
    }
    Ok(cfg
        .charges()
        .iter()
        .map(|c| {
            let p = c.position.coords();
            (Complex64::new(p[0], p[1]), c.q)
        })
        .collect())
}

/// `sum_i w_i z_i^l` for l = 0..=k_max, powers built up in ascending order.
fn power_sums(points: impl Iterator<Item = (Complex64, f64)>, k_max: usize) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); k_max + 1];
    for (z, w) in points {
        let mut zl = Complex64::new(w, 0.0);
        for s in sums.iter_mut() {
            *s += zl;
            zl *= z;
        }
    }
    sums
}

/// Cauchy product `sum_{l=0..k} p_l p_{k-l}` for every k.
fn self_convolution(p: &[Complex64]) -> Vec<Complex64> {
    (0..p.len())
        .map(|k| (0..=k).map(|l| p[l] * p[k - l]).sum())
        .collect()
}

/// `|sum q_i^2 - (sum q_i)^2|`.
pub fn abanov_residual(charges: &[f64]) -> f64 {
    let s: f64 = charges.iter().sum();
    let s2: f64 = charges.iter().map(|q| q * q).sum();
    (s2 - s * s).abs()
}

/// Both sides of the k-th moment identity for k = 0..=k_max.
pub fn eq_relations_report(cfg: &ChargeConfiguration, k_max: usize) -> Result<MomentReport> {
    check_k(k_max)?;
    let pts = planar(cfg)?;
    let sq = power_sums(pts.iter().map(|(z, q)| (*z, q * q)), k_max);
    let p = power_sums(pts.iter().copied(), k_max);
    let lhs = sq
        .iter()
        .enumerate()
        .map(|(k, s)| s * (k as f64 + 1.0))
        .collect();
    Ok(MomentReport::from_sides(k_max, lhs, self_convolution(&p)))
}

/// Laurent coefficients of `G(z)` three ways.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSquaredReport {
    /// `lhs`: equilibrium-reduced form `(k+1) sum q_i^2 z_i^k`;
    /// `rhs`: unconditional product form `sum_l p_l p_{k-l}`.
    pub report: MomentReport,
    /// Coefficients of `z^-(k+2)` extracted numerically on `|z| = radius`.
    pub contour: Vec<Complex64>,
    pub radius: f64,
    /// `|reduced_k - contour_k| / scale_k`
    pub reduced_deviation: Vec<f64>,
    /// `|product_k - contour_k| / scale_k`
    pub product_deviation: Vec<f64>,
    /// `scale_k = max(|contour_k|, (sum |q_i|)^2 max|z_i|^k)`
    pub scale: Vec<f64>,
}

/// Compares both expansions of the squared complex field with coefficients
/// extracted by the trapezoid rule on a circle.
///
/// The product form matches the contour coefficients for every
/// configuration; the reduced form only for equilibria.
///
/// The contour radius is twice the largest `|z_i|`. Larger radii amplify
/// rounding by `(radius / max|z_i|)^k` in the extracted coefficients.
pub fn g_squared_coefficient_check(cfg: &ChargeConfiguration, k_max: usize) -> Result<GSquaredReport> {
    let report = eq_relations_report(cfg, k_max)?;
    let pts = planar(cfg)?;
    let rmax = pts.iter().map(|(z, _)| z.norm()).fold(0.0, f64::max);
    let radius = if rmax > 0.0 { 2.0 * rmax } else { 1.0 };

    let n = CONTOUR_NODES;
    let mut contour = vec![Complex64::new(0.0, 0.0); k_max + 1];
    for m in 0..n {
        let z = Complex64::from_polar(radius, 2.0 * PI * m as f64 / n as f64);
        let e: Complex64 = pts.iter().map(|(zi, q)| *q / (z - zi)).sum();
        let g = e * e;
        let mut zp = g * z * z;
        for c in contour.iter_mut() {
            *c += zp;
            zp *= z;
        }
    }
    for c in contour.iter_mut() {
        *c /= n as f64;
    }

    let qabs: f64 = pts.iter().map(|(_, q)| q.abs()).sum();
    let base = if rmax > 0.0 { rmax } else { 1.0 };
    let scale: Vec<f64> = contour
        .iter()
        .enumerate()
        .map(|(k, c)| c.norm().max(qabs * qabs * base.powi(k as i32)))
        .collect();
    let dev = |side: &[Complex64]| -> Vec<f64> {
        side.iter()
            .zip(&contour)
            .zip(&scale)
            .map(|((a, c), s)| (a - c).norm() / s)
            .collect()
    };
    Ok(GSquaredReport {
        reduced_deviation: dev(&report.lhs),
        product_deviation: dev(&report.rhs),
        report,
        contour,
        radius,
        scale,
    })
}

/// `sum_{i != j} q_i q_j [r Phi'(r)]_{r = |x_i - x_j|}`; zero at every
/// equilibrium of the law.
///
/// For `Phi = r^-k` this equals `-k` times the ordered-pair energy; for
/// `Phi = -ln r` it is `-((sum q)^2 - sum q^2)`.
pub fn general_phi_identity(cfg: &ChargeConfiguration, law: &InteractionLaw) -> f64 {
    let n = cfg.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = distance(cfg.position(i), cfg.position(j));
            s += cfg.q(i) * cfg.q(j) * r * law.dphi(r);
        }
    }
    2.0 * s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub lambdas: Vec<f64>,
    /// `W[lambda z] - W[z]` for each lambda.
    pub delta_w: Vec<f64>,
    /// Least-squares slope of `delta_w` against `ln lambda`.
    pub slope: f64,
    pub intercept: f64,
    /// `-((sum q)^2 - sum q^2) / (2 pi)` under this crate's convention.
    pub predicted: f64,
    /// `| |slope| - |predicted| |`
    pub deviation: f64,
    /// Largest deviation of `delta_w` from the fitted line.
    pub fit_residual: f64,
}

/// Dilation behaviour of the planar energy.
///
/// Uses the normalized log kernel `(1/2pi) ln(1/r)` and ordered-pair
/// counting, which gives `W[lambda z] - W[z] = -((sum q)^2 - sum q^2) ln
/// lambda / (2 pi)`. The sign flips with other conventions; the magnitude
/// and exact linearity in `ln lambda` do not.
pub fn scaling_identity_check(cfg: &ChargeConfiguration, lambdas: &[f64]) -> Result<ScalingReport> {
    planar(cfg)?;
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput(format!("scale factor {bad} is not positive")));
    }
    let mut distinct = lambdas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput("need at least three distinct scale factors".into()));
    }

    let law = InteractionLaw::log();
    let energy = |c: &ChargeConfiguration| pairwise_energy(c, &law) / (2.0 * PI);
    let w0 = energy(cfg);
    let mut delta_w = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let scaled = cfg.map_positions(|p| p.iter().map(|v| v * l).collect())?;
        delta_w.push(energy(&scaled) - w0);
    }

    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = delta_w.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&delta_w).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fit_residual = xs
        .iter()
        .zip(&delta_w)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);

    let q = cfg.charge_values();
    let s: f64 = q.iter().sum();
    let s2: f64 = q.iter().map(|v| v * v).sum();
    let predicted = -(s * s - s2) / (2.0 * PI);
    Ok(ScalingReport {
        lambdas: lambdas.to_vec(),
        delta_w,
        slope,
        intercept,
        predicted,
        deviation: (slope.abs() - predicted.abs()).abs(),
        fit_residual,
    })
}

/// Continuous analogue of [`eq_relations_report`]:
/// `lhs_k = (k+1) int rho^2 zeta^k dA`, `rhs_k = sum_l m_l m_{k-l}` with
/// `m_l = int rho zeta^l dA`, both by the grid's quadrature.
pub fn continuous_moment_report(grid: &DensityGrid, k_max: usize) -> Result<MomentReport> {
    check_k(k_max)?;
    let pts = || {
        grid.nodes()
            .iter()
            .zip(grid.weights())
            .zip(grid.values())
            .map(|((p, w), v)| (Complex64::new(p[0], p[1]), *w, *v))
    };
    let sq = power_sums(pts().map(|(z, w, v)| (z, w * v * v)), k_max);
    let m = power_sums(pts().map(|(z, w, v)| (z, w * v)), k_max);
    let lhs = sq
        .iter()
        .enumerate()
        .map(|(k, s)| s * (k as f64 + 1.0))
        .collect();
    Ok(MomentReport::from_sides(k_max, lhs, self_convolution(&m)))
}

/// Pieces of the quadrature-discretized `G~(z)` at an exterior point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GTildeReport {
    /// Full double sum `(sum_a c_a / (z - zeta_a))^2`, `c_a = w_a rho_a`.
    pub double_integral: Complex64,
    /// Diagonal part `sum_a c_a^2 / (z - zeta_a)^2`.
    pub beurling_term: Complex64,
    /// Off-diagonal part, `double_integral - beurling_term`.
    pub cross_term: Complex64,
    /// The off-diagonal part rebuilt from the node fields,
    /// `2 sum_a c_a E_a / (z - zeta_a)`, `E_a = sum_{b != a} c_b / (zeta_a - zeta_b)`.
    pub cross_via_field: Complex64,
    /// `max_a |E_a|`: the discrete equilibrium defect. `cross_term`
    /// vanishes when this does.
    pub max_node_field: f64,
}

/// Splits `G~(z)` into its diagonal (Beurling) and off-diagonal parts at a
/// point well outside the grid.
pub fn gtilde_decomposition_check(grid: &DensityGrid, z: Complex64) -> Result<GTildeReport> {
    let (center, radius) = grid.enclosing_circle();
    let dist = (z - Complex64::new(center[0], center[1])).norm();
    let required = 5.0 * 2.0 * radius;
    if dist < required {
        return Err(Error::PointTooClose {
            distance: dist,
            required,
        });
    }
    let zeta: Vec<Complex64> = grid.nodes().iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let c: Vec<f64> = grid
        .weights()
        .iter()
        .zip(grid.values())
        .map(|(w, v)| w * v)
        .collect();

    let cauchy: Complex64 = zeta.iter().zip(&c).map(|(s, ca)| *ca / (z - s)).sum();
    let double_integral = cauchy * cauchy;
    let beurling_term: Complex64 = zeta
        .iter()
        .zip(&c)
        .map(|(s, ca)| ca * ca / ((z - s) * (z - s)))
        .sum();
    let cross_term = double_integral - beurling_term;

    let node_fields: Vec<Complex64> = (0..zeta.len())
        .into_par_iter()
        .map(|a| {
            zeta.iter()
                .zip(&c)
                .enumerate()
                .filter(|(b, (s, _))| *b != a && **s != zeta[a])
                .map(|(_, (s, cb))| *cb / (zeta[a] - s))
                .sum()
        })
        .collect();
    let cross_via_field = 2.0
        * node_fields
            .iter()
            .zip(&zeta)
            .zip(&c)
            .map(|((e, s), ca)| ca * e / (z - s))
            .sum::<Complex64>();
    let max_node_field = node_fields.iter().map(|e| e.norm()).fold(0.0, f64::max);

    Ok(GTildeReport {
        double_integral,
        beurling_term,
        cross_term,
        cross_via_field,
        max_node_field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::build_configuration;
    use crate::equilibrium::construct_gon;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn abanov_examples() {
        assert_eq!(abanov_residual(&[1.0, 1.0, -0.5]), 0.0);
        assert_eq!(abanov_residual(&[1.0, -1.0]), 2.0);
        assert_eq!(abanov_residual(&[3.7]), 0.0);
    }

    #[test]
    fn relations_on_gon() {
        let r = eq_relations_report(&construct_gon(3, 1.0).unwrap(), 10).unwrap();
        assert!(r.max_residual() < 1e-12, "{:?}", r.residuals);
        assert_eq!(r.lhs.len(), 11);
        // k = 1 by hand: lhs = 2 (1 - 1 + 0) = 0, rhs = 2 (sum q z)(sum q) = 0.
        assert!(r.lhs[1].norm() < 1e-15 && r.rhs[1].norm() < 1e-15);
    }

    #[test]
    fn k_zero_is_abanov() {
        let cfg = build_configuration(
            2,
            vec![
                (vec![0.3, 0.1], 1.5),
                (vec![-0.7, 0.4], -0.2),
                (vec![0.2, -0.9], 0.8),
                (vec![1.1, 0.6], 2.0),
                (vec![-0.4, -0.5], -1.1),
            ],
        )
        .unwrap();
        let r = eq_relations_report(&cfg, 3).unwrap();
        assert!((r.residuals[0] - abanov_residual(&cfg.charge_values())).abs() < 1e-14);
    }

    #[test]
    fn caps_and_dimension() {
        let g = construct_gon(4, 1.0).unwrap();
        assert!(eq_relations_report(&g, K_MAX_CAP + 1).is_err());
        let cfg3 = build_configuration(3, vec![(vec![0.0; 3], 1.0)]).unwrap();
        assert!(matches!(
            eq_relations_report(&cfg3, 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_charge_forms_agree() {
        let cfg = build_configuration(2, vec![(vec![0.4, -0.3], 2.5)]).unwrap();
        let g = g_squared_coefficient_check(&cfg, 8).unwrap();
        for k in 0..=8 {
            assert!((g.report.lhs[k] - g.report.rhs[k]).norm() < 1e-14 * g.scale[k]);
            assert!(g.reduced_deviation[k] < 1e-12 && g.product_deviation[k] < 1e-12);
        }
    }

    #[test]
    fn general_phi_examples() {
        let collinear = build_configuration(
            3,
            vec![
                (vec![0.0, 0.0, 0.0], 1.0),
                (vec![0.5, 0.0, 0.0], -0.25),
                (vec![1.0, 0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(general_phi_identity(&collinear, &InteractionLaw::riesz(1.0).unwrap()), 0.0);

        let pair = build_configuration(3, vec![(vec![0.0; 3], 1.0), (vec![2.0, 0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(general_phi_identity(&pair, &InteractionLaw::riesz(1.0).unwrap()), -1.0);

        // Three charges, Phi = 1/r: value equals -1 times the ordered-pair energy.
        let three = build_configuration(
            3,
            vec![
                (vec![0.0, 0.0, 0.0], 1.0),
                (vec![1.0, 0.0, 0.0], -2.0),
                (vec![0.0, 2.0, 0.0], 0.5),
            ],
        )
        .unwrap();
        let by_hand = 2.0 * (-(1.0 * -2.0) / 1.0 - (1.0 * 0.5) / 2.0 - (-2.0 * 0.5) / 5f64.sqrt());
        let law = InteractionLaw::riesz(1.0).unwrap();
        assert!((general_phi_identity(&three, &law) - by_hand).abs() < 1e-14);
        assert!((general_phi_identity(&three, &law) + pairwise_energy(&three, &law)).abs() < 1e-14);

        let log = InteractionLaw::log();
        let q = three.charge_values();
        let s: f64 = q.iter().sum();
        let s2: f64 = q.iter().map(|v| v * v).sum();
        assert!((general_phi_identity(&three, &log) + (s * s - s2)).abs() < 1e-14);
    }

    #[test]
    fn scaling_examples() {
        let e = std::f64::consts::E;
        let pair = build_configuration(2, vec![(vec![0.0, 0.0], 1.0), (vec![1.0, 0.0], 1.0)]).unwrap();
        let r = scaling_identity_check(&pair, &[1.0 / e, 1.0, e]).unwrap();
        assert!((r.delta_w[2] + 1.0 / PI).abs() < 1e-15);
        assert!((r.slope.abs() - 1.0 / PI).abs() < 1e-14);
        assert!(r.fit_residual < 1e-14);

        let gon = construct_gon(3, 1.0).unwrap();
        let r = scaling_identity_check(&gon, &[0.5, 2.0, 3.0]).unwrap();
        assert!(r.delta_w.iter().all(|v| v.abs() < 1e-14));

        let one = build_configuration(2, vec![(vec![0.5, 0.5], 1.0)]).unwrap();
        let r = scaling_identity_check(&one, &[0.5, 2.0, 3.0]).unwrap();
        assert_eq!(r.delta_w, vec![0.0; 3]);

        assert!(scaling_identity_check(&pair, &[1.0, 1.0, 2.0]).is_err());
        assert!(scaling_identity_check(&pair, &[-1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_disk_moments() {
        let cst = 1.0 / PI;
        let grid = DensityGrid::disk([0.0, 0.0], 1.0, 128, 128, |_, _| cst).unwrap();
        let r = continuous_moment_report(&grid, 6).unwrap();
        assert!((r.lhs[0].re - cst * cst * PI).abs() < 1e-13);
        assert!((r.rhs[0].re - (cst * PI).powi(2)).abs() < 1e-13);
        // The uniform disk is not an equilibrium: k = 0 already fails.
        assert!((r.residuals[0] - (1.0 - 1.0 / PI)).abs() < 1e-12);
        // higher moments of a rotation-invariant density vanish
        assert!(r.lhs[3].norm() < 1e-13 && r.rhs[3].norm() < 1e-13);
    }

    #[test]
    fn rescaled_disk_moments() {
        // lambda^2 rho(lambda z): mass is invariant, the self term scales by lambda^2.
        let cst = 0.7;
        let base = continuous_moment_report(&DensityGrid::disk([0.0, 0.0], 1.0, 64, 64, |_, _| cst).unwrap(), 2).unwrap();
        for lambda in [0.5, 2.0, 3.0] {
            let grid = DensityGrid::disk([0.0, 0.0], 1.0 / lambda, 64, 64, |_, _| lambda * lambda * cst).unwrap();
            let r = continuous_moment_report(&grid, 2).unwrap();
            assert!((r.rhs[0] - base.rhs[0]).norm() < 1e-12);
            assert!((r.lhs[0] - lambda * lambda * base.lhs[0]).norm() < 1e-12 * lambda * lambda);
        }
    }

    #[test]
    fn zero_density() {
        let grid = DensityGrid::disk([0.0, 0.0], 1.0, 8, 8, |_, _| 0.0).unwrap();
        let r = continuous_moment_report(&grid, 5).unwrap();
        assert!(r.residuals.iter().all(|v| *v == 0.0));
        let g = gtilde_decomposition_check(&grid, c(10.0, 0.0)).unwrap();
        assert_eq!(g.double_integral, c(0.0, 0.0));
        assert_eq!(g.beurling_term, c(0.0, 0.0));
        assert_eq!(g.cross_term, c(0.0, 0.0));
    }

    #[test]
    fn single_node_has_no_cross_term() {
        let grid = DensityGrid::new(vec![[0.1, 0.2]], vec![0.5], vec![3.0]).unwrap();
        let z = c(4.0, 1.0);
        let g = gtilde_decomposition_check(&grid, z).unwrap();
        assert!(g.cross_term.norm() < 1e-16);
        let expected = 1.5 * 1.5 / ((z - c(0.1, 0.2)) * (z - c(0.1, 0.2)));
        assert!((g.beurling_term - expected).norm() < 1e-16);
    }

    #[test]
    fn gtilde_far_field_and_guard() {
        let grid = DensityGrid::disk([0.0, 0.0], 1.0, 32, 64, |_, _| 1.0 / PI).unwrap();
        let g = gtilde_decomposition_check(&grid, c(10.0, 0.0)).unwrap();
        assert!((g.double_integral - c(0.01, 0.0)).norm() < 1e-4 * 0.01);
        assert!((g.cross_term - g.cross_via_field).norm() < 1e-10 * g.double_integral.norm());
        assert!(matches!(
            gtilde_decomposition_check(&grid, c(3.0, 0.0)),
            Err(Error::PointTooClose { .. })
        ));
    }
}
