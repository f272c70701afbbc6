//! Potentials, gradients, Hessians, complex fields and energies.
//!
//! Everything is closed form. The gradient returned by [`field_at`] is the
//! gradient of the potential, `grad U`, not the force `-q grad U`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{coincidence_threshold, distance, ChargeConfiguration, SpacePoint};
use crate::error::{Error, Result};
use crate::kernel::{InteractionLaw, KernelSpec};

/// Tangency is allowed; overlap beyond this absolute slack is not.
pub const OVERLAP_TOL: f64 = 1e-12;

/// Potential, gradient and Hessian at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub point: SpacePoint,
    pub potential: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

fn check_point(cfg: &ChargeConfiguration, kernel: &KernelSpec, x: &[f64]) -> Result<()> {
    if kernel.dimension != cfg.dimension() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension(),
            found: kernel.dimension,
        });
    }
    if x.len() != cfg.dimension() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension(),
            found: x.len(),
        });
    }
    let tol = coincidence_threshold(cfg.diameter());
    for (index, c) in cfg.charges().iter().enumerate() {
        if distance(c.position.coords(), x) <= tol {
            return Err(Error::EvaluationOnCharge { index });
        }
    }
    Ok(())
}

/// `sum_j q_j K(|x - x_j|)`.
pub fn potential_at(cfg: &ChargeConfiguration, kernel: &KernelSpec, x: &[f64]) -> Result<f64> {
    check_point(cfg, kernel, x)?;
    Ok(cfg
        .charges()
        .iter()
        .map(|c| c.q * kernel.value(distance(c.position.coords(), x)))
        .sum())
}

/// Analytic gradient of [`potential_at`].
pub fn field_at(cfg: &ChargeConfiguration, kernel: &KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_point(cfg, kernel, x)?;
    let d = cfg.dimension();
    let mut g = vec![0.0; d];
    let mut diff = vec![0.0; d];
    for c in cfg.charges() {
        for (k, dk) in diff.iter_mut().enumerate() {
            *dk = x[k] - c.position.coords()[k];
        }
        let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (_, d1, _) = kernel.radial(r);
        let s = c.q * d1 / r;
        for (gk, dk) in g.iter_mut().zip(&diff) {
            *gk += s * dk;
        }
    }
    Ok(g)
}

/// Analytic Hessian of [`potential_at`]; symmetric and traceless off the
/// support.
pub fn hessian_at(
    cfg: &ChargeConfiguration,
    kernel: &KernelSpec,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    check_point(cfg, kernel, x)?;
    Ok(hessian_unchecked(cfg, kernel, x))
}

fn hessian_unchecked(cfg: &ChargeConfiguration, kernel: &KernelSpec, x: &[f64]) -> DMatrix<f64> {
    let d = cfg.dimension();
    let mut h = DMatrix::zeros(d, d);
    let mut u = vec![0.0; d];
    for c in cfg.charges() {
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = x[k] - c.position.coords()[k];
        }
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        for uk in u.iter_mut() {
            *uk /= r;
        }
        let (_, d1, d2) = kernel.radial(r);
        let iso = c.q * d1 / r;
        let radial = c.q * (d2 - d1 / r);
        for a in 0..d {
            h[(a, a)] += iso;
            for b in 0..d {
                h[(a, b)] += radial * u[a] * u[b];
            }
        }
    }
    h
}

/// Potential, gradient and Hessian in one call.
pub fn sample_at(
    cfg: &ChargeConfiguration,
    kernel: &KernelSpec,
    x: &[f64],
) -> Result<FieldSample> {
    let potential = potential_at(cfg, kernel, x)?;
    let gradient = field_at(cfg, kernel, x)?;
    let h = hessian_unchecked(cfg, kernel, x);
    let d = cfg.dimension();
    let hessian = (0..d).map(|a| (0..d).map(|b| h[(a, b)]).collect()).collect();
    Ok(FieldSample {
        point: SpacePoint::new(x.to_vec())?,
        potential,
        gradient,
        hessian,
    })
}

/// Evaluates many points; output order matches input order.
pub fn sample_batch(
    cfg: &ChargeConfiguration,
    kernel: &KernelSpec,
    points: &[Vec<f64>],
) -> Vec<Result<FieldSample>> {
    points
        .par_iter()
        .map(|x| sample_at(cfg, kernel, x))
        .collect()
}

/// Ordered-pair energy `sum_{i != j} q_i q_j Phi(|x_i - x_j|)`.
///
/// Every unordered pair is counted twice, so this is twice the usual
/// `sum_{i<j}` interaction energy.
pub fn pairwise_energy(cfg: &ChargeConfiguration, law: &InteractionLaw) -> f64 {
    let n = cfg.len();
    let mut w = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = distance(cfg.position(i), cfg.position(j));
            w += cfg.q(i) * cfg.q(j) * law.phi(r);
        }
    }
    2.0 * w
}

fn complex_positions(cfg: &ChargeConfiguration) -> Result<Vec<Complex64>> {
    if cfg.dimension() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cfg.dimension(),
        });
    }
    Ok(cfg
        .charges()
        .iter()
        .map(|c| Complex64::new(c.position.coords()[0], c.position.coords()[1]))
        .collect())
}

/// Planar complex field `sum_j q_j / (z - z_j)`.
pub fn complex_field(cfg: &ChargeConfiguration, z: Complex64) -> Result<Complex64> {
    let zs = complex_positions(cfg)?;
    let tol = coincidence_threshold(cfg.diameter());
    let mut acc = Complex64::new(0.0, 0.0);
    for (index, (zj, c)) in zs.iter().zip(cfg.charges()).enumerate() {
        let dz = z - zj;
        if dz.norm() <= tol {
            return Err(Error::EvaluationOnCharge { index });
        }
        acc += c.q / dz;
    }
    Ok(acc)
}

/// Complex field at charge `i` from all other charges,
/// `sum_{j != i} q_j / (z_i - z_j)`.
pub fn complex_field_at_charge(cfg: &ChargeConfiguration, i: usize) -> Result<Complex64> {
    let zs = complex_positions(cfg)?;
    Ok(zs
        .iter()
        .zip(cfg.charges())
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (zj, c))| c.q / (zs[i] - zj))
        .sum())
}

/// Energy of the configuration with each charge smeared uniformly over a
/// sphere, with the normalization constant dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmearedEnergy {
    /// `sum_j q_j^2 / rho_j^(d-2)`
    pub self_energy: f64,
    /// `2 sum_{j<k} q_j q_k / |x_j - x_k|^(d-2)`
    pub interaction_energy: f64,
    pub total: f64,
}

/// Splits the energy of sphere-smeared charges into self and mutual parts.
///
/// Requires d >= 3: in the plane the energy of a distribution is not
/// necessarily positive and the decomposition proves nothing.
pub fn smeared_energy_decomposition(
    cfg: &ChargeConfiguration,
    radii: &[f64],
) -> Result<SmearedEnergy> {
    let d = cfg.dimension();
    if d < 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if radii.len() != cfg.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} radii, got {}",
            cfg.len(),
            radii.len()
        )));
    }
    if let Some(bad) = radii.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput(format!("radius {bad} is not positive")));
    }
    let p = d as i32 - 2;
    let n = cfg.len();
    let mut interaction = 0.0;
    for j in 0..n {
        for k in (j + 1)..n {
            let r = distance(cfg.position(j), cfg.position(k));
            if radii[j] + radii[k] > r + OVERLAP_TOL {
                return Err(Error::OverlappingSpheres {
                    first: j,
                    second: k,
                });
            }
            interaction += cfg.q(j) * cfg.q(k) / r.powi(p);
        }
    }
    let self_energy: f64 = cfg
        .charges()
        .iter()
        .zip(radii)
        .map(|(c, rho)| c.q * c.q / rho.powi(p))
        .sum();
    let interaction_energy = 2.0 * interaction;
    Ok(SmearedEnergy {
        self_energy,
        interaction_energy,
        total: self_energy + interaction_energy,
    })
}
