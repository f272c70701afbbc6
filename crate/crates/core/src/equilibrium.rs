//! Force balance for radial pair laws, a damped Newton solver, the regular
//! polygon construction, and the discretized constrained-equilibrium
//! problem.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::config::{distance, ChargeConfiguration, ComponentPartition};
use crate::error::{Error, Result};
use crate::kernel::{InteractionLaw, KernelSpec};

/// Net force on every charge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResidual {
    /// `F_i = -sum_{j != i} q_i q_j Phi'(r_ij) (x_i - x_j) / r_ij`
    pub per_charge: Vec<Vec<f64>>,
    pub max_norm: f64,
}

/// Gradient of `E = sum_{i<j} q_i q_j Phi(r_ij)` with respect to every
/// position, stacked charge-major.
fn energy_gradient(positions: &[f64], q: &[f64], d: usize, law: &InteractionLaw) -> Vec<f64> {
    let n = q.len();
    let mut g = vec![0.0; n * d];
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = &positions[i * d..(i + 1) * d];
            let xj = &positions[j * d..(j + 1) * d];
            let r = distance(xi, xj);
            let s = q[i] * q[j] * law.dphi(r) / r;
            for k in 0..d {
                let f = s * (xi[k] - xj[k]);
                g[i * d + k] += f;
                g[j * d + k] -= f;
            }
        }
    }
    g
}

fn energy_hessian_analytic(
    positions: &[f64],
    q: &[f64],
    d: usize,
    law: &InteractionLaw,
) -> DMatrix<f64> {
    let n = q.len();
    let mut h = DMatrix::zeros(n * d, n * d);
    let mut u = vec![0.0; d];
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = &positions[i * d..(i + 1) * d];
            let xj = &positions[j * d..(j + 1) * d];
            let r = distance(xi, xj);
            for k in 0..d {
                u[k] = (xi[k] - xj[k]) / r;
            }
            let qq = q[i] * q[j];
            let d1 = law.dphi(r);
            let d2 = law.d2phi(r).expect("analytic path needs Phi''");
            for a in 0..d {
                for b in 0..d {
                    let iso = if a == b { d1 / r } else { 0.0 };
                    let blk = qq * ((d2 - d1 / r) * u[a] * u[b] + iso);
                    h[(i * d + a, i * d + b)] += blk;
                    h[(j * d + a, j * d + b)] += blk;
                    h[(i * d + a, j * d + b)] -= blk;
                    h[(j * d + a, i * d + b)] -= blk;
                }
            }
        }
    }
    h
}

fn energy_hessian_fd(
    positions: &[f64],
    q: &[f64],
    d: usize,
    law: &InteractionLaw,
    scale: f64,
) -> DMatrix<f64> {
    let m = positions.len();
    let h = 1e-6 * scale;
    let mut out = DMatrix::zeros(m, m);
    let mut x = positions.to_vec();
    for c in 0..m {
        x[c] = positions[c] + h;
        let gp = energy_gradient(&x, q, d, law);
        x[c] = positions[c] - h;
        let gm = energy_gradient(&x, q, d, law);
        x[c] = positions[c];
        for r in 0..m {
            out[(r, c)] = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    // Symmetrize away the differencing noise.
    (&out + out.transpose()) * 0.5
}

/// Hessian of the pair energy `sum_{i<j} q_i q_j Phi(r_ij)` in all `n*d`
/// coordinates. Uses `Phi''` when the law supplies it, central differences
/// of the analytic gradient otherwise.
pub fn energy_hessian(cfg: &ChargeConfiguration, law: &InteractionLaw) -> DMatrix<f64> {
    let (x, q) = flatten(cfg);
    let d = cfg.dimension();
    if law.has_second_derivative() {
        energy_hessian_analytic(&x, &q, d, law)
    } else {
        energy_hessian_fd(&x, &q, d, law, cfg.length_scale())
    }
}

fn flatten(cfg: &ChargeConfiguration) -> (Vec<f64>, Vec<f64>) {
    let x = cfg
        .charges()
        .iter()
        .flat_map(|c| c.position.coords().iter().copied())
        .collect();
    (x, cfg.charge_values())
}

fn rebuild(cfg: &ChargeConfiguration, x: &[f64]) -> Result<ChargeConfiguration> {
    let d = cfg.dimension();
    ChargeConfiguration::new(
        d,
        (0..cfg.len())
            .map(|i| (x[i * d..(i + 1) * d].to_vec(), cfg.q(i)))
            .collect(),
    )
}

/// Per-charge force balance for the given pair law.
///
/// For the planar log law this is the conjugate of `q_i sum_{j != i} q_j /
/// (z_i - z_j)`, so both conditions vanish together.
pub fn residual(cfg: &ChargeConfiguration, law: &InteractionLaw) -> EquilibriumResidual {
    let (x, q) = flatten(cfg);
    let d = cfg.dimension();
    let g = energy_gradient(&x, &q, d, law);
    let per_charge: Vec<Vec<f64>> = g.chunks(d).map(|c| c.iter().map(|v| -v).collect()).collect();
    let max_norm = per_charge
        .iter()
        .map(|f| f.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    EquilibriumResidual {
        per_charge,
        max_norm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveSettings {
    /// Absolute tolerance on the largest force norm among free charges.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative singular value cutoff for the pseudo-inverse step.
    pub rank_tol: f64,
    /// Give up when the diameter grows by more than this factor.
    pub max_expansion: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            max_halvings: 30,
            rank_tol: 1e-10,
            max_expansion: 1e3,
        }
    }
}

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

pub fn inertia(m: &DMatrix<f64>, rel_tol: f64) -> Inertia {
    if m.nrows() == 0 {
        return Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = rel_tol * scale;
    let mut out = Inertia {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for v in eig.iter() {
        if *v > cut {
            out.positive += 1;
        } else if *v < -cut {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Largest force norm among free charges.
    pub final_residual: f64,
    pub positions: ChargeConfiguration,
    /// Inertia of the energy Hessian over the free coordinates. Advisory:
    /// equilibria found here are generally saddles.
    pub hessian_inertia: Inertia,
    pub message: String,
}

fn free_residual_norm(g: &[f64], free: &[usize], d: usize) -> f64 {
    free.iter()
        .map(|&i| g[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn stacked_free(g: &[f64], free: &[usize], d: usize) -> DVector<f64> {
    DVector::from_iterator(
        free.len() * d,
        free.iter().flat_map(|&i| g[i * d..(i + 1) * d].iter().copied()),
    )
}

fn free_block(h: &DMatrix<f64>, free: &[usize], d: usize) -> DMatrix<f64> {
    let m = free.len() * d;
    DMatrix::from_fn(m, m, |r, c| {
        let (ir, ar) = (free[r / d], r % d);
        let (ic, ac) = (free[c / d], c % d);
        h[(ir * d + ar, ic * d + ac)]
    })
}

/// Damped Newton iteration on the free positions; never errors on
/// non-convergence, see [`newton_solve`] for that.
///
/// The step is the minimum-norm least-squares solution of `J dx = -g`
/// (truncated SVD), which removes the rigid-motion and dilation null
/// directions without pinning coordinates. The step is halved until the
/// residual decreases.
pub fn newton_iterate(
    initial: &ChargeConfiguration,
    law: &InteractionLaw,
    frozen: &[usize],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    let n = initial.len();
    let d = initial.dimension();
    if let Some(&bad) = frozen.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("frozen index {bad} out of range")));
    }
    let free: Vec<usize> = (0..n).filter(|i| !frozen.contains(i)).collect();
    if free.is_empty() {
        return Err(Error::InvalidInput("every charge is frozen".into()));
    }
    let (mut x, q) = flatten(initial);
    let scale = initial.length_scale();
    let diameter0 = initial.length_scale();
    let hessian_at = |x: &[f64]| {
        if law.has_second_derivative() {
            energy_hessian_analytic(x, &q, d, law)
        } else {
            energy_hessian_fd(x, &q, d, law, scale)
        }
    };

    let mut g = energy_gradient(&x, &q, d, law);
    let mut res = free_residual_norm(&g, &free, d);
    let mut iterations = 0;
    let mut message = String::from("converged");
    let mut converged = res <= settings.tol;

    while !converged && iterations < settings.max_iter {
        let jac = free_block(&hessian_at(&x), &free, d);
        let rhs = -stacked_free(&g, &free, d);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || !smax.is_finite() {
            return Err(Error::SingularJacobian);
        }
        let step = svd
            .solve(&rhs, settings.rank_tol * smax)
            .map_err(|_| Error::SingularJacobian)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let mut trial = x.clone();
            for (k, &i) in free.iter().enumerate() {
                for a in 0..d {
                    trial[i * d + a] += t * step[k * d + a];
                }
            }
            if let Ok(cfg) = rebuild(initial, &trial) {
                let gt = energy_gradient(&trial, &q, d, law);
                let rt = free_residual_norm(&gt, &free, d);
                if rt.is_finite() && rt < res {
                    accepted = Some((trial, gt, rt, cfg.diameter()));
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, gt, rt, diam)) => {
                x = trial;
                g = gt;
                res = rt;
                if diam > settings.max_expansion * diameter0 {
                    message = format!("configuration expanding without bound (diameter {diam:e})");
                    break;
                }
            }
            None => {
                message = "line search failed to reduce the residual".into();
                break;
            }
        }
        converged = res <= settings.tol;
    }
    if !converged && message == "converged" {
        message = format!("iteration limit {} reached", settings.max_iter);
    }

    let positions = rebuild(initial, &x)?;
    let hessian_inertia = inertia(&free_block(&hessian_at(&x), &free, d), 1e-8);
    Ok(SolveReport {
        converged,
        iterations,
        final_residual: res,
        positions,
        hessian_inertia,
        message,
    })
}

/// Like [`newton_iterate`] but turns a failed run into
/// [`Error::NoConvergence`].
pub fn newton_solve(
    initial: &ChargeConfiguration,
    law: &InteractionLaw,
    frozen: &[usize],
    settings: &SolveSettings,
) -> Result<SolveReport> {
    let report = newton_iterate(initial, law, frozen, settings)?;
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NoConvergence {
            iterations: report.iterations,
            residual: report.final_residual,
            reason: report.message,
        })
    }
}

/// `n - 1` charges `q` at the `(n-1)`-st roots of unity plus `-q (n-2) / 2`
/// at the origin. The result is a planar equilibrium for the log law.
pub fn construct_gon(n: usize, q: f64) -> Result<ChargeConfiguration> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("need n >= 3, got {n}")));
    }
    let m = n - 1;
    let mut entries: Vec<(Vec<f64>, f64)> = (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            (vec![t.cos(), t.sin()], q)
        })
        .collect();
    entries.push((vec![0.0, 0.0], -q * (n as f64 - 2.0) / 2.0));
    ChargeConfiguration::new(2, entries)
}

/// Weights and per-component potential levels of the discretized
/// constrained equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedWeights {
    /// One weight per support point, components concatenated in order.
    pub weights: Vec<f64>,
    /// Constant potential level of each multi-point component; for a
    /// singleton, the potential of all other weights at that point.
    pub component_potentials: Vec<f64>,
    pub feasible: bool,
    /// `||A w - b|| / ||b||` of the stacked system.
    pub relative_residual: f64,
}

/// Relative residual below which the discretized system counts as solved.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Solves the discretized constrained-equilibrium problem.
///
/// Multi-point components: the potential of all weights (self-interaction
/// of the point excluded) equals an unknown per-component constant at
/// every support point. Singleton components: the field of the other
/// weights vanishes at the point. Plus one charge-sum row per component.
/// The stacked system is solved in the least-squares sense.
pub fn constrained_weights(
    partition: &ComponentPartition,
    kernel: &KernelSpec,
) -> Result<ConstrainedWeights> {
    let d = partition.dimension();
    if kernel.dimension != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: kernel.dimension,
        });
    }
    let comps = partition.components();
    let points: Vec<&[f64]> = comps.iter().flatten().map(|p| p.coords()).collect();
    let owner: Vec<usize> = comps
        .iter()
        .enumerate()
        .flat_map(|(j, c)| std::iter::repeat_n(j, c.len()))
        .collect();
    let n = points.len();

    // Column index of each multi-point component's constant.
    let mut const_col = vec![None; comps.len()];
    let mut cols = n;
    for (j, c) in comps.iter().enumerate() {
        if c.len() > 1 {
            const_col[j] = Some(cols);
            cols += 1;
        }
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in 0..n {
        let j = owner[p];
        match const_col[j] {
            Some(cc) => {
                let mut row = vec![0.0; cols];
                for s in (0..n).filter(|&s| s != p) {
                    row[s] = kernel.value(distance(points[p], points[s]));
                }
                row[cc] = -1.0;
                rows.push((row, 0.0));
            }
            None => {
                for a in 0..d {
                    let mut row = vec![0.0; cols];
                    for s in (0..n).filter(|&s| s != p) {
                        let r = distance(points[p], points[s]);
                        let (_, d1, _) = kernel.radial(r);
                        row[s] = d1 * (points[p][a] - points[s][a]) / r;
                    }
                    rows.push((row, 0.0));
                }
            }
        }
    }
    let mut offset = 0;
    for (c, &qj) in comps.iter().zip(partition.target_charges()) {
        let mut row = vec![0.0; cols];
        for v in &mut row[offset..offset + c.len()] {
            *v = 1.0;
        }
        offset += c.len();
        rows.push((row, qj));
    }

    let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r].0[c]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-12 * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    if rank < cols {
        return Err(Error::DegenerateSystem {
            rank,
            unknowns: cols,
        });
    }
    let sol = svd
        .solve(&b, cutoff)
        .map_err(|_| Error::DegenerateSystem { rank, unknowns: cols })?;
    let bnorm = b.norm();
    let relative_residual = (&a * &sol - &b).norm() / if bnorm > 0.0 { bnorm } else { 1.0 };

    let weights: Vec<f64> = sol.iter().take(n).copied().collect();
    let mut component_potentials = Vec::with_capacity(comps.len());
    let mut first = 0;
    for (j, c) in comps.iter().enumerate() {
        match const_col[j] {
            Some(cc) => component_potentials.push(sol[cc]),
            None => {
                let p = first;
                let u = (0..n)
                    .filter(|&s| s != p)
                    .map(|s| weights[s] * kernel.value(distance(points[p], points[s])))
                    .sum();
                component_potentials.push(u);
            }
        }
        first += c.len();
    }
    Ok(ConstrainedWeights {
        weights,
        component_potentials,
        feasible: relative_residual < FEASIBILITY_TOL,
        relative_residual,
    })
}
