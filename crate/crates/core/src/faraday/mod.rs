//! Nonnegative moment matching for signed measures on the unit ball.
//!
//! A signed measure `mu` supported in the closed unit ball with exterior
//! potential `1/|x|` has solid-harmonic moments `(1, 0, 0, ...)`. The solver
//! searches for nonnegative masses on the nodes of `mu` with the same
//! moments up to a finite degree. A feasible certificate supports the
//! positive-equivalent hypothesis at that resolution; an infeasible one is a
//! counterexample candidate at that resolution and nothing more. Only
//! finitely supported discretizations are handled.

pub mod harmonics;
pub mod nnls;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::quadrature::gauss_legendre;
use harmonics::{harmonic_count, solid_harmonics};

/// Default harmonic degree cap.
pub const DEFAULT_DEGREE: usize = 8;
/// Harmonic degree beyond which recurrences are not validated.
pub const MAX_DEGREE: usize = 30;
/// Test-sphere radius for exterior comparisons.
pub const TEST_RADIUS: f64 = 2.0;
/// Tolerance on `|node| <= 1` and on node coincidence.
const NODE_TOL: f64 = 1e-12;

/// Finitely supported signed measure in the closed unit ball of R^3.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    nodes: Vec<[f64; 3]>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(nodes: Vec<[f64; 3]>, masses: Vec<f64>) -> Result<Self> {
        if nodes.len() != masses.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} masses",
                nodes.len(),
                masses.len()
            )));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidInput("measure has no nodes".into()));
        }
        if nodes.iter().flatten().chain(&masses).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite node or mass".into()));
        }
        if let Some(i) = nodes.iter().position(|p| norm(p) > 1.0 + NODE_TOL) {
            return Err(Error::InvalidInput(format!("node {i} lies outside the closed unit ball")));
        }
        // Sort-and-sweep on x for the distinctness check.
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| nodes[a][0].total_cmp(&nodes[b][0]));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if nodes[j][0] - nodes[i][0] > NODE_TOL {
                    break;
                }
                let d = norm(&sub(&nodes[i], &nodes[j]));
                if d <= NODE_TOL {
                    let (first, second) = (i.min(j), i.max(j));
                    return Err(Error::DuplicatePosition {
                        first,
                        second,
                        distance: d,
                    });
                }
            }
        }
        Ok(Self { nodes, masses })
    }

    pub fn point_mass() -> Self {
        Self {
            nodes: vec![[0.0; 3]],
            masses: vec![1.0],
        }
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Same measure with every node rotated by the row-major matrix `rot`.
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Result<Self> {
        let nodes = self
            .nodes
            .iter()
            .map(|p| [0, 1, 2].map(|i| (0..3).map(|j| rot[i][j] * p[j]).sum()))
            .collect();
        Self::new(nodes, self.masses.clone())
    }

    /// Concatenation of two measures on disjoint node sets.
    pub fn union(&self, other: &Self) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&other.nodes);
        let mut masses = self.masses.clone();
        masses.extend_from_slice(&other.masses);
        Self::new(nodes, masses)
    }
}

fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Discretized sphere of the given radius and total charge: Gauss-Legendre
/// in `cos(theta)` (`n_theta` nodes) times `n_phi` uniform azimuths. The
/// rule integrates harmonics exactly up to degree `min(2 n_theta - 1,
/// n_phi - 1)`.
pub fn shell(radius: f64, total: f64, n_theta: usize, n_phi: usize) -> Result<DiscreteMeasure> {
    if !(radius > 0.0 && radius <= 1.0) || n_theta == 0 || n_phi == 0 {
        return Err(Error::InvalidInput("shell needs 0 < radius <= 1 and nonzero node counts".into()));
    }
    let (ct, wt) = gauss_legendre(n_theta);
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut masses = Vec::with_capacity(n_theta * n_phi);
    for (c, w) in ct.iter().zip(&wt) {
        let st = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            nodes.push([radius * st * phi.cos(), radius * st * phi.sin(), radius * c]);
            masses.push(total * 0.5 * w / n_phi as f64);
        }
    }
    DiscreteMeasure::new(nodes, masses)
}

/// Two concentric shells with `n_theta * n_phi` nodes each. The outer shell
/// is rotated by half an azimuthal step so no nodes coincide radially.
pub fn two_shell(
    (r_in, q_in): (f64, f64),
    (r_out, q_out): (f64, f64),
    n_theta: usize,
    n_phi: usize,
) -> Result<DiscreteMeasure> {
    let inner = shell(r_in, q_in, n_theta, n_phi)?;
    let half = PI / n_phi as f64;
    let (c, s) = (half.cos(), half.sin());
    let outer = shell(r_out, q_out, n_theta, n_phi)?.rotated(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])?;
    inner.union(&outer)
}

/// The reference shells: `+2` at radius 0.5 and `-1` at radius 0.8, 512
/// nodes each (16 x 32).
pub fn reference_two_shell() -> DiscreteMeasure {
    two_shell((0.5, 2.0), (0.8, -1.0), 16, 32).expect("reference shells are valid")
}

/// Mass-weighted solid-harmonic moments up to `degree_max`, flattened.
pub fn exterior_moments(measure: &DiscreteMeasure, degree_max: usize) -> Vec<f64> {
    let m = DVector::from_column_slice(measure.masses());
    (moment_matrix(measure.nodes(), degree_max) * m).as_slice().to_vec()
}

/// `K x N` matrix of harmonics at the nodes, assembled in parallel.
fn moment_matrix(nodes: &[[f64; 3]], degree_max: usize) -> DMatrix<f64> {
    let k = harmonic_count(degree_max);
    let cols: Vec<Vec<f64>> = nodes.par_iter().map(|p| solid_harmonics(p, degree_max)).collect();
    DMatrix::from_fn(k, nodes.len(), |i, j| cols[j][i])
}

fn target(degree_max: usize) -> DVector<f64> {
    let mut c = DVector::zeros(harmonic_count(degree_max));
    c[0] = 1.0;
    c
}

/// Max over `samples` Fibonacci-sphere points on `|x| = 2` of
/// `|U^m(x) - 1/|x||`.
pub fn verify_exterior_match(measure: &DiscreteMeasure, samples: usize) -> f64 {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..samples.max(1))
        .into_par_iter()
        .map(|i| {
            let n = samples.max(1) as f64;
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            let x = [TEST_RADIUS * rho * t.cos(), TEST_RADIUS * rho * t.sin(), TEST_RADIUS * z];
            let u: f64 = measure
                .nodes()
                .iter()
                .zip(measure.masses())
                .map(|(y, m)| m / norm(&sub(&x, y)))
                .sum();
            (u - 1.0 / TEST_RADIUS).abs()
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Already nonnegative.
    Identity,
    /// Euclidean projection of the normalized positive part.
    Projection,
    /// Lawson-Hanson fallback.
    Nnls,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveAttempt {
    pub degree_max: usize,
    pub method: SolveMethod,
    pub moment_residual: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaradayCertificate {
    pub measure: DiscreteMeasure,
    /// Every node carrying positive mass also carries mass of the input.
    pub support_subset: bool,
    /// Euclidean norm of the moment mismatch at `degree_max`.
    pub moment_residual: f64,
    /// Max exterior potential mismatch on `|x| = 2`.
    pub exterior_residual: f64,
    pub feasible: bool,
    pub degree_max: usize,
    pub method: SolveMethod,
    pub attempts: Vec<SolveAttempt>,
}

/// Test-sphere sample count used for certificate exterior residuals.
pub const EXTERIOR_SAMPLES: usize = 2000;

/// Searches for nonnegative masses on the support of `mu` with moments
/// `(1, 0, ...)` up to `degree_max`.
///
/// When the first attempt is infeasible the problem is re-solved at
/// `degree_max + 4` (where the input still satisfies the precondition), and
/// the last attempt is reported.
pub fn solve_positive_equivalent(mu: &DiscreteMeasure, degree_max: usize, tol: f64) -> Result<FaradayCertificate> {
    let first = solve_at(mu, degree_max, tol)?;
    if first.feasible {
        return Ok(first);
    }
    let higher = degree_max + 4;
    if higher <= MAX_DEGREE && precondition(mu, higher, tol).is_ok() {
        let mut second = solve_at(mu, higher, tol)?;
        let mut attempts = first.attempts;
        attempts.append(&mut second.attempts);
        second.attempts = attempts;
        return Ok(second);
    }
    Ok(first)
}

/// Like [`solve_positive_equivalent`], but rebuilds the measure at twice
/// the resolution (and `degree_max + 4`) before reporting infeasibility.
/// `build(k)` must return the measure at refinement level `k`.
pub fn solve_with_refinement<F>(build: F, degree_max: usize, tol: f64) -> Result<FaradayCertificate>
where
    F: Fn(usize) -> Result<DiscreteMeasure>,
{
    let first = solve_positive_equivalent(&build(1)?, degree_max, tol)?;
    if first.feasible {
        return Ok(first);
    }
    let mut second = solve_positive_equivalent(&build(2)?, degree_max + 4, tol)?;
    let mut attempts = first.attempts;
    attempts.append(&mut second.attempts);
    second.attempts = attempts;
    Ok(second)
}

fn precondition(mu: &DiscreteMeasure, degree_max: usize, tol: f64) -> Result<()> {
    if degree_max > MAX_DEGREE {
        return Err(Error::InvalidInput(format!("degree {degree_max} exceeds {MAX_DEGREE}")));
    }
    let m = exterior_moments(mu, degree_max);
    let dev = m
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 { (v - 1.0).abs() } else { v.abs() })
        .fold(0.0, f64::max);
    if dev > tol {
        return Err(Error::Precondition(format!(
            "moments of the input deviate from a unit point charge by {dev:e} at degree {degree_max}"
        )));
    }
    Ok(())
}

fn solve_at(mu: &DiscreteMeasure, degree_max: usize, tol: f64) -> Result<FaradayCertificate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    precondition(mu, degree_max, tol)?;
    let positive: f64 = mu.masses().iter().filter(|m| **m > 0.0).sum();
    if !(positive > 0.0) {
        return Err(Error::NoPositiveSupport);
    }

    let support: Vec<usize> = (0..mu.len()).filter(|&i| mu.masses()[i] != 0.0).collect();
    let nodes: Vec<[f64; 3]> = support.iter().map(|&i| mu.nodes()[i]).collect();
    let c_mat = moment_matrix(&nodes, degree_max);
    let c = target(degree_max);

    let (mut sol, method) = if support.iter().all(|&i| mu.masses()[i] > 0.0) {
        (DVector::from_iterator(support.len(), support.iter().map(|&i| mu.masses()[i])), SolveMethod::Identity)
    } else {
        let m_ref = DVector::from_iterator(
            support.len(),
            support.iter().map(|&i| mu.masses()[i].max(0.0) / positive),
        );
        let projected = project(&c_mat, &c, &m_ref, tol);
        if residual(&c_mat, &c, &projected) <= tol {
            (projected, SolveMethod::Projection)
        } else {
            let k = c_mat.nrows();
            let weight = 1e3;
            let mut a = DMatrix::zeros(k + 1, support.len());
            a.row_mut(0).fill(weight);
            a.rows_mut(1, k).copy_from(&c_mat);
            let mut b = DVector::zeros(k + 1);
            b[0] = weight;
            b.rows_mut(1, k).copy_from(&c);
            (nnls::nnls(&a, &b, 10 * support.len()), SolveMethod::Nnls)
        }
    };
    let total = sol.sum();
    if total > 0.0 {
        sol /= total;
    }
    sol.apply(|v| *v = v.max(0.0));

    let moment_residual = residual(&c_mat, &c, &sol);
    let mut masses = vec![0.0; mu.len()];
    for (k, &i) in support.iter().enumerate() {
        masses[i] = sol[k];
    }
    let support_subset = masses
        .iter()
        .zip(mu.masses())
        .all(|(m, q)| *m == 0.0 || *q != 0.0);
    let measure = DiscreteMeasure::new(mu.nodes().to_vec(), masses)?;
    let exterior_residual = verify_exterior_match(&measure, EXTERIOR_SAMPLES);
    let feasible = moment_residual <= tol;
    Ok(FaradayCertificate {
        measure,
        support_subset,
        moment_residual,
        exterior_residual,
        feasible,
        degree_max,
        method,
        attempts: vec![SolveAttempt {
            degree_max,
            method,
            moment_residual,
            feasible,
        }],
    })
}

fn residual(c_mat: &DMatrix<f64>, c: &DVector<f64>, m: &DVector<f64>) -> f64 {
    (c_mat * m - c).norm()
}

/// Euclidean projection of `m_ref` onto `{C m = c, m >= 0}` by semismooth
/// Newton on the dual: `m(l) = max(0, m_ref + C^T l)`, solve `C m(l) = c`.
fn project(c_mat: &DMatrix<f64>, c: &DVector<f64>, m_ref: &DVector<f64>, tol: f64) -> DVector<f64> {
    let k = c_mat.nrows();
    let primal = |l: &DVector<f64>| (m_ref + c_mat.transpose() * l).map(|v| v.max(0.0));
    // Dual objective, convex with gradient C m(l) - c.
    let dual = |l: &DVector<f64>| {
        let m = primal(l);
        0.5 * m.norm_squared() - c.dot(l)
    };
    let mut l = DVector::zeros(k);
    let mut m = primal(&l);
    for _ in 0..200 {
        let g = c_mat * &m - c;
        if g.norm() <= 1e-3 * tol {
            break;
        }
        let active: Vec<usize> = (0..m.len()).filter(|&i| m[i] > 0.0).collect();
        let ca = c_mat.select_columns(&active);
        let j = &ca * ca.transpose();
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(step) = svd.solve(&(-&g), 1e-14 * smax.max(f64::MIN_POSITIVE)) else {
            break;
        };
        let f0 = dual(&l);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &l + &step * t;
            if dual(&trial) <= f0 + 1e-4 * t * slope {
                l = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        m = primal(&l);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_moments() {
        let m = exterior_moments(&DiscreteMeasure::point_mass(), 3);
        assert_eq!(m.len(), 16);
        assert_eq!(m[0], 1.0);
        assert!(m[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shell_moments_vanish_above_degree_zero() {
        let s = shell(0.7, 1.0, 16, 32).unwrap();
        let m = exterior_moments(&s, 8);
        assert!((m[0] - 1.0).abs() < 1e-14);
        assert!(m[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn dipole_moments_and_precondition() {
        let d = DiscreteMeasure::new(vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]], vec![1.0, -1.0]).unwrap();
        let m = exterior_moments(&d, 2);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[2], 1.0);
        assert!(matches!(solve_positive_equivalent(&d, 8, 1e-8), Err(Error::Precondition(_))));
        assert!(verify_exterior_match(&d, 500) >= 0.1);
    }

    #[test]
    fn point_mass_is_its_own_certificate() {
        let cert = solve_positive_equivalent(&DiscreteMeasure::point_mass(), 8, 1e-8).unwrap();
        assert!(cert.feasible);
        assert_eq!(cert.method, SolveMethod::Identity);
        assert_eq!(cert.measure, DiscreteMeasure::point_mass());
        assert!(cert.exterior_residual < 1e-15);
    }

    #[test]
    fn no_positive_support() {
        let mu = DiscreteMeasure::new(vec![[0.0; 3]], vec![-1.0]).unwrap();
        // Fails the moment precondition before the support check.
        assert!(solve_positive_equivalent(&mu, 0, 1e-8).is_err());
        let zero = DiscreteMeasure::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert!(matches!(solve_positive_equivalent(&zero, 0, 2.0), Err(Error::NoPositiveSupport)));
    }

    #[test]
    fn two_shells() {
        let mu = reference_two_shell();
        assert_eq!(mu.len(), 1024);
        assert!((mu.total_mass() - 1.0).abs() < 1e-14);
        let cert = solve_positive_equivalent(&mu, 8, 1e-8).unwrap();
        assert!(cert.feasible, "{:?}", cert.attempts);
        assert!(cert.support_subset);
        assert!(cert.measure.masses().iter().all(|m| *m >= 0.0));
        assert!((cert.measure.total_mass() - 1.0).abs() < 1e-10);
        assert!(cert.exterior_residual < 1e-8);
    }

    #[test]
    fn nnls_fallback_agrees() {
        // Force the fallback path directly.
        let mu = reference_two_shell();
        let c_mat = moment_matrix(mu.nodes(), 4);
        let c = target(4);
        let k = c_mat.nrows();
        let mut a = DMatrix::zeros(k + 1, mu.len());
        a.row_mut(0).fill(1e3);
        a.rows_mut(1, k).copy_from(&c_mat);
        let mut b = DVector::zeros(k + 1);
        b[0] = 1e3;
        b.rows_mut(1, k).copy_from(&c);
        let x = nnls::nnls(&a, &b, 10 * mu.len());
        assert!(residual(&c_mat, &c, &x) < 1e-10);
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(DiscreteMeasure::new(vec![[1.1, 0.0, 0.0]], vec![1.0]).is_err());
        assert!(matches!(
            DiscreteMeasure::new(vec![[0.1, 0.0, 0.0], [0.1, 0.0, 0.0]], vec![1.0, 1.0]),
            Err(Error::DuplicatePosition { .. })
        ));
    }
}
