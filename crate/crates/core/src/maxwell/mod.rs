//! Critical points of the Coulomb potential of point charges in R^3.
//!
//! `find_critical_points` is a multi-start damped Newton search on
//! `grad U = 0` using the analytic Hessian; the count it reports is "found
//! at this resolution", never a certified global count. Degenerate critical
//! points (singular Hessian) are classified and can be followed along their
//! curve with [`trace_curve`].

mod trace;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;

pub use trace::{transversality_angle, trace_curve, CurveFit, CurveTrace, Crossing, Plane, TraceSettings};

use crate::config::ChargeConfiguration;
use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which the Hessian counts as singular.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Points within this factor of the threshold are reported as suspect.
pub const SUSPECT_FACTOR: f64 = 10.0;

/// Dense 3-D view of a configuration with the unnormalized `1/r` kernel.
#[derive(Debug, Clone)]
pub(crate) struct Field3 {
    pos: Vec<Vector3<f64>>,
    q: Vec<f64>,
    length: f64,
}

impl Field3 {
    pub(crate) fn new(cfg: &ChargeConfiguration) -> Result<Self> {
        if cfg.dimension() != 3 {
            return Err(Error::UnsupportedDimension(cfg.dimension()));
        }
        Ok(Self {
            pos: cfg
                .charges()
                .iter()
                .map(|c| Vector3::from_column_slice(c.position.coords()))
                .collect(),
            q: cfg.charge_values(),
            length: cfg.length_scale(),
        })
    }

    pub(crate) fn length(&self) -> f64 {
        self.length
    }

    /// Natural magnitude of the field: `sum |q| / L^2`.
    pub(crate) fn field_scale(&self) -> f64 {
        self.q.iter().map(|q| q.abs()).sum::<f64>() / (self.length * self.length)
    }

    pub(crate) fn nearest_charge(&self, x: &Vector3<f64>) -> f64 {
        self.pos.iter().map(|p| (x - p).norm()).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for (p, q) in self.pos.iter().zip(&self.q) {
            let d = x - p;
            let r2 = d.norm_squared();
            g -= d * (q / (r2 * r2.sqrt()));
        }
        g
    }

    pub(crate) fn hessian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        for (p, q) in self.pos.iter().zip(&self.q) {
            let d = x - p;
            let r2 = d.norm_squared();
            let r3 = r2 * r2.sqrt();
            h += (d * d.transpose()) * (3.0 * q / (r3 * r2)) - Matrix3::identity() * (q / r3);
        }
        h
    }
}

/// Eigenvalues ascending with matching unit eigenvectors.
pub(crate) fn sorted_eigen(h: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(*h);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    (vals, vecs)
}

pub(crate) fn rank_of(eigs: &[f64; 3]) -> usize {
    let m = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0;
    }
    eigs.iter().filter(|v| v.abs() > DEGENERACY_TOL * m).count()
}

/// Minimum-norm solution of `A x = b` with a relative singular value cutoff.
pub(crate) fn pinv_solve(a: &Matrix3<f64>, b: &Vector3<f64>) -> Option<Vector3<f64>> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return None;
    }
    svd.solve(b, 1e-10 * smax).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    NondegenerateSaddle,
    Degenerate,
    Suspect,
}

impl CriticalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NondegenerateSaddle => "nondegenerate_saddle",
            Self::Degenerate => "degenerate",
            Self::Suspect => "suspect",
        }
    }

    pub(crate) fn classify(eigs: &[f64; 3]) -> Self {
        let m = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let small = eigs.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if small <= DEGENERACY_TOL * m {
            Self::Degenerate
        } else if small <= SUSPECT_FACTOR * DEGENERACY_TOL * m {
            Self::Suspect
        } else {
            Self::NondegenerateSaddle
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: [f64; 3],
    /// `|grad U|` at `location`.
    pub residual: f64,
    pub hessian_eigenvalues: [f64; 3],
    pub kind: CriticalKind,
}

/// Axis-aligned search region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl SearchBox {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        if (0..3).any(|k| !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite()) {
            return Err(Error::InvalidInput("search box must have hi > lo on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Cube of side `[a, b]` on every axis.
    pub fn cube(a: f64, b: f64) -> Result<Self> {
        Self::new([a; 3], [b; 3])
    }

    /// Box centered at the centroid with side twice the configuration
    /// diameter.
    pub fn around(cfg: &ChargeConfiguration) -> Self {
        let c = cfg.centroid();
        let h = cfg.length_scale();
        Self {
            lo: [c[0] - h, c[1] - h, c[2] - h],
            hi: [c[0] + h, c[1] + h, c[2] + h],
        }
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        (0..3).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    fn size(&self) -> f64 {
        (0..3).map(|k| self.hi[k] - self.lo[k]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FindSettings {
    /// Number of low-discrepancy start points.
    pub starts: usize,
    /// Convergence tolerance on `|grad U|` relative to `sum|q| / L^2`.
    pub tol: f64,
    /// Clustering radius relative to the configuration length scale.
    pub dedup_radius: f64,
    pub max_newton: usize,
}

impl Default for FindSettings {
    fn default() -> Self {
        Self {
            starts: 20 * 20 * 20,
            tol: 1e-12,
            dedup_radius: 1e-6,
            max_newton: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPointSet {
    /// Deduplicated, sorted lexicographically by location.
    pub points: Vec<CriticalPoint>,
    pub starts_used: usize,
    pub converged_starts: usize,
    pub search_box: SearchBox,
}

impl CriticalPointSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn count_of(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|p| p.kind == kind).count()
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points (bases 2, 3, 5) in the box, followed by the centroid and
/// every pairwise midpoint of the charges.
pub fn default_starts(cfg: &ChargeConfiguration, bx: &SearchBox, count: usize) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = (1..=count)
        .map(|i| {
            let u = [radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)];
            [0, 1, 2].map(|k| bx.lo[k] + u[k] * (bx.hi[k] - bx.lo[k]))
        })
        .collect();
    let c = cfg.centroid();
    out.push([c[0], c[1], c[2]]);
    for i in 0..cfg.len() {
        for j in (i + 1)..cfg.len() {
            let (a, b) = (cfg.position(i), cfg.position(j));
            out.push([0, 1, 2].map(|k| 0.5 * (a[k] + b[k])));
        }
    }
    out
}

fn newton_root(field: &Field3, start: Vector3<f64>, bx: &SearchBox, tol_abs: f64, max_iter: usize) -> Option<Vector3<f64>> {
    let guard = 1e-6 * field.length();
    let reach = 2.0 * bx.size();
    let centre = Vector3::new(
        0.5 * (bx.lo[0] + bx.hi[0]),
        0.5 * (bx.lo[1] + bx.hi[1]),
        0.5 * (bx.lo[2] + bx.hi[2]),
    );
    let mut x = start;
    let mut g = field.gradient(&x);
    let mut gn = g.norm();
    for _ in 0..max_iter {
        if gn <= tol_abs {
            return Some(x);
        }
        let step = pinv_solve(&field.hessian(&x), &(-g))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let y = x + step * t;
            if field.nearest_charge(&y) > guard {
                let gy = field.gradient(&y);
                let gyn = gy.norm();
                if gyn < gn {
                    x = y;
                    g = gy;
                    gn = gyn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted || (x - centre).norm() > reach {
            return None;
        }
    }
    (gn <= tol_abs).then_some(x)
}

/// Multi-start search over the default start set.
pub fn find_critical_points(
    cfg: &ChargeConfiguration,
    bx: &SearchBox,
    settings: &FindSettings,
) -> Result<CriticalPointSet> {
    let starts = default_starts(cfg, bx, settings.starts);
    find_critical_points_from(cfg, bx, &starts, settings)
}

/// Multi-start search from explicit start points. Starts closer than
/// `1e-6 L` to a charge are skipped. The result does not depend on the
/// order of `starts` beyond clustering ties.
pub fn find_critical_points_from(
    cfg: &ChargeConfiguration,
    bx: &SearchBox,
    starts: &[[f64; 3]],
    settings: &FindSettings,
) -> Result<CriticalPointSet> {
    let field = Field3::new(cfg)?;
    let tol_abs = settings.tol * field.field_scale();
    let guard = 1e-6 * field.length();

    let roots: Vec<Option<Vector3<f64>>> = starts
        .par_iter()
        .map(|s| {
            let x0 = Vector3::from(*s);
            if field.nearest_charge(&x0) <= guard {
                return None;
            }
            newton_root(&field, x0, bx, tol_abs, settings.max_newton).filter(|x| bx.contains(x))
        })
        .collect();
    let converged: Vec<(Vector3<f64>, f64)> = roots
        .into_iter()
        .flatten()
        .map(|x| {
            let r = field.gradient(&x).norm();
            (x, r)
        })
        .collect();
    let converged_starts = converged.len();

    let points = cluster(&field, converged, settings.dedup_radius * field.length());
    Ok(CriticalPointSet {
        points,
        starts_used: starts.len(),
        converged_starts,
        search_box: *bx,
    })
}

fn lex(a: &Vector3<f64>, b: &Vector3<f64>) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Greedy clustering; best residual first so representatives do not depend
/// on start order.
fn cluster(field: &Field3, mut roots: Vec<(Vector3<f64>, f64)>, radius: f64) -> Vec<CriticalPoint> {
    roots.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex(&a.0, &b.0)));
    let mut reps: Vec<(Vector3<f64>, f64)> = Vec::new();
    for (x, r) in roots {
        if reps.iter().all(|(y, _)| (x - y).norm() > radius) {
            reps.push((x, r));
        }
    }
    reps.sort_by(|a, b| lex(&a.0, &b.0));
    reps.into_iter()
        .map(|(x, residual)| {
            let (eigs, _) = sorted_eigen(&field.hessian(&x));
            CriticalPoint {
                location: [x[0], x[1], x[2]],
                residual,
                hessian_eigenvalues: eigs,
                kind: CriticalKind::classify(&eigs),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracy {
    pub is_critical: bool,
    pub residual: f64,
    pub hessian_rank: usize,
    pub eigenvalues: [f64; 3],
    /// Eigenvector of the smallest `|eigenvalue|` when the rank is below 3.
    pub null_direction: Option<[f64; 3]>,
}

/// Default criticality tolerance of [`detect_degeneracy`], relative to
/// `sum|q| / L^2`.
pub const CRITICAL_TOL: f64 = 1e-10;

/// Hessian rank and null direction at a critical point.
pub fn detect_degeneracy(cfg: &ChargeConfiguration, point: &[f64; 3]) -> Result<Degeneracy> {
    detect_degeneracy_with_tol(cfg, point, CRITICAL_TOL)
}

pub fn detect_degeneracy_with_tol(cfg: &ChargeConfiguration, point: &[f64; 3], tol: f64) -> Result<Degeneracy> {
    let field = Field3::new(cfg)?;
    let x = Vector3::from(*point);
    if let Some(index) = cfg.charge_near(&point[..]) {
        return Err(Error::EvaluationOnCharge { index });
    }
    let residual = field.gradient(&x).norm();
    if residual > tol * field.field_scale() {
        return Err(Error::NotCritical { residual });
    }
    let (eigs, vecs) = sorted_eigen(&field.hessian(&x));
    let hessian_rank = rank_of(&eigs);
    let null_direction = (hessian_rank < 3).then(|| {
        let i = (0..3)
            .min_by(|&a, &b| eigs[a].abs().total_cmp(&eigs[b].abs()))
            .unwrap_or(0);
        let v = vecs[i];
        [v[0], v[1], v[2]]
    });
    Ok(Degeneracy {
        is_critical: true,
        residual,
        hessian_rank,
        eigenvalues: eigs,
        null_direction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusEntry {
    pub charges: Vec<([f64; 3], f64)>,
    pub found: usize,
    pub nondegenerate: usize,
    pub degenerate: usize,
    pub suspect: usize,
    /// Conjectured bound `(n-1)^2`; recorded, not asserted.
    pub conjectured_bound: usize,
}

/// Critical-point counts for random configurations: `n_charges` positions
/// uniform in the unit cube, charges of random sign with magnitude in
/// [0.5, 2]. Draws positions then charges, configuration by configuration.
pub fn random_census<R: RngExt>(
    rng: &mut R,
    trials: usize,
    n_charges: usize,
    settings: &FindSettings,
) -> Result<Vec<CensusEntry>> {
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let entries: Vec<(Vec<f64>, f64)> = (0..n_charges)
            .map(|_| {
                let p: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let mag = rng.random_range(0.5..2.0);
                let q = if rng.random::<bool>() { mag } else { -mag };
                (p, q)
            })
            .collect();
        let cfg = ChargeConfiguration::new(3, entries)?;
        let set = find_critical_points(&cfg, &SearchBox::around(&cfg), settings)?;
        out.push(CensusEntry {
            charges: cfg
                .charges()
                .iter()
                .map(|c| {
                    let p = c.position.coords();
                    ([p[0], p[1], p[2]], c.q)
                })
                .collect(),
            found: set.count(),
            nondegenerate: set.count_of(CriticalKind::NondegenerateSaddle),
            degenerate: set.count_of(CriticalKind::Degenerate),
            suspect: set.count_of(CriticalKind::Suspect),
            conjectured_bound: (n_charges - 1) * (n_charges - 1),
        });
    }
    Ok(out)
}
