//! Pseudo-arclength continuation along curves of degenerate critical points.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen, Vector3};
use serde::Serialize;

use super::{detect_degeneracy_with_tol, pinv_solve, rank_of, sorted_eigen, Field3, CRITICAL_TOL};
use crate::config::ChargeConfiguration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSettings {
    /// Nominal step; `None` means `1e-2 L`.
    pub step: Option<f64>,
    /// Corrector tolerance on `|grad U|` relative to `sum|q| / L^2`.
    pub tol: f64,
    /// Point budget per direction of travel.
    pub max_points: usize,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            step: None,
            tol: 1e-12,
            max_points: 2000,
        }
    }
}

/// Best-fit residuals, advisory only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveFit {
    /// Largest distance from the principal line.
    pub line_residual: f64,
    /// Largest deviation from the best-fit circle (in-plane and normal).
    pub circle_residual: f64,
    pub circle_center: [f64; 3],
    pub circle_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTrace {
    pub points: Vec<[f64; 3]>,
    pub closed: bool,
    pub arc_length: f64,
    /// Largest `|grad U|` over the traced points.
    pub max_residual: f64,
    pub step: f64,
    pub fit: CurveFit,
}

enum Stop {
    Closed(f64),
    Open,
}

struct Tracer<'a> {
    field: &'a Field3,
    tol_abs: f64,
    step: f64,
    max_points: usize,
}

impl Tracer<'_> {
    /// Newton with `t . delta = 0`, at most five iterations.
    fn correct(&self, mut x: Vector3<f64>, t: &Vector3<f64>) -> Option<Vector3<f64>> {
        for _ in 0..=5 {
            let g = self.field.gradient(&x);
            if g.norm() <= self.tol_abs {
                return Some(x);
            }
            let h = self.field.hessian(&x);
            let mut a = SMatrix::<f64, 4, 3>::zeros();
            a.fixed_view_mut::<3, 3>(0, 0).copy_from(&h);
            a.fixed_view_mut::<1, 3>(3, 0).copy_from(&t.transpose());
            let mut b = SVector::<f64, 4>::zeros();
            b.fixed_rows_mut::<3>(0).copy_from(&(-g));
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let d = svd.solve(&b, 1e-12 * smax).ok()?;
            x += d;
        }
        (self.field.gradient(&x).norm() <= self.tol_abs).then_some(x)
    }

    fn tangent(&self, x: &Vector3<f64>, prev: &Vector3<f64>) -> Option<Vector3<f64>> {
        let (eigs, vecs) = sorted_eigen(&self.field.hessian(x));
        if rank_of(&eigs) == 3 {
            return None;
        }
        let i = (0..3).min_by(|&a, &b| eigs[a].abs().total_cmp(&eigs[b].abs()))?;
        let v = vecs[i];
        Some(if v.dot(prev) < 0.0 { -v } else { v })
    }

    fn march(&self, start: Vector3<f64>, t0: Vector3<f64>, out: &mut Vec<Vector3<f64>>) -> Result<Stop> {
        let mut x = start;
        let mut t = t0;
        let mut h = self.step;
        let mut arc = 0.0;
        let near = 2.0 * self.step;
        while out.len() < self.max_points {
            if out.len() >= 4 {
                let back = start - x;
                if back.norm() <= 1.25 * self.step && back.dot(&t) > 0.0 {
                    return Ok(Stop::Closed(arc + back.norm()));
                }
            }
            let y = loop {
                if let Some(y) = self.correct(x + t * h, &t) {
                    break y;
                }
                h *= 0.5;
                if h < self.step / 256.0 {
                    return Err(Error::CorrectorDiverged { points: out.len() });
                }
            };
            arc += (y - x).norm();
            out.push(y);
            if self.field.nearest_charge(&y) < near {
                return Ok(Stop::Open);
            }
            match self.tangent(&y, &t) {
                Some(tn) => t = tn,
                None => return Ok(Stop::Open),
            }
            x = y;
            h = (2.0 * h).min(self.step);
        }
        Ok(Stop::Open)
    }
}

/// Follows the curve of degenerate critical points through `seed`.
///
/// The seed must be critical with Hessian rank below 3. Travel proceeds
/// along the null direction until the curve closes on itself; otherwise
/// both directions are traced until a charge is approached, the Hessian
/// regains full rank, or the point budget runs out.
pub fn trace_curve(cfg: &ChargeConfiguration, seed: &[f64; 3], settings: &TraceSettings) -> Result<CurveTrace> {
    let field = Field3::new(cfg)?;
    let info = detect_degeneracy_with_tol(cfg, seed, CRITICAL_TOL)?;
    if info.hessian_rank == 3 {
        return Err(Error::SeedNotDegenerate { rank: 3 });
    }
    let step = settings.step.unwrap_or(1e-2 * field.length());
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("invalid trace step {step}")));
    }
    let tol_abs = settings.tol * field.field_scale();
    let tracer = Tracer {
        field: &field,
        tol_abs,
        step,
        max_points: settings.max_points.max(2),
    };

    let n = info.null_direction.map(Vector3::from).unwrap_or_else(Vector3::z);
    let mut start = Vector3::from(*seed);
    if field.gradient(&start).norm() > tol_abs {
        start = tracer
            .correct(start, &n)
            .ok_or(Error::CorrectorDiverged { points: 0 })?;
    }

    let mut forward = vec![start];
    let (closed, arc_length, points) = match tracer.march(start, n, &mut forward)? {
        Stop::Closed(arc) => (true, arc, forward),
        Stop::Open => {
            let mut backward = vec![start];
            tracer.march(start, -n, &mut backward)?;
            let arc_f: f64 = forward.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let arc_b: f64 = backward.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let mut all: Vec<Vector3<f64>> = backward.into_iter().skip(1).rev().collect();
            all.extend(forward);
            (false, arc_f + arc_b, all)
        }
    };

    let max_residual = points
        .iter()
        .map(|p| field.gradient(p).norm())
        .fold(0.0, f64::max);
    let fit = fit_curve(&points);
    Ok(CurveTrace {
        points: points.iter().map(|p| [p[0], p[1], p[2]]).collect(),
        closed,
        arc_length,
        max_residual,
        step,
        fit,
    })
}

fn fit_curve(points: &[Vector3<f64>]) -> CurveFit {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cov = points
        .iter()
        .fold(Matrix3::zeros(), |a, p| a + (p - c) * (p - c).transpose());
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal: Vector3<f64> = eig.eigenvectors.column(idx[0]).into_owned();
    let e1: Vector3<f64> = eig.eigenvectors.column(idx[2]).into_owned();
    let e2: Vector3<f64> = eig.eigenvectors.column(idx[1]).into_owned();

    let line_residual = points
        .iter()
        .map(|p| {
            let d = p - c;
            (d - e1 * d.dot(&e1)).norm()
        })
        .fold(0.0, f64::max);

    // Algebraic circle fit in the best-fit plane.
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in points {
        let d = p - c;
        let (u, v) = (d.dot(&e1), d.dot(&e2));
        let row = Vector3::new(2.0 * u, 2.0 * v, 1.0);
        ata += row * row.transpose();
        atb += row * (u * u + v * v);
    }
    let (circle_center, circle_radius, circle_residual) = match pinv_solve(&ata, &atb) {
        Some(s) if s[2] + s[0] * s[0] + s[1] * s[1] > 0.0 => {
            let r = (s[2] + s[0] * s[0] + s[1] * s[1]).sqrt();
            let centre = c + e1 * s[0] + e2 * s[1];
            let res = points
                .iter()
                .map(|p| {
                    let d = p - centre;
                    let off = d.dot(&normal);
                    let inplane = (d - normal * off).norm();
                    ((inplane - r).abs()).max(off.abs())
                })
                .fold(0.0, f64::max);
            (centre, r, res)
        }
        _ => (c, 0.0, f64::MAX),
    };
    CurveFit {
        line_residual,
        circle_residual,
        circle_center: [circle_center[0], circle_center[1], circle_center[2]],
        circle_radius,
    }
}

fn central_tangent(pts: &[Vector3<f64>], i: usize, closed: bool) -> Vector3<f64> {
    let n = pts.len();
    let (prev, next) = if closed {
        ((i + n - 1) % n, (i + 1) % n)
    } else {
        (i.saturating_sub(1), (i + 1).min(n - 1))
    };
    let t = pts[next] - pts[prev];
    t / t.norm()
}

/// Plane `normal . x = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub point: [f64; 3],
    /// Angle between the curve and the plane, in degrees, in (0, 90].
    pub angle_deg: f64,
}

/// Angles at which a traced curve crosses a plane. Points within
/// `1e-9` times the trace step of the plane count as on it and are skipped;
/// closed traces wrap around.
pub fn transversality_angle(trace: &CurveTrace, plane: &Plane) -> Result<Vec<Crossing>> {
    let n = Vector3::from(plane.normal);
    let norm = n.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidInput("plane normal must be nonzero".into()));
    }
    let n = n / norm;
    let offset = plane.offset / norm;
    let eps = 1e-9 * trace.step.max(f64::MIN_POSITIVE);
    let pts: Vec<Vector3<f64>> = trace.points.iter().map(|p| Vector3::from(*p)).collect();
    let signed: Vec<(usize, f64)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (i, n.dot(p) - offset))
        .filter(|(_, s)| s.abs() > eps)
        .collect();

    let mut pairs: Vec<((usize, f64), (usize, f64))> = signed.windows(2).map(|w| (w[0], w[1])).collect();
    if trace.closed && signed.len() >= 2 {
        pairs.push((signed[signed.len() - 1], signed[0]));
    }

    let crossings: Vec<Crossing> = pairs
        .into_iter()
        .filter(|((_, sa), (_, sb))| sa.signum() != sb.signum())
        .map(|((ia, sa), (ib, sb))| {
            let (a, b) = (pts[ia], pts[ib]);
            let frac = sa / (sa - sb);
            let p = a + (b - a) * frac;
            // Central-difference tangents at both ends, interpolated.
            let (ta, tb) = (central_tangent(&pts, ia, trace.closed), central_tangent(&pts, ib, trace.closed));
            let tb = if tb.dot(&ta) < 0.0 { -tb } else { tb };
            let t = ta * (1.0 - frac) + tb * frac;
            let sin = (n.dot(&t).abs() / t.norm()).min(1.0);
            Crossing {
                point: [p[0], p[1], p[2]],
                angle_deg: sin.asin().to_degrees(),
            }
        })
        .collect();
    if crossings.is_empty() {
        return Err(Error::NoCrossing);
    }
    Ok(crossings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxwell::tests::{circle, square};

    #[test]
    fn square_axis_is_a_line() {
        let settings = TraceSettings {
            max_points: 100,
            ..Default::default()
        };
        let tr = trace_curve(&square(), &[0.0, 0.0, 1.0], &settings).unwrap();
        assert!(!tr.closed);
        assert!(tr.fit.line_residual < 1e-9);
        assert!(tr.max_residual < 1e-12);
        let c = transversality_angle(
            &tr,
            &Plane {
                normal: [0.0, 0.0, 1.0],
                offset: 0.0,
            },
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].angle_deg - 90.0).abs() < 1e-6);
    }

    #[test]
    fn circle_closes() {
        let tr = trace_curve(&circle(), &[0.0, 1.0, 0.0], &TraceSettings::default()).unwrap();
        assert!(tr.closed);
        assert!((tr.arc_length - 2.0 * std::f64::consts::PI).abs() < 1e-3, "{}", tr.arc_length);
        assert!(tr.fit.circle_residual < 1e-9);
        assert!((tr.fit.circle_radius - 1.0).abs() < 1e-9);
        for p in &tr.points {
            let r = (p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-9 && p[0].abs() < 1e-9);
        }
        let c = transversality_angle(
            &tr,
            &Plane {
                normal: [0.0, 0.0, 1.0],
                offset: 0.0,
            },
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| (c.angle_deg - 90.0).abs() < 0.1), "{c:?}");
        let in_plane = transversality_angle(
            &tr,
            &Plane {
                normal: [1.0, 0.0, 0.0],
                offset: 0.0,
            },
        );
        assert_eq!(in_plane.unwrap_err(), Error::NoCrossing);
    }

    #[test]
    fn nondegenerate_seed_is_rejected() {
        let cfg = crate::config::build_configuration(
            3,
            vec![(vec![1.0, 0.0, 0.0], 1.0), (vec![-1.0, 0.0, 0.0], 1.0)],
        )
        .unwrap();
        assert_eq!(
            trace_curve(&cfg, &[0.0; 3], &TraceSettings::default()).unwrap_err(),
            Error::SeedNotDegenerate { rank: 3 }
        );
    }
}
