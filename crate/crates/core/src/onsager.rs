//! Nearest-neighbour distances and the Onsager bound.
//!
//! With every charge smeared over a sphere of radius `delta_j / 2` (tangent
//! to its nearest neighbour), positivity of the total energy gives
//!
//! ```text
//! 2^(d-3) sum_j q_j^2 / delta_j^(d-2)  >  - sum_{j<k} q_j q_k / |x_j - x_k|^(d-2)
//! ```
//!
//! for every d >= 3. Normalization constants cancel from both sides and are
//! dropped here.

use serde::Serialize;

use crate::config::{distance, ChargeConfiguration};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsagerReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; strictly positive for every valid input.
    pub margin: f64,
    pub deltas: Vec<f64>,
    pub dimension: usize,
}

/// `delta_j = min_{k != j} |x_j - x_k|`.
pub fn nearest_distances(cfg: &ChargeConfiguration) -> Result<Vec<f64>> {
    let n = cfg.len();
    if n < 2 {
        return Err(Error::SingleCharge);
    }
    let mut deltas = vec![f64::INFINITY; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let r = distance(cfg.position(j), cfg.position(k));
            deltas[j] = deltas[j].min(r);
            deltas[k] = deltas[k].min(r);
        }
    }
    Ok(deltas)
}

/// Onsager bound for arbitrary real charges in d >= 3.
pub fn onsager_check(cfg: &ChargeConfiguration) -> Result<OnsagerReport> {
    let d = cfg.dimension();
    if d < 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let deltas = nearest_distances(cfg)?;
    let p = d as i32 - 2;
    let lhs = 2f64.powi(d as i32 - 3)
        * cfg
            .charges()
            .iter()
            .zip(&deltas)
            .map(|(c, delta)| c.q * c.q / delta.powi(p))
            .sum::<f64>();
    let n = cfg.len();
    let mut rhs = 0.0;
    for j in 0..n {
        for k in (j + 1)..n {
            rhs -= cfg.q(j) * cfg.q(k) / distance(cfg.position(j), cfg.position(k)).powi(p);
        }
    }
    Ok(OnsagerReport {
        lhs,
        rhs,
        margin: lhs - rhs,
        deltas,
        dimension: d,
    })
}

/// The original unit-charge form: every `q_j` must be +1 or -1.
pub fn onsager_unit_charge_check(cfg: &ChargeConfiguration) -> Result<OnsagerReport> {
    if let Some((index, c)) = cfg
        .charges()
        .iter()
        .enumerate()
        .find(|(_, c)| c.q.abs() != 1.0)
    {
        return Err(Error::NonUnitCharge { index, q: c.q });
    }
    onsager_check(cfg)
}

/// Self-energy `sum_j q_j^2 / (c delta_j)^(d-2)` of spheres with radii
/// `c * delta_j`, admissible (non-overlapping) for `c` in (0, 1/2].
pub fn scaled_self_energy(cfg: &ChargeConfiguration, c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::InvalidInput(format!("radius fraction {c} outside (0, 1/2]")));
    }
    let d = cfg.dimension();
    if d < 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let deltas = nearest_distances(cfg)?;
    let p = d as i32 - 2;
    Ok(cfg
        .charges()
        .iter()
        .zip(&deltas)
        .map(|(ch, delta)| ch.q * ch.q / (c * delta).powi(p))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::build_configuration;

    fn dipole() -> ChargeConfiguration {
        build_configuration(
            3,
            vec![(vec![0.0, 0.0, 0.0], 1.0), (vec![1.0, 0.0, 0.0], -1.0)],
        )
        .unwrap()
    }

    #[test]
    fn nearest_distance_examples() {
        assert_eq!(nearest_distances(&dipole()).unwrap(), vec![1.0, 1.0]);
        let line = build_configuration(
            3,
            vec![
                (vec![0.0, 0.0, 0.0], 1.0),
                (vec![0.5, 0.0, 0.0], 1.0),
                (vec![1.0, 0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(nearest_distances(&line).unwrap(), vec![0.5, 0.5, 0.5]);
        let one = build_configuration(3, vec![(vec![0.0, 0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(nearest_distances(&one).unwrap_err(), Error::SingleCharge);
    }

    #[test]
    fn dipole_in_three_dimensions() {
        let r = onsager_check(&dipole()).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin), (2.0, 1.0, 1.0));
        let u = onsager_unit_charge_check(&dipole()).unwrap();
        assert_eq!(u, r);
    }

    #[test]
    fn like_charges_in_four_dimensions() {
        let cfg = build_configuration(
            4,
            vec![(vec![0.0; 4], 1.0), (vec![2.0, 0.0, 0.0, 0.0], 1.0)],
        )
        .unwrap();
        let r = onsager_check(&cfg).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, -0.25);
        assert_eq!(r.margin, 1.25);
    }

    #[test]
    fn alternating_square() {
        let cfg = build_configuration(
            3,
            vec![
                (vec![1.0, 1.0, 0.0], 1.0),
                (vec![-1.0, 1.0, 0.0], -1.0),
                (vec![-1.0, -1.0, 0.0], 1.0),
                (vec![1.0, -1.0, 0.0], -1.0),
            ],
        )
        .unwrap();
        // Four unlike side pairs at distance 2, two like diagonal pairs at 2*sqrt(2).
        let rhs = 4.0 * 0.5 - 2.0 / (2.0 * 2f64.sqrt());
        let r = onsager_unit_charge_check(&cfg).unwrap();
        assert_eq!(r.lhs, 2.0);
        assert!((r.rhs - rhs).abs() < 1e-15);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn guards() {
        let cfg = build_configuration(
            3,
            vec![(vec![0.0, 0.0, 0.0], 2.0), (vec![1.0, 0.0, 0.0], -1.0)],
        )
        .unwrap();
        assert_eq!(
            onsager_unit_charge_check(&cfg).unwrap_err(),
            Error::NonUnitCharge { index: 0, q: 2.0 }
        );
        let planar = build_configuration(2, vec![(vec![0.0, 0.0], 1.0), (vec![1.0, 0.0], -1.0)]).unwrap();
        assert_eq!(onsager_check(&planar).unwrap_err(), Error::UnsupportedDimension(2));
        assert!(scaled_self_energy(&dipole(), 0.6).is_err());
    }

    #[test]
    fn tangent_spheres_minimize_self_energy() {
        let half = scaled_self_energy(&dipole(), 0.5).unwrap();
        let quarter = scaled_self_energy(&dipole(), 0.25).unwrap();
        assert_eq!(half, 4.0);
        assert!(quarter > half);
    }
}
