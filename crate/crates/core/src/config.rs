//! Domain types: points, charges, validated configurations, component partitions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative coincidence tolerance, scaled by the configuration diameter.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// A point in R^d.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SpacePoint(Vec<f64>);

impl SpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<[f64; 3]> for SpacePoint {
    fn from(c: [f64; 3]) -> Self {
        Self(c.to_vec())
    }
}

impl From<[f64; 2]> for SpacePoint {
    fn from(c: [f64; 2]) -> Self {
        Self(c.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCharge {
    pub position: SpacePoint,
    pub q: f64,
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Validated set of point charges in R^d, d >= 2.
///
/// Positions are pairwise distinct (relative to [`COINCIDENCE_TOL`]) and every
/// charge is finite and nonzero. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeConfiguration {
    dimension: usize,
    charges: Vec<PointCharge>,
    #[serde(skip)]
    diameter: f64,
}

impl ChargeConfiguration {
    /// Builds and validates a configuration from `(coords, q)` entries.
    pub fn new(dimension: usize, entries: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if entries.is_empty() {
            return Err(Error::InvalidInput("configuration has no charges".into()));
        }
        let mut charges = Vec::with_capacity(entries.len());
        for (index, (coords, q)) in entries.into_iter().enumerate() {
            if coords.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: coords.len(),
                });
            }
            if !q.is_finite() {
                return Err(Error::InvalidInput(format!("charge {index} is not finite")));
            }
            if q == 0.0 {
                return Err(Error::ZeroCharge { index });
            }
            charges.push(PointCharge {
                position: SpacePoint::new(coords)?,
                q,
            });
        }

        let mut diameter: f64 = 0.0;
        for i in 0..charges.len() {
            for j in (i + 1)..charges.len() {
                let r = distance(charges[i].position.coords(), charges[j].position.coords());
                diameter = diameter.max(r);
            }
        }
        let tol = coincidence_threshold(diameter);
        for i in 0..charges.len() {
            for j in (i + 1)..charges.len() {
                let r = distance(charges[i].position.coords(), charges[j].position.coords());
                if r <= tol {
                    return Err(Error::DuplicatePosition {
                        first: i,
                        second: j,
                        distance: r,
                    });
                }
            }
        }

        Ok(Self {
            dimension,
            charges,
            diameter,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn charges(&self) -> &[PointCharge] {
        &self.charges
    }

    pub fn position(&self, i: usize) -> &[f64] {
        self.charges[i].position.coords()
    }

    pub fn q(&self, i: usize) -> f64 {
        self.charges[i].q
    }

    pub fn charge_values(&self) -> Vec<f64> {
        self.charges.iter().map(|c| c.q).collect()
    }

    pub fn total_charge(&self) -> f64 {
        self.charges.iter().map(|c| c.q).sum()
    }

    /// Largest pairwise distance (0 for a single charge).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Length scale used for relative tolerances: the diameter, or 1 for a
    /// single charge.
    pub fn length_scale(&self) -> f64 {
        if self.diameter > 0.0 {
            self.diameter
        } else {
            1.0
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut c = vec![0.0; self.dimension];
        for ch in &self.charges {
            for (ci, xi) in c.iter_mut().zip(ch.position.coords()) {
                *ci += xi / n;
            }
        }
        c
    }

    /// Same positions, new charge values.
    pub fn with_charges(&self, q: &[f64]) -> Result<Self> {
        if q.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} charges, got {}",
                self.len(),
                q.len()
            )));
        }
        let entries = self
            .charges
            .iter()
            .zip(q)
            .map(|(c, &q)| (c.position.coords().to_vec(), q))
            .collect();
        Self::new(self.dimension, entries)
    }

    /// Applies `f` to every position (rigid motions, dilations, ...).
    pub fn map_positions<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let entries = self
            .charges
            .iter()
            .map(|c| (f(c.position.coords()), c.q))
            .collect();
        Self::new(self.dimension, entries)
    }

    /// Index of a charge within the coincidence tolerance of `x`, if any.
    pub fn charge_near(&self, x: &[f64]) -> Option<usize> {
        let tol = coincidence_threshold(self.diameter);
        self.charges
            .iter()
            .position(|c| distance(c.position.coords(), x) <= tol)
    }
}

/// Absolute coincidence threshold for a set of the given diameter.
pub fn coincidence_threshold(diameter: f64) -> f64 {
    if diameter > 0.0 {
        COINCIDENCE_TOL * diameter
    } else {
        COINCIDENCE_TOL
    }
}

/// Validated constructor for [`ChargeConfiguration`].
pub fn build_configuration(
    dimension: usize,
    entries: Vec<(Vec<f64>, f64)>,
) -> Result<ChargeConfiguration> {
    ChargeConfiguration::new(dimension, entries)
}

/// Symmetric matrix of pairwise distances with zero diagonal.
pub fn pairwise_distance_matrix(cfg: &ChargeConfiguration) -> DMatrix<f64> {
    let n = cfg.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = distance(cfg.position(i), cfg.position(j));
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    m
}

/// Disjoint finite point sets with prescribed total charges.
///
/// A component with a single point is a "singleton": the constrained
/// equilibrium asks for a vanishing field there instead of a constant
/// potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentPartition {
    dimension: usize,
    components: Vec<Vec<SpacePoint>>,
    target_charges: Vec<f64>,
}

impl ComponentPartition {
    pub fn new(
        dimension: usize,
        components: Vec<Vec<Vec<f64>>>,
        target_charges: Vec<f64>,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if components.is_empty() || components.len() != target_charges.len() {
            return Err(Error::InvalidInput(
                "need one target charge per nonempty component list".into(),
            ));
        }
        if let Some(bad) = target_charges.iter().position(|q| !q.is_finite()) {
            return Err(Error::InvalidInput(format!("target charge {bad} is not finite")));
        }
        let mut comps = Vec::with_capacity(components.len());
        for (j, comp) in components.into_iter().enumerate() {
            if comp.is_empty() {
                return Err(Error::InvalidInput(format!("component {j} is empty")));
            }
            let mut pts = Vec::with_capacity(comp.len());
            for c in comp {
                if c.len() != dimension {
                    return Err(Error::DimensionMismatch {
                        expected: dimension,
                        found: c.len(),
                    });
                }
                pts.push(SpacePoint::new(c)?);
            }
            comps.push(pts);
        }

        let all: Vec<&[f64]> = comps.iter().flatten().map(|p| p.coords()).collect();
        let mut diameter: f64 = 0.0;
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                diameter = diameter.max(distance(all[i], all[j]));
            }
        }
        let tol = coincidence_threshold(diameter);
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                let r = distance(all[i], all[j]);
                if r <= tol {
                    return Err(Error::DuplicatePosition {
                        first: i,
                        second: j,
                        distance: r,
                    });
                }
            }
        }

        Ok(Self {
            dimension,
            components: comps,
            target_charges,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Vec<SpacePoint>] {
        &self.components
    }

    pub fn target_charges(&self) -> &[f64] {
        &self.target_charges
    }

    pub fn total_charge(&self) -> f64 {
        self.target_charges.iter().sum()
    }

    pub fn point_count(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }
}
