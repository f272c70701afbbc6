//! Kernel conventions and radial interaction laws.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Newtonian kernel for R^d.
///
/// Unnormalized (the default): `r^(2-d)` for d >= 3 and `-ln r` for d = 2.
/// Normalized: the fundamental solution of the Laplacian,
/// `r^(2-d) / ((2-d) w_{d-1})` for d >= 3 (note the negative sign) and
/// `(1/2pi) ln(1/r)` for d = 2.
///
/// The planar field intensity is sometimes quoted as `-1/(pi z)`, which is
/// twice the derivative of `(1/2pi) ln(1/|z|)`. Both conventions are
/// reachable here through `normalized`; this crate does not pick one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KernelSpec {
    pub dimension: usize,
    pub normalized: bool,
}

impl KernelSpec {
    pub fn new(dimension: usize, normalized: bool) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        Ok(Self {
            dimension,
            normalized,
        })
    }

    pub fn unnormalized(dimension: usize) -> Result<Self> {
        Self::new(dimension, false)
    }

    pub fn is_logarithmic(&self) -> bool {
        self.dimension == 2
    }

    /// Constant multiplying the bare kernel.
    pub fn prefactor(&self) -> f64 {
        if !self.normalized {
            return 1.0;
        }
        if self.dimension == 2 {
            1.0 / (2.0 * PI)
        } else {
            let d = self.dimension as f64;
            1.0 / ((2.0 - d) * unit_sphere_area(self.dimension))
        }
    }

    /// Kernel value and its first two radial derivatives at r > 0.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        let c = self.prefactor();
        if self.dimension == 2 {
            (-c * r.ln(), -c / r, c / (r * r))
        } else {
            let p = 2.0 - self.dimension as f64;
            let rp = r.powf(p);
            (c * rp, c * p * rp / r, c * p * (p - 1.0) * rp / (r * r))
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.radial(r).0
    }

    /// The matching pairwise law (without the normalization constant).
    pub fn law(&self) -> InteractionLaw {
        InteractionLaw::newtonian(self.dimension)
    }
}

/// Surface area of the unit sphere in R^d, `2 pi^(d/2) / Gamma(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    // Gamma(d/2) through the half-integer recurrence.
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LawLabel {
    Log,
    Riesz { k: f64 },
    Custom { name: String },
}

/// Radial pairwise law `Phi(r)` with analytic derivative(s).
#[derive(Clone)]
pub struct InteractionLaw {
    label: LawLabel,
    phi: RadialFn,
    dphi: RadialFn,
    d2phi: Option<RadialFn>,
}

impl fmt::Debug for InteractionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InteractionLaw")
            .field("label", &self.label)
            .field("has_second_derivative", &self.d2phi.is_some())
            .finish()
    }
}

impl InteractionLaw {
    /// `Phi(r) = -ln r`.
    pub fn log() -> Self {
        Self {
            label: LawLabel::Log,
            phi: Arc::new(|r: f64| -r.ln()),
            dphi: Arc::new(|r: f64| -1.0 / r),
            d2phi: Some(Arc::new(|r: f64| 1.0 / (r * r))),
        }
    }

    /// `Phi(r) = r^(-k)`, k > 0.
    pub fn riesz(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!("riesz exponent must be > 0, got {k}")));
        }
        Ok(Self {
            label: LawLabel::Riesz { k },
            phi: Arc::new(move |r: f64| r.powf(-k)),
            dphi: Arc::new(move |r: f64| -k * r.powf(-k - 1.0)),
            d2phi: Some(Arc::new(move |r: f64| k * (k + 1.0) * r.powf(-k - 2.0))),
        })
    }

    /// The Coulomb law of R^d: log for d = 2, `r^(2-d)` otherwise.
    pub fn newtonian(dimension: usize) -> Self {
        if dimension <= 2 {
            Self::log()
        } else {
            Self::riesz(dimension as f64 - 2.0).expect("positive exponent")
        }
    }

    /// User-supplied law. Without `d2phi`, solvers fall back to finite
    /// differences for Jacobians.
    pub fn custom<P, D>(
        name: impl Into<String>,
        phi: P,
        dphi: D,
        d2phi: Option<RadialFn>,
    ) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: LawLabel::Custom { name: name.into() },
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
            d2phi,
        }
    }

    pub fn label(&self) -> &LawLabel {
        &self.label
    }

    pub fn phi(&self, r: f64) -> f64 {
        (self.phi)(r)
    }

    pub fn dphi(&self, r: f64) -> f64 {
        (self.dphi)(r)
    }

    pub fn d2phi(&self, r: f64) -> Option<f64> {
        self.d2phi.as_ref().map(|f| f(r))
    }

    pub fn has_second_derivative(&self) -> bool {
        self.d2phi.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn kernel_conventions() {
        let k3 = KernelSpec::unnormalized(3).unwrap();
        assert_eq!(k3.value(2.0), 0.5);
        let k2 = KernelSpec::unnormalized(2).unwrap();
        assert!((k2.value(std::f64::consts::E) + 1.0).abs() < 1e-15);
        let n3 = KernelSpec::new(3, true).unwrap();
        assert!((n3.value(1.0) + 1.0 / (4.0 * PI)).abs() < 1e-16);
        let n2 = KernelSpec::new(2, true).unwrap();
        assert!((n2.value(std::f64::consts::E) + 1.0 / (2.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn radial_derivatives_match_differences() {
        for d in 2..6 {
            for normalized in [false, true] {
                let k = KernelSpec::new(d, normalized).unwrap();
                let r = 0.7;
                let h = 1e-5;
                let (_, d1, d2) = k.radial(r);
                let fd1 = (k.value(r + h) - k.value(r - h)) / (2.0 * h);
                let fd2 = (k.radial(r + h).1 - k.radial(r - h).1) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-8 * d1.abs().max(1.0));
                assert!((d2 - fd2).abs() < 1e-7 * d2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn laws() {
        let log = InteractionLaw::log();
        assert_eq!(log.phi(1.0), 0.0);
        assert_eq!(log.dphi(2.0), -0.5);
        let r = InteractionLaw::riesz(1.0).unwrap();
        assert_eq!(r.phi(2.0), 0.5);
        assert_eq!(r.dphi(2.0), -0.25);
        assert_eq!(r.d2phi(1.0), Some(2.0));
        assert!(InteractionLaw::riesz(0.0).is_err());
        assert_eq!(InteractionLaw::newtonian(4).label(), &LawLabel::Riesz { k: 2.0 });
        let c = InteractionLaw::custom("yukawa", |r: f64| (-r).exp() / r, |r: f64| -(-r).exp() * (1.0 + r) / (r * r), None);
        assert!(!c.has_second_derivative());
        assert!(c.d2phi(1.0).is_none());
    }
}
