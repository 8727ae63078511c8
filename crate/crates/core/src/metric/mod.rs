//! Finsler metrics: a positively 1-homogeneous Lagrangian `L(x, v)` per
//! tangent space, with its fiber derivative (the Legendre transform on the
//! indicatrix), the dual norm and the inverse Legendre transform.

mod builtin;
mod dual;

pub use builtin::{
    magnetic_indicatrix_params, Euclidean, LagrangianMetric, Magnetic, Metric, MetricSpec,
    Minkowski, Riemannian,
};
pub use dual::maximize_on_indicatrix;

use crate::error::{Error, Result};
use crate::vector::{Covector, Vector};

/// Tolerance for "on the indicatrix" / "on the figuratrix" preconditions.
pub const UNIT_TOL: f64 = 1e-9;

/// How geodesics of a metric are realized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeodesicModel {
    /// Straight chords with Finsler length `L(x, y − x)`.
    Straight,
    /// Planar constant magnetic field: Larmor circles of radius `1/|field|`,
    /// turning clockwise for positive field.
    Larmor { field: f64 },
    /// Only the Euler–Lagrange integrator is available.
    Integrated,
}

pub trait FinslerMetric: Send + Sync {
    /// Fixed dimension, or `None` when the metric works in any dimension.
    fn dim(&self) -> Option<usize>;

    fn lagrangian(&self, x: &Vector, v: &Vector) -> f64;

    /// `∂L/∂v`; central differences unless overridden.
    fn fiber_derivative(&self, x: &Vector, v: &Vector) -> Covector {
        fd_fiber_derivative(self, x, v)
    }

    fn is_reversible(&self) -> bool;

    fn geodesic_model(&self) -> GeodesicModel {
        GeodesicModel::Integrated
    }

    fn flat_geodesics(&self) -> bool {
        self.geodesic_model() == GeodesicModel::Straight
    }

    /// Dual norm of `q` and the indicatrix point where `q` attains it.
    fn dual_maximizer(&self, x: &Vector, q: &Covector) -> Result<(f64, Vector)> {
        maximize_on_indicatrix(self, x, q)
    }

    /// `v / L(x, v)`.
    fn unit_vector(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        if v.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        let l = self.lagrangian(x, v);
        if !(l > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(v.scaled(1.0 / l))
    }

    /// Legendre transform of an indicatrix vector.
    fn legendre(&self, x: &Vector, u: &Vector) -> Result<Covector> {
        let l = self.lagrangian(x, u);
        if (l - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotOnIndicatrix(l));
        }
        Ok(self.fiber_derivative(x, u))
    }

    fn dual_norm(&self, x: &Vector, q: &Covector) -> Result<f64> {
        Ok(self.dual_maximizer(x, q)?.0)
    }

    /// Inverse Legendre transform of a figuratrix covector.
    fn legendre_dual(&self, x: &Vector, q: &Covector) -> Result<Vector> {
        let (norm, v) = self.dual_maximizer(x, q)?;
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotOnFiguratrix(norm));
        }
        Ok(v)
    }
}

/// Central finite difference of `L` in the fiber, step `1e-6·|v|`.
pub fn fd_fiber_derivative<M: FinslerMetric + ?Sized>(m: &M, x: &Vector, v: &Vector) -> Covector {
    let h = 1e-6 * v.norm().max(f64::MIN_POSITIVE);
    let d = v.dim();
    Covector::new(
        (0..d)
            .map(|k| {
                let e = Vector::axis(d, k);
                (m.lagrangian(x, &v.axpy(h, &e)) - m.lagrangian(x, &v.axpy(-h, &e))) / (2.0 * h)
            })
            .collect(),
    )
}
