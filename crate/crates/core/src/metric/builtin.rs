use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FinslerMetric, GeodesicModel};
use crate::error::{Error, Result};
use crate::table::ConvexTable;
use crate::vector::{Covector, Vector};

/// `L(v) = |v|`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Euclidean;

impl FinslerMetric for Euclidean {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn lagrangian(&self, _x: &Vector, v: &Vector) -> f64 {
        v.norm()
    }

    fn fiber_derivative(&self, _x: &Vector, v: &Vector) -> Covector {
        v.flat().scaled(1.0 / v.norm())
    }

    fn is_reversible(&self) -> bool {
        true
    }

    fn geodesic_model(&self) -> GeodesicModel {
        GeodesicModel::Straight
    }

    fn dual_maximizer(&self, _x: &Vector, q: &Covector) -> Result<(f64, Vector)> {
        let n = q.norm();
        if n == 0.0 {
            return Ok((0.0, Vector::axis(q.dim(), 0)));
        }
        Ok((n, q.sharp().scaled(1.0 / n)))
    }
}

/// Constant positive-definite tensor: `L(v) = sqrt(vᵀ G v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Riemannian {
    tensor: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Riemannian {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameters("tensor must be square".into()));
        }
        let tensor = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        if (&tensor - tensor.transpose()).amax() > 1e-12 * tensor.amax() {
            return Err(Error::InvalidParameters("tensor must be symmetric".into()));
        }
        let chol = tensor
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameters("tensor must be positive definite".into()))?;
        Ok(Self {
            inverse: chol.inverse(),
            tensor,
        })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.tensor
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
        let d = v.len();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += v[i] * m[(i, j)] * v[j];
            }
        }
        s
    }

    fn apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        let d = v.len();
        (0..d)
            .map(|i| (0..d).map(|j| m[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl FinslerMetric for Riemannian {
    fn dim(&self) -> Option<usize> {
        Some(self.tensor.nrows())
    }

    fn lagrangian(&self, _x: &Vector, v: &Vector) -> f64 {
        Self::quad(&self.tensor, v.as_slice()).max(0.0).sqrt()
    }

    fn fiber_derivative(&self, x: &Vector, v: &Vector) -> Covector {
        let l = self.lagrangian(x, v);
        Covector::new(Self::apply(&self.tensor, v.as_slice())).scaled(1.0 / l)
    }

    fn is_reversible(&self) -> bool {
        true
    }

    fn geodesic_model(&self) -> GeodesicModel {
        GeodesicModel::Straight
    }

    fn dual_maximizer(&self, _x: &Vector, q: &Covector) -> Result<(f64, Vector)> {
        let n = Self::quad(&self.inverse, q.as_slice()).max(0.0).sqrt();
        if n == 0.0 {
            let e = Vector::axis(q.dim(), 0);
            let l = self.lagrangian(&e, &e);
            return Ok((0.0, e.scaled(1.0 / l)));
        }
        Ok((n, Vector::new(Self::apply(&self.inverse, q.as_slice())).scaled(1.0 / n)))
    }
}

/// Euclidean norm plus a constant one-form: `L(v) = |v| + α·v`, `|α| < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Minkowski {
    alpha: Covector,
}

impl Minkowski {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let alpha = Covector::new(alpha);
        if !alpha.is_finite() || alpha.dim() < 2 {
            return Err(Error::InvalidParameters("alpha must be finite, dim ≥ 2".into()));
        }
        if alpha.norm() >= 1.0 {
            return Err(Error::FieldTooStrong(alpha.norm()));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &Covector {
        &self.alpha
    }
}

impl FinslerMetric for Minkowski {
    fn dim(&self) -> Option<usize> {
        Some(self.alpha.dim())
    }

    fn lagrangian(&self, _x: &Vector, v: &Vector) -> f64 {
        v.norm() + self.alpha.pair(v)
    }

    fn fiber_derivative(&self, _x: &Vector, v: &Vector) -> Covector {
        v.flat().scaled(1.0 / v.norm()) + self.alpha.clone()
    }

    fn is_reversible(&self) -> bool {
        self.alpha.norm() == 0.0
    }

    fn geodesic_model(&self) -> GeodesicModel {
        GeodesicModel::Straight
    }
}

/// Planar constant magnetic field `B`: `L(x, v) = |v| + α(x)(v)` with the
/// symmetric gauge `α = (B/2)(x dy − y dx)`, so `dα = B dx∧dy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Magnetic {
    field: f64,
}

impl Magnetic {
    pub fn new(field: f64) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::InvalidParameters("field must be finite".into()));
        }
        Ok(Self { field })
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn larmor_radius(&self) -> f64 {
        1.0 / self.field.abs()
    }

    pub fn alpha(&self, x: &Vector) -> Covector {
        let h = 0.5 * self.field;
        Covector::new(vec![-h * x[1], h * x[0]])
    }

    /// Largest `|α(x)|` over `samples` random points inside `table`.
    pub fn field_strength_bound(&self, table: &ConvexTable, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_676e);
        let r = table.bounding_radius();
        let mut sup: f64 = 0.0;
        let mut taken = 0;
        while taken < samples {
            let x = Vector::new(vec![rng.random_range(-r..r), rng.random_range(-r..r)]);
            if table.contains(&x) {
                sup = sup.max(self.alpha(&x).norm());
                taken += 1;
            }
        }
        sup
    }
}

impl FinslerMetric for Magnetic {
    fn dim(&self) -> Option<usize> {
        Some(2)
    }

    fn lagrangian(&self, x: &Vector, v: &Vector) -> f64 {
        v.norm() + self.alpha(x).pair(v)
    }

    fn fiber_derivative(&self, x: &Vector, v: &Vector) -> Covector {
        v.flat().scaled(1.0 / v.norm()) + self.alpha(x)
    }

    fn is_reversible(&self) -> bool {
        self.field == 0.0
    }

    fn geodesic_model(&self) -> GeodesicModel {
        if self.field == 0.0 {
            GeodesicModel::Straight
        } else {
            GeodesicModel::Larmor { field: self.field }
        }
    }
}

type LagrangianFn = dyn Fn(&Vector, &Vector) -> f64 + Send + Sync;

/// A user-supplied Lagrangian; fiber derivatives by finite differences.
pub struct LagrangianMetric {
    lagrangian: Box<LagrangianFn>,
    dim: Option<usize>,
    reversible: bool,
    flat: bool,
}

impl LagrangianMetric {
    pub fn new<F>(lagrangian: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        Self {
            lagrangian: Box::new(lagrangian),
            dim: None,
            reversible: false,
            flat: false,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn reversible(mut self, reversible: bool) -> Self {
        self.reversible = reversible;
        self
    }

    /// Declares the Lagrangian translation invariant, so geodesics are chords.
    pub fn translation_invariant(mut self, flat: bool) -> Self {
        self.flat = flat;
        self
    }
}

impl fmt::Debug for LagrangianMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianMetric")
            .field("dim", &self.dim)
            .field("reversible", &self.reversible)
            .field("flat", &self.flat)
            .finish_non_exhaustive()
    }
}

impl FinslerMetric for LagrangianMetric {
    fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn lagrangian(&self, x: &Vector, v: &Vector) -> f64 {
        (self.lagrangian)(x, v)
    }

    fn is_reversible(&self) -> bool {
        self.reversible
    }

    fn geodesic_model(&self) -> GeodesicModel {
        if self.flat {
            GeodesicModel::Straight
        } else {
            GeodesicModel::Integrated
        }
    }
}

/// Serialized metric description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean,
    Riemannian { tensor: Vec<Vec<f64>> },
    Minkowski { alpha: Vec<f64> },
    Magnetic { field: f64 },
}

/// The built-in metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricSpec", into = "MetricSpec")]
pub enum Metric {
    Euclidean(Euclidean),
    Riemannian(Riemannian),
    Minkowski(Minkowski),
    Magnetic(Magnetic),
}

impl Metric {
    pub fn euclidean() -> Self {
        Metric::Euclidean(Euclidean)
    }

    pub fn riemannian(rows: Vec<Vec<f64>>) -> Result<Self> {
        Riemannian::new(rows).map(Metric::Riemannian)
    }

    pub fn minkowski(alpha: Vec<f64>) -> Result<Self> {
        Minkowski::new(alpha).map(Metric::Minkowski)
    }

    pub fn magnetic(field: f64) -> Result<Self> {
        Magnetic::new(field).map(Metric::Magnetic)
    }

    pub fn from_spec(spec: MetricSpec) -> Result<Self> {
        match spec {
            MetricSpec::Euclidean => Ok(Self::euclidean()),
            MetricSpec::Riemannian { tensor } => Self::riemannian(tensor),
            MetricSpec::Minkowski { alpha } => Self::minkowski(alpha),
            MetricSpec::Magnetic { field } => Self::magnetic(field),
        }
    }

    pub fn spec(&self) -> MetricSpec {
        match self {
            Metric::Euclidean(_) => MetricSpec::Euclidean,
            Metric::Riemannian(r) => MetricSpec::Riemannian { tensor: r.rows() },
            Metric::Minkowski(m) => MetricSpec::Minkowski {
                alpha: m.alpha().as_slice().to_vec(),
            },
            Metric::Magnetic(m) => MetricSpec::Magnetic { field: m.field() },
        }
    }

    /// Checks dimensions against `table` and, for magnetic metrics, that the
    /// field stays weak (`|α| < 1`) on 10⁴ sampled table points.
    pub fn validate_on(&self, table: &ConvexTable) -> Result<()> {
        if let Some(d) = self.dim() {
            if d != table.dim() {
                return Err(Error::DimensionMismatch {
                    expected: table.dim(),
                    got: d,
                });
            }
        }
        if let Metric::Magnetic(m) = self {
            let bound = m.field_strength_bound(table, 10_000);
            if bound >= 1.0 {
                return Err(Error::FieldTooStrong(bound));
            }
        }
        Ok(())
    }

    fn inner(&self) -> &dyn FinslerMetric {
        match self {
            Metric::Euclidean(m) => m,
            Metric::Riemannian(m) => m,
            Metric::Minkowski(m) => m,
            Metric::Magnetic(m) => m,
        }
    }
}

impl TryFrom<MetricSpec> for Metric {
    type Error = Error;
    fn try_from(spec: MetricSpec) -> Result<Self> {
        Metric::from_spec(spec)
    }
}

impl From<Metric> for MetricSpec {
    fn from(m: Metric) -> Self {
        m.spec()
    }
}

impl FinslerMetric for Metric {
    fn dim(&self) -> Option<usize> {
        self.inner().dim()
    }

    fn lagrangian(&self, x: &Vector, v: &Vector) -> f64 {
        self.inner().lagrangian(x, v)
    }

    fn fiber_derivative(&self, x: &Vector, v: &Vector) -> Covector {
        self.inner().fiber_derivative(x, v)
    }

    fn is_reversible(&self) -> bool {
        self.inner().is_reversible()
    }

    fn geodesic_model(&self) -> GeodesicModel {
        self.inner().geodesic_model()
    }

    fn dual_maximizer(&self, x: &Vector, q: &Covector) -> Result<(f64, Vector)> {
        self.inner().dual_maximizer(x, q)
    }
}

/// Indicatrix ellipse of `|v| + t·v₁`: semi-major `a`, semi-minor `b` and
/// center offset `c` (the ellipse is `((v₁+c)/a)² + (v₂/b)² = 1`, with a
/// focus at the origin).
pub fn magnetic_indicatrix_params(t: f64) -> Result<(f64, f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameters(format!("field strength {t} must be ≥ 0")));
    }
    if t >= 1.0 {
        return Err(Error::FieldTooStrong(t));
    }
    let k = 1.0 - t * t;
    Ok((1.0 / k, 1.0 / k.sqrt(), t / k))
}
