//! Convex billiard tables given implicitly by `Φ(x) = 0`.
//!
//! The built-in family is the ellipsoid `Σ x_i²/a_i² − 1` with an optional
//! smooth cubic perturbation `ε Σ c_i x_i³ / (1 + |x|²)` that breaks the
//! integrability of the quadric. The interior is `{Φ < 0}` and contains the
//! origin. All absolute tolerances are relative to [`ConvexTable::scale`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::FinslerMetric;
use crate::vector::{Covector, Vector};

const PROJECTION_MAX_ITER: usize = 100;
/// Required accuracy of a boundary point, relative to the table scale.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub eps: f64,
    pub coeffs: Vec<f64>,
}

/// Serialized table description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableSpec {
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perturbation: Option<Perturbation>,
    },
}

impl TableSpec {
    pub fn build(&self) -> Result<ConvexTable> {
        match self {
            TableSpec::Ellipsoid {
                semi_axes,
                perturbation,
            } => ConvexTable::ellipsoid(semi_axes.clone(), perturbation.clone()),
        }
    }
}

/// A smooth strictly convex table `{Φ ≤ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexTable {
    inv_sq_axes: Vec<f64>,
    perturbation: Option<Perturbation>,
    bounding_radius: f64,
    spec: TableSpec,
}

impl ConvexTable {
    pub fn ellipsoid(semi_axes: Vec<f64>, perturbation: Option<Perturbation>) -> Result<Self> {
        if semi_axes.len() < 2 {
            return Err(Error::InvalidParameters(
                "a table needs at least two semi-axes".into(),
            ));
        }
        if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidParameters(
                "semi-axes must be positive and finite".into(),
            ));
        }
        let max_axis = semi_axes.iter().cloned().fold(0.0, f64::max);
        let mut bounding_radius = max_axis;
        if let Some(p) = &perturbation {
            if p.coeffs.len() != semi_axes.len() {
                return Err(Error::DimensionMismatch {
                    expected: semi_axes.len(),
                    got: p.coeffs.len(),
                });
            }
            if !p.eps.is_finite() || p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameters(
                    "perturbation must be finite".into(),
                ));
            }
            let c_sum: f64 = p.coeffs.iter().map(|c| c.abs()).sum();
            let spread = p.eps.abs() * c_sum * max_axis;
            // Φ > 0 on |x| = A(1 + s): the quadric part is at least 2s and
            // the perturbation at most s(1 + s), so any s < 1 works.
            if spread >= 0.5 {
                return Err(Error::InvalidParameters(format!(
                    "perturbation too large (eps·Σ|c|·max_axis = {spread})"
                )));
            }
            bounding_radius = max_axis * (1.0 + spread);
        }
        let spec = TableSpec::Ellipsoid {
            semi_axes: semi_axes.clone(),
            perturbation: perturbation.clone(),
        };
        Ok(Self {
            inv_sq_axes: semi_axes.iter().map(|a| 1.0 / (a * a)).collect(),
            perturbation: perturbation.filter(|p| p.eps != 0.0),
            bounding_radius,
            spec,
        })
    }

    /// Round sphere of radius `radius` in `dim` dimensions.
    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        Self::ellipsoid(vec![radius; dim], None)
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.inv_sq_axes.len()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Length scale for every tolerance in the crate.
    pub fn scale(&self) -> f64 {
        self.bounding_radius
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbation.is_some()
    }

    /// A point strictly inside the table; used as the winding center.
    pub fn interior_point(&self) -> Vector {
        Vector::zeros(self.dim())
    }

    pub fn implicit(&self, x: &Vector) -> f64 {
        let quad: f64 = x
            .iter()
            .zip(&self.inv_sq_axes)
            .map(|(xi, w)| xi * xi * w)
            .sum::<f64>()
            - 1.0;
        match &self.perturbation {
            None => quad,
            Some(p) => {
                let r2 = x.dot(x);
                let cubic: f64 = x.iter().zip(&p.coeffs).map(|(xi, c)| c * xi * xi * xi).sum();
                quad + p.eps * cubic / (1.0 + r2)
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Covector {
        let mut g: Vec<f64> = x
            .iter()
            .zip(&self.inv_sq_axes)
            .map(|(xi, w)| 2.0 * xi * w)
            .collect();
        if let Some(p) = &self.perturbation {
            let r2 = x.dot(x);
            let denom = 1.0 + r2;
            let cubic: f64 = x.iter().zip(&p.coeffs).map(|(xi, c)| c * xi * xi * xi).sum();
            for (j, gj) in g.iter_mut().enumerate() {
                let xj = x[j];
                *gj += p.eps
                    * (3.0 * p.coeffs[j] * xj * xj * denom - 2.0 * cubic * xj)
                    / (denom * denom);
            }
        }
        Covector::new(g)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.implicit(x) <= 0.0
    }

    /// Wraps an exact boundary position, checking the boundary tolerance.
    pub fn boundary_point(&self, position: Vector) -> Result<BoundaryPoint> {
        self.check_dim(&position)?;
        let phi = self.implicit(&position);
        if phi.abs() > BOUNDARY_TOL * self.scale() {
            return Err(Error::InvalidParameters(format!(
                "point is off the boundary (Φ = {phi:e})"
            )));
        }
        Ok(self.make_boundary_point(position))
    }

    fn make_boundary_point(&self, position: Vector) -> BoundaryPoint {
        let g = self.gradient(&position).sharp();
        let n = g.norm();
        BoundaryPoint {
            outward_normal: g.scaled(1.0 / n),
            position,
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Newton retraction onto `{Φ = 0}` following the gradient direction,
    /// with the step length capped at half the bounding radius.
    pub fn project_to_boundary(&self, x: &Vector) -> Result<BoundaryPoint> {
        self.check_dim(x)?;
        if !x.is_finite() {
            return Err(Error::InvalidParameters("non-finite point".into()));
        }
        let scale = self.scale();
        let max_step = 0.5 * self.bounding_radius;
        let mut p = x.clone();
        let mut phi = self.implicit(&p);
        for _ in 0..PROJECTION_MAX_ITER {
            let g = self.gradient(&p).sharp();
            let g2 = g.dot(&g);
            if g2 == 0.0 || !g2.is_finite() {
                return Err(Error::NoConvergence("boundary projection"));
            }
            let mut step = g.scaled(-phi / g2);
            let len = step.norm();
            if len > max_step {
                step = step.scaled(max_step / len);
            }
            p += &step;
            let next = self.implicit(&p);
            // Stop once the residual is at rounding level or has stalled.
            if next.abs() <= BOUNDARY_TOL * scale
                && (next.abs() <= 1e-15 * scale || next.abs() >= 0.5 * phi.abs())
            {
                phi = next;
                break;
            }
            phi = next;
        }
        if phi.abs() > BOUNDARY_TOL * scale {
            return Err(Error::NoConvergence("boundary projection"));
        }
        Ok(self.make_boundary_point(p))
    }

    /// The boundary point on the ray from the interior point in direction `u`.
    pub fn radial_point(&self, u: &Vector) -> Result<BoundaryPoint> {
        self.check_dim(u)?;
        let n = u.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let dir = u.scaled(1.0 / n);
        let c = self.interior_point();
        let at = |t: f64| c.axpy(t, &dir);
        let (mut lo, mut hi) = (0.0, 1.01 * self.bounding_radius);
        if self.implicit(&at(hi)) <= 0.0 {
            return Err(Error::NoConvergence("radial boundary search"));
        }
        while hi - lo > 1e-6 * self.scale() {
            let mid = 0.5 * (lo + hi);
            if self.implicit(&at(mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..8 {
            let p = at(t);
            let phi = self.implicit(&p);
            let slope = self.gradient(&p).pair(&dir);
            if phi.abs() <= 1e-15 * self.scale() || slope <= 0.0 {
                break;
            }
            t -= phi / slope;
        }
        self.boundary_point(at(t))
    }

    /// Uniformly distributed direction, mapped radially onto the boundary.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> BoundaryPoint {
        loop {
            let u = Vector::new(
                (0..self.dim())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            if u.norm() > 1e-6 {
                if let Ok(p) = self.radial_point(&u) {
                    return p;
                }
            }
        }
    }

    /// Largest `Φ` at midpoints of `n_pairs` random boundary chords.
    /// Non-positive (up to rounding) for a convex table.
    pub fn convexity_defect<R: Rng + ?Sized>(&self, n_pairs: usize, rng: &mut R) -> f64 {
        (0..n_pairs)
            .map(|_| {
                let a = self.sample_boundary(rng);
                let b = self.sample_boundary(rng);
                let mid = (&a.position + &b.position).scaled(0.5);
                self.implicit(&mid)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A point of the table boundary together with its Euclidean unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub position: Vector,
    pub outward_normal: Vector,
}

impl BoundaryPoint {
    pub fn dim(&self) -> usize {
        self.position.dim()
    }

    /// Orthonormal basis of the tangent hyperplane, see [`orthonormal_complement`].
    pub fn tangent_basis(&self) -> Vec<Vector> {
        orthonormal_complement(&self.outward_normal)
    }

    /// Euclidean tangential projection of `w`.
    pub fn tangential(&self, w: &Vector) -> Vector {
        w.axpy(-self.outward_normal.dot(w), &self.outward_normal)
    }
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `n`:
/// the coordinate axes without the one most aligned with `n`,
/// Gram–Schmidt orthogonalized against `n` and each other in axis order.
pub fn orthonormal_complement(n: &Vector) -> Vec<Vector> {
    let d = n.dim();
    let pivot = (0..d)
        .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut basis: Vec<Vector> = Vec::with_capacity(d.saturating_sub(1));
    for k in (0..d).filter(|&k| k != pivot) {
        let mut w = Vector::axis(d, k);
        // two passes for numerical orthogonality
        for _ in 0..2 {
            w = w.axpy(-n.dot(&w), n);
            for b in &basis {
                w = w.axpy(-b.dot(&w), b);
            }
        }
        let len = w.norm();
        basis.push(w.scaled(1.0 / len));
    }
    basis
}

/// Unit covector (dual norm 1) vanishing on the tangent hyperplane at `y`
/// and positive on outward vectors.
pub fn conormal<M: FinslerMetric + ?Sized>(metric: &M, y: &BoundaryPoint) -> Result<Covector> {
    let n = y.outward_normal.flat();
    let norm = metric.dual_norm(&y.position, &n)?;
    Ok(n.scaled(1.0 / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Euclidean, Metric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    fn perturbed() -> ConvexTable {
        ConvexTable::ellipsoid(
            vec![1.0, 1.3, 1.7],
            Some(Perturbation {
                eps: 0.02,
                coeffs: vec![1.0, -0.8, 0.6],
            }),
        )
        .unwrap()
    }

    #[test]
    fn projection_examples() {
        let sphere = ConvexTable::sphere(3, 1.0).unwrap();
        let p = sphere.project_to_boundary(&v(&[2.0, 0.0, 0.0])).unwrap();
        assert!(p.position.distance(&v(&[1.0, 0.0, 0.0])) < 1e-12);
        let p = sphere.project_to_boundary(&v(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.position, v(&[1.0, 0.0, 0.0]));
        let ell = ConvexTable::ellipsoid(vec![2.0, 1.0, 1.0], None).unwrap();
        let p = ell.project_to_boundary(&v(&[3.0, 0.0, 0.0])).unwrap();
        assert!(p.position.distance(&v(&[2.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn projection_fails_at_critical_point_of_phi() {
        let sphere = ConvexTable::sphere(3, 1.0).unwrap();
        assert!(matches!(
            sphere.project_to_boundary(&v(&[0.0, 0.0, 0.0])),
            Err(Error::NoConvergence(_))
        ));
    }

    #[test]
    fn projection_is_idempotent_and_accurate() {
        let t = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = Vector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
            if x.norm() < 0.2 {
                continue;
            }
            let p = t.project_to_boundary(&x).unwrap();
            assert!(t.implicit(&p.position).abs() <= 1e-10 * t.scale());
            let q = t.project_to_boundary(&p.position).unwrap();
            assert!(p.position.distance(&q.position) <= 1e-9);
        }
    }

    #[test]
    fn tangent_basis_examples() {
        let y = BoundaryPoint {
            position: v(&[0.0, 0.0, 1.0]),
            outward_normal: v(&[0.0, 0.0, 1.0]),
        };
        assert_eq!(y.tangent_basis(), vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]);
        let y = BoundaryPoint {
            position: v(&[1.0, 0.0, 0.0]),
            outward_normal: v(&[1.0, 0.0, 0.0]),
        };
        assert_eq!(y.tangent_basis(), vec![v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])]);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let t = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let y = t.sample_boundary(&mut rng);
            let b = y.tangent_basis();
            assert_eq!(b.len(), 2);
            for (i, bi) in b.iter().enumerate() {
                assert!(bi.dot(&y.outward_normal).abs() < 1e-12);
                for (j, bj) in b.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((bi.dot(bj) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = perturbed();
        let x = v(&[0.3, -0.7, 1.1]);
        let g = t.gradient(&x);
        for k in 0..3 {
            let h = 1e-6;
            let e = Vector::axis(3, k);
            let fd = (t.implicit(&x.axpy(h, &e)) - t.implicit(&x.axpy(-h, &e))) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn perturbed_ellipsoid_passes_convexity_sampling() {
        let t = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(t.convexity_defect(10_000, &mut rng) <= 1e-9);
    }

    #[test]
    fn bounding_radius_encloses_boundary() {
        let t = perturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let y = t.sample_boundary(&mut rng);
            assert!(y.position.norm() < t.bounding_radius());
        }
    }

    #[test]
    fn euclidean_conormal_is_the_normal() {
        let sphere = ConvexTable::sphere(3, 1.0).unwrap();
        let y = sphere.boundary_point(v(&[0.0, 0.0, 1.0])).unwrap();
        let p = conormal(&Euclidean, &y).unwrap();
        assert_eq!(p, Covector::new(vec![0.0, 0.0, 1.0]));
    }

    #[test]
    fn conormal_annihilates_tangent_space() {
        let t = perturbed();
        let metric = Metric::minkowski(vec![0.2, -0.1, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let y = t.sample_boundary(&mut rng);
            let p = conormal(&metric, &y).unwrap();
            for w in y.tangent_basis() {
                assert!(p.pair(&w).abs() <= 1e-10);
            }
            assert!(p.pair(&y.outward_normal) > 0.0);
            assert!((metric.dual_norm(&y.position, &p).unwrap() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn minkowski_conormal_on_circle() {
        let circle = ConvexTable::sphere(2, 1.0).unwrap();
        let metric = Metric::minkowski(vec![0.5, 0.0]).unwrap();
        let y = circle.boundary_point(v(&[1.0, 0.0])).unwrap();
        let p = conormal(&metric, &y).unwrap();
        assert!(p[0] > 0.0 && p[1] == 0.0);
        // sup of p over a dense sample of the indicatrix |v| + 0.5 v1 = 1;
        // sampling only bounds the sup from below
        let n = 200_000;
        let sup = (0..n)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / n as f64;
                let (s, c) = th.sin_cos();
                p[0] * c / (1.0 + 0.5 * c) + p[1] * s / (1.0 + 0.5 * c)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(sup <= 1.0 + 1e-12 && sup > 1.0 - 1e-8);
    }

    #[test]
    fn table_spec_json_round_trip() {
        let json = r#"{"kind":"ellipsoid","semi_axes":[1.0,1.3,1.7],"perturbation":{"eps":0.02,"coeffs":[1.0,-0.8,0.6]}}"#;
        let spec: TableSpec = serde_json::from_str(json).unwrap();
        let table = spec.build().unwrap();
        assert_eq!(table, perturbed());
        assert_eq!(serde_json::to_string(&spec).unwrap(), json);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(ConvexTable::ellipsoid(vec![1.0], None).is_err());
        assert!(ConvexTable::ellipsoid(vec![1.0, -1.0], None).is_err());
        assert!(ConvexTable::ellipsoid(
            vec![1.0, 1.0],
            Some(Perturbation {
                eps: 0.1,
                coeffs: vec![1.0]
            })
        )
        .is_err());
    }
}
