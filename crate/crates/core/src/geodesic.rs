//! Geodesics and the Finsler distance `f(x, y)`.
//!
//! Flat metrics use straight chords. A planar constant magnetic field uses
//! Larmor arcs of radius `1/|B|`; for `B > 0` they turn clockwise, which is
//! what the Euler–Lagrange equations of `|v| + (B/2)(x dy − y dx)` give.
//! Everything else goes through [`integrate_geodesic`].

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{FinslerMetric, GeodesicModel, UNIT_TOL};
use crate::table::{conormal, BoundaryPoint, ConvexTable};
use crate::vector::{Covector, Vector};

/// Minimum conormal pairing of a departing direction.
pub const GRAZING_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Chord,
    Arc,
    Integrated,
}

/// An oriented geodesic with indicatrix tangents at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub start: Vector,
    pub end: Vector,
    pub start_tangent: Vector,
    pub end_tangent: Vector,
    pub length: f64,
    pub kind: SegmentKind,
}

/// `sin(z)/z`
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0 + z.powi(4) / 120.0
    } else {
        z.sin() / z
    }
}

/// Unit-speed (Euclidean) geodesic through a point, parametrized by
/// Euclidean arclength.
#[derive(Clone, Debug)]
pub(crate) enum Ray {
    Chord { origin: Vector, dir: Vector },
    Arc { origin: Vector, heading: f64, field: f64 },
}

impl Ray {
    pub(crate) fn new(model: GeodesicModel, origin: &Vector, v: &Vector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        match model {
            GeodesicModel::Straight => Ok(Ray::Chord {
                origin: origin.clone(),
                dir: v.scaled(1.0 / n),
            }),
            GeodesicModel::Larmor { field } => Ok(Ray::Arc {
                origin: origin.clone(),
                heading: v[1].atan2(v[0]),
                field,
            }),
            GeodesicModel::Integrated => Err(Error::Unsupported(
                "boundary intersection along integrated geodesics",
            )),
        }
    }

    pub(crate) fn position(&self, s: f64) -> Vector {
        match self {
            Ray::Chord { origin, dir } => origin.axpy(s, dir),
            Ray::Arc {
                origin,
                heading,
                field,
            } => {
                let half = 0.5 * field * s;
                let k = s * sinc(half);
                let th = heading - half;
                Vector::new(vec![origin[0] + k * th.cos(), origin[1] + k * th.sin()])
            }
        }
    }

    /// Euclidean unit tangent.
    pub(crate) fn velocity(&self, s: f64) -> Vector {
        match self {
            Ray::Chord { dir, .. } => dir.clone(),
            Ray::Arc { heading, field, .. } => {
                let th = heading - field * s;
                Vector::new(vec![th.cos(), th.sin()])
            }
        }
    }
}

fn gauss_legendre_32() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(32))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn magnetic_alpha(field: f64, p: &Vector, w: &Vector) -> f64 {
    0.5 * field * (p[0] * w[1] - p[1] * w[0])
}

/// The geodesic from `x` to `y`; its length is the Finsler distance `f(x, y)`.
pub fn connect<M: FinslerMetric + ?Sized>(
    metric: &M,
    x: &Vector,
    y: &Vector,
) -> Result<GeodesicSegment> {
    let chord = y - x;
    let len = chord.norm();
    if len == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    match metric.geodesic_model() {
        GeodesicModel::Straight => {
            let length = metric.lagrangian(x, &chord);
            Ok(GeodesicSegment {
                start: x.clone(),
                end: y.clone(),
                start_tangent: metric.unit_vector(x, &chord)?,
                end_tangent: metric.unit_vector(y, &chord)?,
                length,
                kind: SegmentKind::Chord,
            })
        }
        GeodesicModel::Larmor { field } => {
            let diameter = 2.0 / field.abs();
            if len >= diameter {
                return Err(Error::ChordTooLongForField {
                    chord: len,
                    diameter,
                });
            }
            let half = (0.5 * field * len).asin();
            let arc_len = len / sinc(half);
            let psi = chord[1].atan2(chord[0]);
            let ray = Ray::Arc {
                origin: x.clone(),
                heading: psi + half,
                field,
            };
            let (nodes, weights) = gauss_legendre_32();
            let mid = 0.5 * arc_len;
            let flux: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(z, w)| {
                    let s = mid * (1.0 + z);
                    w * magnetic_alpha(field, &ray.position(s), &ray.velocity(s))
                })
                .sum::<f64>()
                * mid;
            let start_dir = ray.velocity(0.0);
            let end_dir = Vector::new(vec![(psi - half).cos(), (psi - half).sin()]);
            Ok(GeodesicSegment {
                start: x.clone(),
                end: y.clone(),
                start_tangent: metric.unit_vector(x, &start_dir)?,
                end_tangent: metric.unit_vector(y, &end_dir)?,
                length: arc_len + flux,
                kind: SegmentKind::Arc,
            })
        }
        GeodesicModel::Integrated => Err(Error::Unsupported(
            "two-point geodesics for integrated metrics",
        )),
    }
}

/// Finsler distance `f(x, y)`.
pub fn distance<M: FinslerMetric + ?Sized>(metric: &M, x: &Vector, y: &Vector) -> Result<f64> {
    Ok(connect(metric, x, y)?.length)
}

/// Second derivatives of `L` by central differences:
/// `(L_x, L_vv, L_vx)` with `L_vx[i][j] = ∂²L/∂v_i∂x_j`.
fn second_derivatives<M: FinslerMetric + ?Sized>(
    m: &M,
    x: &Vector,
    v: &Vector,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = x.dim();
    let hx = 1e-5 * (1.0 + x.norm());
    let hv = 1e-5 * v.norm();
    let mut lx = DVector::zeros(d);
    let mut lvv = DMatrix::zeros(d, d);
    let mut lvx = DMatrix::zeros(d, d);
    for j in 0..d {
        let e = Vector::axis(d, j);
        let (xp, xm) = (x.axpy(hx, &e), x.axpy(-hx, &e));
        lx[j] = (m.lagrangian(&xp, v) - m.lagrangian(&xm, v)) / (2.0 * hx);
        let col = (m.fiber_derivative(&xp, v) - m.fiber_derivative(&xm, v)).scaled(0.5 / hx);
        lvx.set_column(j, &col.to_dvector());
        let (vp, vm) = (v.axpy(hv, &e), v.axpy(-hv, &e));
        let col = (m.fiber_derivative(x, &vp) - m.fiber_derivative(x, &vm)).scaled(0.5 / hv);
        lvv.set_column(j, &col.to_dvector());
    }
    let lvv = (&lvv + lvv.transpose()) * 0.5;
    (lx, lvv, lvx)
}

/// Acceleration of the unit-speed Euler–Lagrange flow. `L_vv` is singular
/// along `v`; adding `D_v D_vᵀ` fixes the component along `v` through
/// `D_v(a) = −L_x(v)`, which keeps `L(γ, γ') = 1`.
fn acceleration<M: FinslerMetric + ?Sized>(m: &M, x: &Vector, v: &Vector) -> Result<Vector> {
    let (lx, lvv, lvx) = second_derivatives(m, x, v);
    let dv = m.fiber_derivative(x, v).to_dvector();
    let vv = v.to_dvector();
    let c = -lx.dot(&vv);
    let mass = lvv + &dv * dv.transpose();
    let rhs = lx - lvx * vv + &dv * c;
    let lu = mass.lu();
    let a = lu.solve(&rhs).ok_or(Error::SingularMass)?;
    if !a.iter().all(|z| z.is_finite()) {
        return Err(Error::SingularMass);
    }
    Ok(Vector::from_dvector(&a))
}

/// RK4 integration of the Euler–Lagrange equations from `(x, v)`, `v` on the
/// indicatrix, up to Finsler time `t_max`. The step is `dt` shrunk so that an
/// integer number of steps lands on `t_max`; velocities are renormalized to
/// the indicatrix after each step. Returns `(position, velocity)` samples
/// including the start.
pub fn integrate_geodesic<M: FinslerMetric + ?Sized>(
    metric: &M,
    x: &Vector,
    v: &Vector,
    t_max: f64,
    dt: f64,
) -> Result<Vec<(Vector, Vector)>> {
    if !(dt > 0.0) || !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameters("need dt > 0 and finite t_max ≥ 0".into()));
    }
    let l = metric.lagrangian(x, v);
    if (l - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotOnIndicatrix(l));
    }
    let steps = (t_max / dt).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_max / steps as f64 };
    let mut path = Vec::with_capacity(steps + 1);
    let (mut pos, mut vel) = (x.clone(), v.clone());
    path.push((pos.clone(), vel.clone()));
    for _ in 0..steps {
        let k1x = vel.clone();
        let k1v = acceleration(metric, &pos, &vel)?;
        let p2 = pos.axpy(0.5 * h, &k1x);
        let k2x = vel.axpy(0.5 * h, &k1v);
        let k2v = acceleration(metric, &p2, &k2x)?;
        let p3 = pos.axpy(0.5 * h, &k2x);
        let k3x = vel.axpy(0.5 * h, &k2v);
        let k3v = acceleration(metric, &p3, &k3x)?;
        let p4 = pos.axpy(h, &k3x);
        let k4x = vel.axpy(h, &k3v);
        let k4v = acceleration(metric, &p4, &k4x)?;
        let dx = (&(&k1x + &k4x) + &(&k2x + &k3x).scaled(2.0)).scaled(h / 6.0);
        let dv = (&(&k1v + &k4v) + &(&k2v + &k3v).scaled(2.0)).scaled(h / 6.0);
        pos += &dx;
        vel += &dv;
        vel = metric.unit_vector(&pos, &vel)?;
        path.push((pos.clone(), vel.clone()));
    }
    Ok(path)
}

/// Where the geodesic leaving `y` in the inward indicatrix direction `v`
/// next meets the boundary.
#[derive(Clone, Debug)]
pub(crate) struct Exit {
    pub point: BoundaryPoint,
    /// Euclidean unit tangent on arrival.
    pub arrival_dir: Vector,
}

pub(crate) fn exit_point<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    y: &BoundaryPoint,
    v: &Vector,
) -> Result<Exit> {
    let p: Covector = conormal(metric, y)?;
    let pairing = p.pair(v);
    if pairing.abs() < GRAZING_TOL {
        return Err(Error::GrazingDeparture(pairing));
    }
    if pairing > 0.0 {
        return Err(Error::InvalidParameters(
            "departure direction points outward".into(),
        ));
    }
    let ray = Ray::new(metric.geodesic_model(), &y.position, v)?;
    let scale = table.scale();
    let phi = |s: f64| table.implicit(&ray.position(s));
    let t_min = 1e-6 * scale;
    let step = table.bounding_radius() / 64.0;
    let max_len = 8.0 * table.bounding_radius();
    if phi(t_min) >= 0.0 {
        return Err(Error::GrazingDeparture(pairing));
    }
    let mut lo = t_min;
    let mut hi = None;
    while lo < max_len {
        let t = (lo + step).min(max_len);
        if phi(t) >= 0.0 {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or(Error::NoExit)?;
    while hi - lo > 1e-9 * scale {
        let mid = 0.5 * (lo + hi);
        if phi(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let pos = ray.position(t);
        let f = table.implicit(&pos);
        if f.abs() <= 1e-15 * scale {
            break;
        }
        let slope = table.gradient(&pos).pair(&ray.velocity(t));
        let next = t - f / slope;
        if !(next > lo - 1e-9 * scale && next < hi + 1e-9 * scale) {
            break;
        }
        if (next - t).abs() <= 1e-17 * scale {
            t = next;
            break;
        }
        t = next;
    }
    let pos = ray.position(t);
    if table.implicit(&pos).abs() > 1e-12 * scale {
        return Err(Error::NoConvergence("boundary intersection"));
    }
    Ok(Exit {
        point: table.boundary_point(pos)?,
        arrival_dir: ray.velocity(t),
    })
}

/// Next boundary point along the geodesic leaving `y` with inward
/// indicatrix direction `v`.
pub fn intersect_forward<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    y: &BoundaryPoint,
    v: &Vector,
) -> Result<BoundaryPoint> {
    Ok(exit_point(metric, table, y, v)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{tests::cubic_metric, Metric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::new(vec![a, b])
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in [2, 10, 40, 62] {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((got - 2.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn euclidean_chord() {
        let s = connect(&Metric::euclidean(), &v2(0.0, 0.0), &v2(3.0, 4.0)).unwrap();
        assert_eq!(s.length, 5.0);
        assert!((&s.start_tangent - &v2(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(s.start_tangent, s.end_tangent);
        assert_eq!(s.kind, SegmentKind::Chord);
    }

    #[test]
    fn minkowski_distance_is_not_symmetric() {
        let m = Metric::minkowski(vec![0.5, 0.0]).unwrap();
        assert_eq!(distance(&m, &v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap(), 1.5);
        assert_eq!(distance(&m, &v2(1.0, 0.0), &v2(0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn connect_errors() {
        let m = Metric::magnetic(0.5).unwrap();
        assert_eq!(
            connect(&m, &v2(0.1, 0.0), &v2(0.1, 0.0)),
            Err(Error::CoincidentPoints)
        );
        assert!(matches!(
            connect(&m, &v2(-2.5, 0.0), &v2(2.5, 0.0)),
            Err(Error::ChordTooLongForField { .. })
        ));
        assert!(matches!(
            connect(&cubic_metric(0.1).translation_invariant(false), &v2(0.0, 0.0), &v2(1.0, 0.0)),
            Err(Error::Unsupported(_))
        ));
    }

    /// Composite trapezoid rule for `∫ L(γ, γ') ds` along an analytic arc.
    fn trapezoid_length(m: &Metric, ray: &Ray, arc_len: f64, n: usize) -> f64 {
        let f = |s: f64| m.lagrangian(&ray.position(s), &ray.velocity(s));
        let h = arc_len / n as f64;
        let inner: f64 = (1..n).map(|i| f(i as f64 * h)).sum();
        h * (0.5 * f(0.0) + inner + 0.5 * f(arc_len))
    }

    #[test]
    fn magnetic_half_circle_matches_trapezoid() {
        let b = 0.4;
        let m = Metric::magnetic(b).unwrap();
        // Larmor circle of radius 2.5 around (0.3, -0.2), travelled clockwise
        // from the top point through the right half
        let r = 1.0 / b;
        let c = v2(0.3, -0.2);
        let x = v2(c[0], c[1] + r);
        // stop just short of the bottom point so the arc is the minor one
        let eps: f64 = 1e-6;
        let y = v2(c[0] + r * eps.sin(), c[1] - r * eps.cos());
        let seg = connect(&m, &x, &y).unwrap();
        let ray = Ray::Arc {
            origin: x.clone(),
            heading: seg.start_tangent[1].atan2(seg.start_tangent[0]),
            field: b,
        };
        let arc_len = r * (PI - eps);
        assert!((ray.position(arc_len).distance(&y)) < 1e-8);
        let oracle = trapezoid_length(&m, &ray, arc_len, 100_000);
        assert!((seg.length - oracle).abs() < 1e-8, "{} vs {oracle}", seg.length);
        // Euclidean arc length ≈ π/B
        assert!((arc_len - PI / b).abs() < 1e-5);
    }

    #[test]
    fn magnetic_arc_endpoint_tangents() {
        let m = Metric::magnetic(0.3).unwrap();
        let x = v2(-0.4, 0.2);
        let y = v2(0.5, -0.1);
        let seg = connect(&m, &x, &y).unwrap();
        assert!((m.lagrangian(&x, &seg.start_tangent) - 1.0).abs() < 1e-12);
        assert!((m.lagrangian(&y, &seg.end_tangent) - 1.0).abs() < 1e-12);
        // the arc bulges left of the chord and turns right
        let chord = &y - &x;
        let cross = chord[0] * seg.start_tangent[1] - chord[1] * seg.start_tangent[0];
        assert!(cross > 0.0);
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let disk = ConvexTable::sphere(2, 1.0).unwrap();
        let metrics = [
            Metric::euclidean(),
            Metric::minkowski(vec![0.4, 0.2]).unwrap(),
            Metric::magnetic(0.3).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sample = |rng: &mut ChaCha8Rng| loop {
            let p = v2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if disk.contains(&p) {
                return p;
            }
        };
        for m in &metrics {
            for _ in 0..10_000 {
                let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
                let ac = distance(m, &a, &c).unwrap();
                let ab = distance(m, &a, &b).unwrap();
                let bc = distance(m, &b, &c).unwrap();
                assert!(ac <= ab + bc + 1e-9, "{m:?}");
            }
        }
    }

    #[test]
    fn non_reversible_metrics_have_asymmetric_distance() {
        let x = v2(-0.3, 0.1);
        for m in [Metric::minkowski(vec![0.4, 0.2]).unwrap(), Metric::magnetic(0.3).unwrap()] {
            let found = (0..32).any(|k| {
                let th = 2.0 * PI * k as f64 / 32.0;
                let y = v2(0.5 * th.cos(), 0.5 * th.sin());
                (distance(&m, &x, &y).unwrap() - distance(&m, &y, &x).unwrap()).abs() > 1e-6
            });
            assert!(found, "{m:?}");
        }
    }

    #[test]
    fn euclidean_integration_is_straight() {
        let x = v2(0.2, -0.1);
        let v = v2(0.6, 0.8);
        let path = integrate_geodesic(&Metric::euclidean(), &x, &v, 1.0, 1e-3).unwrap();
        let (end, _) = path.last().unwrap();
        assert!(end.distance(&x.axpy(1.0, &v)) <= 1e-9);
    }

    #[test]
    fn minkowski_integration_matches_chord() {
        let m = Metric::minkowski(vec![0.3, -0.1]).unwrap();
        let x = v2(0.0, 0.0);
        let y = v2(0.7, 0.4);
        let seg = connect(&m, &x, &y).unwrap();
        let path = integrate_geodesic(&m, &x, &seg.start_tangent, seg.length, 1e-3).unwrap();
        assert!(path.last().unwrap().0.distance(&y) <= 1e-8);
    }

    #[test]
    fn magnetic_integration_stays_on_larmor_circle() {
        let b = 0.2;
        let m = Metric::magnetic(b).unwrap();
        // the Larmor circle centered at the origin keeps |α| = 0.5, so the
        // whole path stays in the weak-field region for t ≤ 10
        let x = v2(0.0, 5.0);
        let v = m.unit_vector(&x, &v2(1.0, 0.0)).unwrap();
        let path = integrate_geodesic(&m, &x, &v, 10.0, 1e-3).unwrap();
        for (p, vel) in &path {
            assert!((p.norm() - 5.0).abs() <= 1e-6, "{}", p.norm());
            assert!((m.lagrangian(p, vel) - 1.0).abs() <= 1e-6);
        }
        // a shorter run from a generic point: clockwise, center on the right
        let x = v2(0.1, 0.2);
        let v = m.unit_vector(&x, &v2(0.3, 1.0)).unwrap();
        let dir = v.scaled(1.0 / v.norm());
        let center = x.axpy(1.0 / b, &v2(dir[1], -dir[0]));
        for (p, _) in integrate_geodesic(&m, &x, &v, 3.0, 1e-3).unwrap() {
            assert!((p.distance(&center) - 5.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn magnetic_connect_agrees_with_integration() {
        let m = Metric::magnetic(0.25).unwrap();
        let x = v2(-0.6, 0.3);
        let y = v2(0.7, -0.2);
        let seg = connect(&m, &x, &y).unwrap();
        let path = integrate_geodesic(&m, &x, &seg.start_tangent, seg.length, 1e-3).unwrap();
        let (end, vel) = path.last().unwrap();
        assert!(end.distance(&y) <= 1e-6);
        assert!((vel - &seg.end_tangent).norm() <= 1e-6);
    }

    #[test]
    fn integrate_rejects_non_unit_start() {
        assert!(matches!(
            integrate_geodesic(&Metric::euclidean(), &v2(0.0, 0.0), &v2(2.0, 0.0), 1.0, 0.1),
            Err(Error::NotOnIndicatrix(_))
        ));
    }

    #[test]
    fn intersect_diameter() {
        let disk = ConvexTable::sphere(2, 1.0).unwrap();
        let y = disk.boundary_point(v2(-1.0, 0.0)).unwrap();
        let z = intersect_forward(&Metric::euclidean(), &disk, &y, &v2(1.0, 0.0)).unwrap();
        assert!(z.position.distance(&v2(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn intersect_circle_chord() {
        let disk = ConvexTable::sphere(2, 1.0).unwrap();
        let y = disk.boundary_point(v2(1.0, 0.0)).unwrap();
        // 150° from the outward normal (1, 0)
        let th = 150f64.to_radians();
        let v = v2(th.cos(), th.sin());
        let z = intersect_forward(&Metric::euclidean(), &disk, &y, &v).unwrap();
        // the chord makes 30° with the inward normal, so it subtends 120°
        let expect = v2((120f64.to_radians()).cos(), (120f64.to_radians()).sin());
        assert!(z.position.distance(&expect) < 1e-12);
    }

    #[test]
    fn intersect_ellipsoid_matches_quadratic_formula() {
        let t = ConvexTable::ellipsoid(vec![1.0, 1.3, 1.7], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inv = [1.0, 1.0 / 1.69, 1.0 / 2.89];
        for _ in 0..200 {
            let y = t.sample_boundary(&mut rng);
            let mut v = Vector::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
            if v.dot(&y.outward_normal) > 0.0 {
                v = -v;
            }
            v = v.scaled(1.0 / v.norm());
            if v.dot(&y.outward_normal).abs() < 1e-3 {
                continue;
            }
            let z = intersect_forward(&Metric::euclidean(), &t, &y, &v).unwrap();
            // Φ(y + s v) = A s² + B s with A = Σ v²/a², B = 2 Σ y v/a²
            let a: f64 = (0..3).map(|i| v[i] * v[i] * inv[i]).sum();
            let b: f64 = (0..3).map(|i| 2.0 * y.position[i] * v[i] * inv[i]).sum();
            let s = -b / a;
            assert!(s > 0.0);
            assert!(z.position.distance(&y.position.axpy(s, &v)) < 1e-10);
            assert!(t.implicit(&z.position).abs() <= 1e-12 * t.scale());
        }
    }

    #[test]
    fn intersect_errors() {
        let disk = ConvexTable::sphere(2, 1.0).unwrap();
        let y = disk.boundary_point(v2(1.0, 0.0)).unwrap();
        let m = Metric::euclidean();
        assert!(matches!(
            intersect_forward(&m, &disk, &y, &v2(0.0, 1.0)),
            Err(Error::GrazingDeparture(_))
        ));
        assert!(matches!(
            intersect_forward(&m, &disk, &y, &v2(1.0, 0.0)),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn magnetic_intersection_lands_on_the_arc() {
        let disk = ConvexTable::sphere(2, 1.0).unwrap();
        let m = Metric::magnetic(0.3).unwrap();
        let y = disk.boundary_point(v2(0.0, -1.0)).unwrap();
        let v = m.unit_vector(&y.position, &v2(0.3, 1.0)).unwrap();
        let exit = exit_point(&m, &disk, &y, &v).unwrap();
        let seg = connect(&m, &y.position, &exit.point.position).unwrap();
        let start_dir = seg.start_tangent.scaled(1.0 / seg.start_tangent.norm());
        assert!((&start_dir - &v.scaled(1.0 / v.norm())).norm() < 1e-10);
        let end_dir = seg.end_tangent.scaled(1.0 / seg.end_tangent.norm());
        assert!((&end_dir - &exit.arrival_dir).norm() < 1e-10);
    }
}
