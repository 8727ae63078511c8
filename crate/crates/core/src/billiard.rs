//! Finsler billiard reflection and the boundary map.
//!
//! An incoming indicatrix vector `u` at a boundary point reflects into the
//! outgoing `v` with `D_u − D_v = t·p`, `t > 0`, where `p` is the conormal.
//! The multiplier is the positive root of `φ(t) = |D_u − t·p|* − 1`; `φ` is
//! convex with `φ(0) = 0` and `φ'(0) = −p(u) < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{exit_point, GRAZING_TOL};
use crate::metric::{FinslerMetric, UNIT_TOL};
use crate::table::{conormal, BoundaryPoint, ConvexTable};
use crate::vector::{Covector, Vector};

/// A boundary point and an indicatrix direction there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub point: BoundaryPoint,
    pub direction: Vector,
}

impl BoundaryState {
    /// Normalizes `w` onto the indicatrix at `point`.
    pub fn new<M: FinslerMetric + ?Sized>(
        metric: &M,
        point: BoundaryPoint,
        w: &Vector,
    ) -> Result<Self> {
        let direction = metric.unit_vector(&point.position, w)?;
        Ok(BoundaryState { point, direction })
    }

    /// State at `point` aimed along the geodesic towards `target`.
    pub fn towards<M: FinslerMetric + ?Sized>(
        metric: &M,
        point: BoundaryPoint,
        target: &Vector,
    ) -> Result<Self> {
        let seg = crate::geodesic::connect(metric, &point.position, target)?;
        Ok(BoundaryState {
            point,
            direction: seg.start_tangent,
        })
    }
}

/// Full output of a reflection solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Reflection {
    pub outgoing: Vector,
    /// The multiplier `t*`.
    pub multiplier: f64,
    pub conormal: Covector,
    pub incoming_covector: Covector,
}

const MAX_DOUBLINGS: usize = 80;
const BISECTION_WIDTH: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

/// Outgoing direction for the incoming indicatrix vector `u` at `y`.
pub fn reflect<M: FinslerMetric + ?Sized>(metric: &M, y: &BoundaryPoint, u: &Vector) -> Result<Vector> {
    Ok(reflect_full(metric, y, u)?.outgoing)
}

pub fn reflect_full<M: FinslerMetric + ?Sized>(
    metric: &M,
    y: &BoundaryPoint,
    u: &Vector,
) -> Result<Reflection> {
    let x = &y.position;
    let p = conormal(metric, y)?;
    let du = metric.legendre(x, u)?;
    let pu = p.pair(u);
    if pu <= GRAZING_TOL {
        return Err(Error::GrazingRay(pu));
    }
    let phi = |t: f64| -> Result<(f64, Vector)> {
        let (norm, v) = metric.dual_maximizer(x, &du.axpy(-t, &p))?;
        Ok((norm - 1.0, v))
    };

    let cap = 1e3 * du.norm().max(1.0);
    let mut lo = 0.0;
    let mut hi = 1e-6;
    let mut doublings = 0;
    loop {
        if phi(hi)?.0 > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if hi > cap || doublings > MAX_DOUBLINGS {
            return Err(Error::NoConvergence("reflection multiplier bracket"));
        }
    }
    while hi - lo > BISECTION_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if phi(mid)?.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut t = 0.5 * (lo + hi);
    let (mut val, mut v) = phi(t)?;
    for _ in 0..8 {
        if val.abs() <= 1e-15 {
            break;
        }
        // φ'(t) = −p(v*(t))
        let slope = -p.pair(&v);
        if slope >= 0.0 {
            break;
        }
        let next = t - val / slope;
        if !(next > lo - BISECTION_WIDTH && next < hi + BISECTION_WIDTH) {
            break;
        }
        let (nv, nvec) = phi(next)?;
        if nv.abs() >= val.abs() {
            break;
        }
        t = next;
        val = nv;
        v = nvec;
    }

    if val.abs() > RESIDUAL_TOL {
        return Err(Error::NoConvergence("reflection multiplier"));
    }
    let l = metric.lagrangian(x, &v);
    if (l - 1.0).abs() > UNIT_TOL {
        return Err(Error::NoConvergence("reflection: outgoing vector off the indicatrix"));
    }
    if !(p.pair(&v) < 0.0) || v == *u {
        return Err(Error::NoConvergence("reflection: outgoing vector not inward"));
    }
    Ok(Reflection {
        outgoing: v,
        multiplier: t,
        conormal: p,
        incoming_covector: du,
    })
}

/// Follow the geodesic from `s` to the next boundary point and reflect there.
pub fn billiard_step<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    s: &BoundaryState,
) -> Result<BoundaryState> {
    let exit = exit_point(metric, table, &s.point, &s.direction)?;
    let arrival = metric.unit_vector(&exit.point.position, &exit.arrival_dir)?;
    let direction = reflect(metric, &exit.point, &arrival)?;
    Ok(BoundaryState {
        point: exit.point,
        direction,
    })
}

/// `n_steps` consecutive billiard steps from `s0` (not included).
pub fn trace<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    s0: &BoundaryState,
    n_steps: usize,
) -> Result<Vec<BoundaryState>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameters("n_steps must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n_steps);
    let mut cur = s0.clone();
    for index in 0..n_steps {
        cur = billiard_step(metric, table, &cur).map_err(|e| Error::Step {
            index,
            source: Box::new(e),
        })?;
        out.push(cur.clone());
    }
    Ok(out)
}
