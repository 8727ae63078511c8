//! Generic dual norm: maximize `g(v) = q(v) / L(x, v)` over the Euclidean
//! unit sphere.
//!
//! `g` is 0-homogeneous, so on the chart `s ↦ v0 + E s` (with `E` an
//! orthonormal basis of `v0^⊥`) it needs no renormalization and its gradient
//! is `Eᵀ(q/L − q(v)·∂L/∂v / L²)`. The superlevel sets of `g` are convex
//! cones when the indicatrix is convex, so a local maximum is global; the
//! restarts only matter when Newton fails from the first start.

use nalgebra::{DMatrix, DVector};

use super::FinslerMetric;
use crate::error::{Error, Result};
use crate::table::orthonormal_complement;
use crate::vector::{Covector, Vector};

const RESTARTS: usize = 8;
const MAX_ITER: usize = 60;
const HESSIAN_STEP: f64 = 1e-5;
const NOISE_FLOOR: f64 = 1e-8;

struct Local {
    value: f64,
    point: Vector,
    is_max: bool,
}

/// Returns `(sup { q(v) : L(x, v) = 1 }, argmax)`.
pub fn maximize_on_indicatrix<M: FinslerMetric + ?Sized>(
    m: &M,
    x: &Vector,
    q: &Covector,
) -> Result<(f64, Vector)> {
    let qn = q.norm();
    if !qn.is_finite() {
        return Err(Error::InvalidParameters("non-finite covector".into()));
    }
    let d = q.dim();
    if qn == 0.0 {
        let e = Vector::axis(d, 0);
        return Ok((0.0, m.unit_vector(x, &e)?));
    }
    let mut best: Option<Local> = None;
    for start in starts(q, qn) {
        let Ok(local) = newton(m, x, q, start) else {
            continue;
        };
        if local.is_max {
            // unique local maximum
            return finish(m, x, local);
        }
        if best.as_ref().is_none_or(|b| local.value > b.value) {
            best = Some(local);
        }
    }
    match best {
        Some(local) => finish(m, x, local),
        None => Err(Error::NoConvergence("dual norm maximization")),
    }
}

fn finish<M: FinslerMetric + ?Sized>(m: &M, x: &Vector, local: Local) -> Result<(f64, Vector)> {
    let v = m.unit_vector(x, &local.point)?;
    Ok((local.value, v))
}

fn starts(q: &Covector, qn: f64) -> Vec<Vector> {
    let d = q.dim();
    let mut out = vec![q.sharp().scaled(1.0 / qn)];
    let mut k = 0;
    while out.len() < RESTARTS {
        let axis = Vector::axis(d, (k / 2) % d);
        out.push(if k % 2 == 0 { axis } else { -axis });
        k += 1;
    }
    out
}

fn objective<M: FinslerMetric + ?Sized>(m: &M, x: &Vector, q: &Covector, v: &Vector) -> f64 {
    q.pair(v) / m.lagrangian(x, v)
}

fn ambient_gradient<M: FinslerMetric + ?Sized>(
    m: &M,
    x: &Vector,
    q: &Covector,
    v: &Vector,
) -> Vector {
    let l = m.lagrangian(x, v);
    let dl = m.fiber_derivative(x, v);
    let qv = q.pair(v);
    q.sharp().scaled(1.0 / l).axpy(-qv / (l * l), &dl.sharp())
}

fn chart_gradient<M: FinslerMetric + ?Sized>(
    m: &M,
    x: &Vector,
    q: &Covector,
    v0: &Vector,
    basis: &[Vector],
    s: &[f64],
) -> DVector<f64> {
    let mut v = v0.clone();
    for (b, si) in basis.iter().zip(s) {
        v = v.axpy(*si, b);
    }
    let g = ambient_gradient(m, x, q, &v);
    DVector::from_iterator(basis.len(), basis.iter().map(|b| b.dot(&g)))
}

fn newton<M: FinslerMetric + ?Sized>(
    m: &M,
    x: &Vector,
    q: &Covector,
    start: Vector,
) -> Result<Local> {
    let n = q.dim() - 1;
    let mut v = start;
    let mut value = objective(m, x, q, &v);
    let qn = q.norm();
    let mut settled = false;
    for _ in 0..MAX_ITER {
        let basis = orthonormal_complement(&v);
        let zero = vec![0.0; n];
        let grad = chart_gradient(m, x, q, &v, &basis, &zero);
        let gscale = qn / m.lagrangian(x, &v);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut sp = zero.clone();
            let mut sm = zero.clone();
            sp[k] = HESSIAN_STEP;
            sm[k] = -HESSIAN_STEP;
            let col = (chart_gradient(m, x, q, &v, &basis, &sp)
                - chart_gradient(m, x, q, &v, &basis, &sm))
                / (2.0 * HESSIAN_STEP);
            hess.set_column(k, &col);
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let neg = -&hess;
        let chol = neg.clone().cholesky();
        let is_max = chol.is_some();
        settled = is_max && grad.norm() <= NOISE_FLOOR * gscale;
        if grad.norm() <= 1e-14 * gscale {
            return Ok(Local {
                value,
                point: v,
                is_max,
            });
        }
        let mut step = match &chol {
            Some(c) => c.solve(&grad),
            None => &grad / gscale,
        };
        // finite-difference fiber derivatives bottom out well above the
        // gradient test; a negligible Newton step is convergence too
        if is_max && step.norm() <= 1e-12 {
            return Ok(Local {
                value,
                point: v,
                is_max,
            });
        }
        let max_len = 0.5;
        if step.norm() > max_len {
            step *= max_len / step.norm();
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = v.clone();
            for (b, si) in basis.iter().zip(step.iter()) {
                cand = cand.axpy(*si, b);
            }
            let cand = cand.scaled(1.0 / cand.norm());
            let cand_value = objective(m, x, q, &cand);
            let cand_grad = {
                let b2 = orthonormal_complement(&cand);
                chart_gradient(m, x, q, &cand, &b2, &vec![0.0; n])
            };
            if cand_value > value || (cand_value >= value - 1e-15 * gscale && cand_grad.norm() < grad.norm()) {
                v = cand;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() < 1e-16 {
            return Ok(Local {
                value,
                point: v,
                is_max,
            });
        }
    }
    if settled {
        // wandering inside the noise floor of a finite-difference derivative
        return Ok(Local {
            value,
            point: v,
            is_max: true,
        });
    }
    Err(Error::NoConvergence("dual norm maximization"))
}
