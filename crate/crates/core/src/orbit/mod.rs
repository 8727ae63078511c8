//! Periodic orbits as critical points of the cyclic length function
//! `Λ(x_1, …, x_r) = f(x_1, x_2) + … + f(x_r, x_1)` on r-tuples of
//! boundary points with consecutive points distinct.

mod search;

pub use search::{
    find_critical, morse_index, MorseIndex, OrbitFlag, OrbitRecord, SearchConfig, SearchOutcome,
};

use std::cmp::Ordering;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{connect, GeodesicSegment};
use crate::metric::FinslerMetric;
use crate::table::{BoundaryPoint, ConvexTable};
use crate::vector::{Covector, Vector};

/// Minimum Euclidean gap between consecutive vertices, relative to the
/// table scale.
pub const DISTINCT_TOL: f64 = 1e-8;

/// A closed billiard polygon with its Finsler edge data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicPolygon {
    vertices: Vec<BoundaryPoint>,
    edge_lengths: Vec<f64>,
    lambda_value: f64,
    min_edge: f64,
    edge_product: f64,
}

impl CyclicPolygon {
    pub fn new<M: FinslerMetric + ?Sized>(
        metric: &M,
        table: &ConvexTable,
        vertices: Vec<BoundaryPoint>,
    ) -> Result<Self> {
        let r = vertices.len();
        if r < 2 {
            return Err(Error::InvalidParameters("a cyclic polygon needs r ≥ 2".into()));
        }
        let gap = DISTINCT_TOL * table.scale();
        for i in 0..r {
            let d = vertices[i].position.distance(&vertices[(i + 1) % r].position);
            if d <= gap {
                return Err(Error::InvalidParameters(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % r
                )));
            }
        }
        let edge_lengths = segments(metric, &positions(&vertices))?
            .into_iter()
            .map(|s| s.length)
            .collect::<Vec<_>>();
        let lambda_value = edge_lengths.iter().sum();
        let min_edge = edge_lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let edge_product = edge_lengths.iter().product();
        Ok(CyclicPolygon {
            vertices,
            edge_lengths,
            lambda_value,
            min_edge,
            edge_product,
        })
    }

    /// Projects each position onto the boundary first.
    pub fn from_positions<M: FinslerMetric + ?Sized>(
        metric: &M,
        table: &ConvexTable,
        positions: &[Vector],
    ) -> Result<Self> {
        let vertices = positions
            .iter()
            .map(|x| table.project_to_boundary(x))
            .collect::<Result<Vec<_>>>()?;
        Self::new(metric, table, vertices)
    }

    pub fn r(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[BoundaryPoint] {
        &self.vertices
    }

    pub fn positions(&self) -> Vec<Vector> {
        positions(&self.vertices)
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn lambda_value(&self) -> f64 {
        self.lambda_value
    }

    pub fn min_edge(&self) -> f64 {
        self.min_edge
    }

    pub fn edge_product(&self) -> f64 {
        self.edge_product
    }

    /// The same polygon with indices shifted by `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let r = self.r();
        let idx = |i: usize| (i + k) % r;
        CyclicPolygon {
            vertices: (0..r).map(|i| self.vertices[idx(i)].clone()).collect(),
            edge_lengths: (0..r).map(|i| self.edge_lengths[idx(i)]).collect(),
            lambda_value: self.lambda_value,
            min_edge: self.min_edge,
            edge_product: self.edge_product,
        }
    }

    /// The polygon traversed backwards.
    pub fn reversed<M: FinslerMetric + ?Sized>(
        &self,
        metric: &M,
        table: &ConvexTable,
    ) -> Result<Self> {
        let mut v = self.vertices.clone();
        v.reverse();
        Self::new(metric, table, v)
    }
}

fn positions(vertices: &[BoundaryPoint]) -> Vec<Vector> {
    vertices.iter().map(|v| v.position.clone()).collect()
}

/// Oriented edges `x_i → x_{i+1}`, cyclically.
pub(crate) fn segments<M: FinslerMetric + ?Sized>(
    metric: &M,
    xs: &[Vector],
) -> Result<Vec<GeodesicSegment>> {
    let r = xs.len();
    (0..r).map(|i| connect(metric, &xs[i], &xs[(i + 1) % r])).collect()
}

/// `Λ` at the given cyclic positions.
pub fn length_function<M: FinslerMetric + ?Sized>(metric: &M, xs: &[Vector]) -> Result<f64> {
    Ok(segments(metric, xs)?.iter().map(|s| s.length).sum())
}

/// Ambient differential of `Λ`: `D_{u_i} − D_{v_i}` at each vertex, with
/// `u_i` the arrival tangent of the edge into `x_i` and `v_i` the departure
/// tangent of the edge out of it.
pub fn length_differential<M: FinslerMetric + ?Sized>(
    metric: &M,
    xs: &[Vector],
) -> Result<Vec<Covector>> {
    let segs = segments(metric, xs)?;
    let r = xs.len();
    Ok((0..r)
        .map(|i| {
            let into = &segs[(i + r - 1) % r];
            let out = &segs[i];
            metric.fiber_derivative(&xs[i], &into.end_tangent)
                - metric.fiber_derivative(&xs[i], &out.start_tangent)
        })
        .collect())
}

/// Gradient of `Λ` on the boundary: the differential evaluated on each
/// vertex's tangent basis.
pub fn grad_length<M: FinslerMetric + ?Sized>(
    metric: &M,
    polygon: &CyclicPolygon,
) -> Result<Vec<Vec<f64>>> {
    let diff = length_differential(metric, &polygon.positions())?;
    Ok(polygon
        .vertices
        .iter()
        .zip(&diff)
        .map(|(y, g)| y.tangent_basis().iter().map(|e| g.pair(e)).collect())
        .collect())
}

/// Euclidean norm of all gradient components.
pub fn gradient_norm(grad: &[Vec<f64>]) -> f64 {
    grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// `Π f(x_i, x_{i+1}) ≥ ε`.
pub fn in_g_epsilon(polygon: &CyclicPolygon, epsilon: f64) -> bool {
    polygon.edge_product >= epsilon
}

/// Largest vertex distance between `a` and the best cyclic relabeling of `b`.
pub fn cyclic_distance(a: &[Vector], b: &[Vector]) -> f64 {
    let r = a.len();
    if r != b.len() {
        return f64::INFINITY;
    }
    (0..r)
        .map(|k| {
            (0..r)
                .map(|i| a[i].distance(&b[(i + k) % r]))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Flattened coordinates of the rotation starting at vertex `k`.
fn rotation_coords(xs: &[Vector], k: usize) -> Vec<f64> {
    let r = xs.len();
    (0..r)
        .flat_map(|i| xs[(i + k) % r].iter().copied().collect::<Vec<_>>())
        .collect()
}

fn grid(coords: &[f64], tol: f64) -> Vec<i64> {
    coords.iter().map(|c| (c / tol).round() as i64).collect()
}

/// True when the two rotations first differ, after rounding, at a coordinate
/// whose raw values are within `tol` of each other.
fn straddles(a: &[f64], b: &[f64], tol: f64) -> bool {
    let (ga, gb) = (grid(a, tol), grid(b, tol));
    match ga.iter().zip(&gb).position(|(x, y)| x != y) {
        Some(i) => (a[i] - b[i]).abs() <= tol,
        None => false,
    }
}

/// ℤ_r canonical form: the cyclic rotation whose coordinates, rounded to
/// the `cluster_tol` grid, are lexicographically smallest. Returns the
/// rounded coordinates.
pub fn canonicalize(xs: &[Vector], cluster_tol: f64) -> Result<Vec<f64>> {
    if xs.is_empty() || !(cluster_tol > 0.0) {
        return Err(Error::InvalidParameters("empty polygon or bad tolerance".into()));
    }
    for tol in [cluster_tol, cluster_tol * 1e-3] {
        let rots: Vec<Vec<f64>> = (0..xs.len()).map(|k| rotation_coords(xs, k)).collect();
        let mut order: Vec<usize> = (0..rots.len()).collect();
        order.sort_by(|&a, &b| grid(&rots[a], tol).cmp(&grid(&rots[b], tol)).then(a.cmp(&b)));
        let best = &rots[order[0]];
        let ambiguous = order.len() > 1 && {
            let second = &rots[order[1]];
            // a true symmetry (multiple cover) is not ambiguous
            let same = best.iter().zip(second).all(|(a, b)| (a - b).abs() <= tol);
            !same && straddles(best, second, tol)
        };
        if !ambiguous {
            return Ok(grid(best, cluster_tol)
                .into_iter()
                .map(|g| g as f64 * cluster_tol)
                .collect());
        }
    }
    Err(Error::AmbiguousCanonicalization)
}

/// Compare two canonical keys under `tol`.
pub fn keys_match(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + 1e-9))
}

/// Lexicographic order on canonical keys, exact.
pub fn key_order(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

/// Winding number of a planar closed polygon around `center`, reduced
/// mod r into `1..r`.
pub fn rotation_number(xs: &[Vector], center: &Vector) -> Result<usize> {
    if xs.iter().any(|x| x.dim() != 2) || center.dim() != 2 {
        return Err(Error::Unsupported("rotation numbers of non-planar polygons"));
    }
    let r = xs.len();
    let angle = |x: &Vector| (x[1] - center[1]).atan2(x[0] - center[0]);
    let total: f64 = (0..r)
        .map(|i| {
            let d = angle(&xs[(i + 1) % r]) - angle(&xs[i]);
            (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
        })
        .sum();
    let w = (total / TAU).round() as i64;
    let k = w.rem_euclid(r as i64) as usize;
    if k == 0 {
        return Err(Error::ZeroWinding);
    }
    Ok(k)
}
