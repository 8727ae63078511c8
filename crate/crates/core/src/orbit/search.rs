//! Multistart search for critical points of `Λ`.
//!
//! Each vertex moves in a chart `s ↦ project(x_i + E_i s)` with `E_i` an
//! orthonormal tangent basis. The residual is `dΛ` evaluated on the
//! tangential projections of `E_i` at the moved points; it vanishes exactly
//! at critical points, maxima and saddles alike. Levenberg–Marquardt drives
//! its square norm to zero with a central-difference Jacobian, recentering
//! the chart after every accepted step.

use log::{debug, info};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    canonicalize, cyclic_distance, in_g_epsilon, length_differential, length_function,
    rotation_number, CyclicPolygon,
};
use crate::billiard::{trace, BoundaryState};
use crate::error::{Error, Result};
use crate::metric::{FinslerMetric, GeodesicModel};
use crate::table::{BoundaryPoint, ConvexTable};
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub seeds: usize,
    pub rng_seed: u64,
    /// Absolute tolerances; `None` means the default multiple of the table
    /// scale.
    pub grad_tol: Option<f64>,
    pub cluster_tol: Option<f64>,
    pub continuum_tol: Option<f64>,
    pub epsilon: Option<f64>,
    pub eig_tol: Option<f64>,
    pub hessian_step: Option<f64>,
    pub max_iter: usize,
    pub compute_index: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seeds: 500,
            rng_seed: 0,
            grad_tol: None,
            cluster_tol: None,
            continuum_tol: None,
            epsilon: None,
            eig_tol: None,
            hessian_step: None,
            max_iter: 200,
            compute_index: true,
        }
    }
}

/// Tolerances resolved against a table.
#[derive(Clone, Copy, Debug)]
struct Tolerances {
    grad: f64,
    cluster: f64,
    continuum: f64,
    epsilon: f64,
    eig: f64,
    hessian_step: f64,
    min_edge: f64,
}

impl SearchConfig {
    /// A copy with every tolerance filled in for `table` and `r`.
    pub fn resolved(&self, table: &ConvexTable, r: usize) -> SearchConfig {
        let scale = table.scale();
        SearchConfig {
            grad_tol: Some(self.grad_tol.unwrap_or(1e-9 * scale)),
            cluster_tol: Some(self.cluster_tol.unwrap_or(1e-5 * scale)),
            continuum_tol: Some(self.continuum_tol.unwrap_or(1e-4 * scale)),
            epsilon: Some(self.epsilon.unwrap_or(1e-9 * scale.powi(r as i32))),
            eig_tol: Some(self.eig_tol.unwrap_or(1e-6 * scale)),
            hessian_step: Some(self.hessian_step.unwrap_or(1e-4 * scale)),
            ..self.clone()
        }
    }

    fn resolve(&self, table: &ConvexTable, r: usize) -> Tolerances {
        let c = self.resolved(table, r);
        let get = |v: Option<f64>| v.expect("resolved");
        Tolerances {
            grad: get(c.grad_tol),
            cluster: get(c.cluster_tol),
            continuum: get(c.continuum_tol),
            epsilon: get(c.epsilon),
            eig: get(c.eig_tol),
            hessian_step: get(c.hessian_step),
            min_edge: 1e-4 * table.scale(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitFlag {
    /// Part of a degenerate critical family, or merged with nearby records.
    ContinuumSuspect,
    /// Some Hessian eigenvalue within the eigenvalue tolerance of zero.
    DegenerateHessian,
    /// Repeats a shorter closed polygon.
    MultipleCover,
    /// The canonical rotation could not be pinned down; the key is on a
    /// finer grid.
    AmbiguousKey,
}

impl OrbitFlag {
    /// Flags that make a class unusable for lower-bound checks.
    pub fn is_non_generic(self) -> bool {
        !matches!(self, OrbitFlag::AmbiguousKey)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseIndex {
    pub index: usize,
    pub degeneracy: usize,
    pub eigenvalues: Vec<f64>,
}

/// One ℤ_r-class of critical points, represented by its earliest seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub polygon: CyclicPolygon,
    pub residual: f64,
    pub morse_index: Option<usize>,
    pub degeneracy: Option<usize>,
    pub rotation_number: Option<usize>,
    pub canonical_key: Vec<f64>,
    pub flags: Vec<OrbitFlag>,
    /// Index of the seed that produced the representative.
    pub seed_index: usize,
    /// Number of converged seeds in this class.
    pub hits: usize,
}

impl OrbitRecord {
    pub fn is_flagged(&self) -> bool {
        self.flags.iter().any(|f| f.is_non_generic())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub records: Vec<OrbitRecord>,
    pub seeds: usize,
    /// Seeds that converged to an admissible critical point.
    pub converged: usize,
}

/// Chart around a configuration of boundary points.
struct Chart<'a> {
    table: &'a ConvexTable,
    base: Vec<BoundaryPoint>,
    frames: Vec<Vec<Vector>>,
}

impl<'a> Chart<'a> {
    fn new(table: &'a ConvexTable, base: Vec<BoundaryPoint>) -> Self {
        let frames = base.iter().map(|b| b.tangent_basis()).collect();
        Chart {
            table,
            base,
            frames,
        }
    }

    fn dim(&self) -> usize {
        self.frames.iter().map(|f| f.len()).sum()
    }

    fn points(&self, s: &DVector<f64>) -> Result<Vec<BoundaryPoint>> {
        let mut k = 0;
        let mut out = Vec::with_capacity(self.base.len());
        for (b, frame) in self.base.iter().zip(&self.frames) {
            let coeffs = &s.as_slice()[k..k + frame.len()];
            k += frame.len();
            if coeffs.iter().all(|c| *c == 0.0) {
                out.push(b.clone());
                continue;
            }
            let mut x = b.position.clone();
            for (e, c) in frame.iter().zip(coeffs) {
                x = x.axpy(*c, e);
            }
            out.push(self.table.project_to_boundary(&x)?);
        }
        Ok(out)
    }

    fn residual<M: FinslerMetric + ?Sized>(
        &self,
        metric: &M,
        pts: &[BoundaryPoint],
    ) -> Result<DVector<f64>> {
        check_distinct(pts, self.table.scale())?;
        let xs: Vec<Vector> = pts.iter().map(|p| p.position.clone()).collect();
        let diff = length_differential(metric, &xs)?;
        let mut out = Vec::with_capacity(self.dim());
        for ((p, frame), g) in pts.iter().zip(&self.frames).zip(&diff) {
            for e in frame {
                out.push(g.pair(&p.tangential(e)));
            }
        }
        Ok(DVector::from_vec(out))
    }

    fn lambda<M: FinslerMetric + ?Sized>(&self, metric: &M, s: &DVector<f64>) -> Result<f64> {
        let pts = self.points(s)?;
        check_distinct(&pts, self.table.scale())?;
        let xs: Vec<Vector> = pts.into_iter().map(|p| p.position).collect();
        length_function(metric, &xs)
    }
}

fn check_distinct(pts: &[BoundaryPoint], scale: f64) -> Result<()> {
    let r = pts.len();
    for i in 0..r {
        if pts[i].position.distance(&pts[(i + 1) % r].position) <= super::DISTINCT_TOL * scale {
            return Err(Error::CoincidentPoints);
        }
    }
    Ok(())
}

const JACOBIAN_STEP: f64 = 1e-6;
const MAX_VERTEX_STEP: f64 = 0.25;
const POLISH_STEPS: usize = 3;

/// Levenberg–Marquardt on `|F|²`. Returns the final points and the norm of
/// the boundary gradient there, or `None` if it stalls above `tol`.
pub(crate) fn converge<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    start: Vec<BoundaryPoint>,
    tol: f64,
    max_iter: usize,
) -> Option<(Vec<BoundaryPoint>, f64)> {
    let scale = table.scale();
    let mut pts = start;
    let mut mu = 1e-3;
    let mut polished = 0;
    for _ in 0..max_iter {
        let chart = Chart::new(table, pts.clone());
        let n = chart.dim();
        let f = chart.residual(metric, &pts).ok()?;
        let fnorm = f.norm();
        if fnorm <= tol {
            if polished >= POLISH_STEPS {
                return Some((pts, fnorm));
            }
            polished += 1;
        }
        let h = JACOBIAN_STEP * scale;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut sp = DVector::zeros(n);
            sp[k] = h;
            let fp = chart.residual(metric, &chart.points(&sp).ok()?).ok()?;
            sp[k] = -h;
            let fm = chart.residual(metric, &chart.points(&sp).ok()?).ok()?;
            jac.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &f;
        let level = (a.trace() / n as f64).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while mu < 1e12 {
            let mut m = a.clone();
            for k in 0..n {
                m[(k, k)] += mu * level;
            }
            let Some(chol) = m.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let mut step = -chol.solve(&g);
            let longest = step.amax();
            if longest > MAX_VERTEX_STEP * scale {
                step *= MAX_VERTEX_STEP * scale / longest;
            }
            let trial = chart
                .points(&step)
                .and_then(|p| chart.residual(metric, &p).map(|r| (p, r)));
            match trial {
                Ok((p, r)) if r.norm() < fnorm => {
                    pts = p;
                    mu = (mu / 5.0).max(1e-15);
                    accepted = true;
                    break;
                }
                _ => mu *= 5.0,
            }
        }
        if !accepted {
            return (fnorm <= tol).then_some((pts, fnorm));
        }
    }
    let chart = Chart::new(table, pts.clone());
    let fnorm = chart.residual(metric, &pts).ok()?.norm();
    (fnorm <= tol).then_some((pts, fnorm))
}

/// Index and nullity of the chart Hessian of `Λ` at a critical polygon, by
/// central second differences with step `h`.
pub fn morse_index<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    polygon: &CyclicPolygon,
    h: f64,
    eig_tol: f64,
) -> Result<MorseIndex> {
    let chart = Chart::new(table, polygon.vertices().to_vec());
    let n = chart.dim();
    let at = |pairs: &[(usize, f64)]| -> Result<f64> {
        let mut s = DVector::zeros(n);
        for &(k, v) in pairs {
            s[k] += v;
        }
        chart.lambda(metric, &s)
    };
    let l0 = at(&[])?;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let lp = at(&[(i, h)])?;
        let lm = at(&[(i, -h)])?;
        hess[(i, i)] = (lp - 2.0 * l0 + lm) / (h * h);
        for j in 0..i {
            let pp = at(&[(i, h), (j, h)])?;
            let pm = at(&[(i, h), (j, -h)])?;
            let mp = at(&[(i, -h), (j, h)])?;
            let mm = at(&[(i, -h), (j, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(MorseIndex {
        index: eigenvalues.iter().filter(|&&e| e < -eig_tol).count(),
        degeneracy: eigenvalues.iter().filter(|&&e| e.abs() <= eig_tol).count(),
        eigenvalues,
    })
}

fn random_direction<R: Rng>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::new((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let n = v.norm();
        if n > 1e-6 {
            return v.scaled(1.0 / n);
        }
    }
}

/// Random r-tuple with pairwise spacing at least `0.1·scale`.
fn spaced_seed<R: Rng>(table: &ConvexTable, r: usize, rng: &mut R) -> Vec<BoundaryPoint> {
    let gap = 0.1 * table.scale();
    'outer: loop {
        let mut pts: Vec<BoundaryPoint> = Vec::with_capacity(r);
        for _ in 0..1000 {
            let p = table.sample_boundary(rng);
            if pts.iter().all(|q| q.position.distance(&p.position) >= gap) {
                pts.push(p);
                if pts.len() == r {
                    break 'outer pts;
                }
            }
        }
    }
}

/// Billiard trace launched from a random point towards the boundary point
/// at angle `2πk/r` in a random plane through the table center.
fn trace_seed<M: FinslerMetric + ?Sized, R: Rng>(
    metric: &M,
    table: &ConvexTable,
    r: usize,
    k: usize,
    rng: &mut R,
) -> Option<Vec<BoundaryPoint>> {
    let d = table.dim();
    let y0 = table.sample_boundary(rng);
    let c = table.interior_point();
    let e1 = {
        let v = &y0.position - &c;
        v.scaled(1.0 / v.norm())
    };
    let e2 = loop {
        let w = random_direction(d, rng);
        let w = w.axpy(-w.dot(&e1), &e1);
        if w.norm() > 1e-3 {
            break w.scaled(1.0 / w.norm());
        }
    };
    let th = std::f64::consts::TAU * k as f64 / r as f64;
    let target = table
        .radial_point(&e1.scaled(th.cos()).axpy(th.sin(), &e2))
        .ok()?;
    let s0 = BoundaryState::towards(metric, y0.clone(), &target.position).ok()?;
    let mut pts = vec![y0];
    pts.extend(trace(metric, table, &s0, r - 1).ok()?.into_iter().map(|s| s.point));
    Some(pts)
}

fn seed_polygon<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    r: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<BoundaryPoint> {
    if index % 2 == 1 {
        let k = 1 + (index / 2) % (r - 1);
        if let Some(p) = trace_seed(metric, table, r, k, rng) {
            return p;
        }
    }
    spaced_seed(table, r, rng)
}

struct Run {
    index: usize,
    polygon: CyclicPolygon,
    residual: f64,
}

fn run_seed<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    r: usize,
    cfg: &SearchConfig,
    tol: &Tolerances,
    index: usize,
) -> Option<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index as u64);
    let start = seed_polygon(metric, table, r, index, &mut rng);
    let (pts, residual) = converge(metric, table, start, tol.grad, cfg.max_iter)?;
    let polygon = CyclicPolygon::new(metric, table, pts).ok()?;
    if !in_g_epsilon(&polygon, tol.epsilon) || polygon.min_edge() <= tol.min_edge {
        debug!("seed {index}: collapsed polygon discarded");
        return None;
    }
    Some(Run {
        index,
        polygon,
        residual,
    })
}

struct Class {
    members: Vec<Run>,
    hits: usize,
    merged: bool,
}

/// Single-linkage clustering in seed order: a run within `cluster` of a
/// class joins it, one within `continuum` merges into it and marks it.
fn cluster(runs: Vec<Run>, tol: &Tolerances) -> Vec<Class> {
    let mut classes: Vec<Class> = Vec::new();
    for run in runs {
        let xs = run.polygon.positions();
        let dist = |c: &Class| {
            c.members
                .iter()
                .map(|m| cyclic_distance(&xs, &m.polygon.positions()))
                .fold(f64::INFINITY, f64::min)
        };
        let near: Vec<(usize, f64)> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dist(c)))
            .filter(|(_, d)| *d <= tol.continuum)
            .collect();
        match near.as_slice() {
            [] => classes.push(Class {
                members: vec![run],
                hits: 1,
                merged: false,
            }),
            [(i, d)] if *d <= tol.cluster => {
                classes[*i].hits += 1;
                classes[*i].members.push(run);
            }
            _ => {
                let first = near[0].0;
                for &(i, _) in near[1..].iter().rev() {
                    let other = classes.remove(i);
                    classes[first].hits += other.hits;
                    classes[first].members.extend(other.members);
                }
                let class = &mut classes[first];
                class.hits += 1;
                class.members.push(run);
                class.merged = true;
            }
        }
    }
    for c in &mut classes {
        c.members.sort_by_key(|m| m.index);
    }
    classes
}

fn is_multiple_cover(xs: &[Vector], tol: f64) -> bool {
    let r = xs.len();
    (1..r)
        .filter(|q| r % q == 0)
        .any(|q| (0..r).all(|i| xs[i].distance(&xs[(i + q) % r]) <= tol))
}

fn classify<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    cfg: &SearchConfig,
    tol: &Tolerances,
    class: Class,
) -> OrbitRecord {
    let rep = class.members.into_iter().next().expect("classes are non-empty");
    let xs = rep.polygon.positions();
    let mut flags = Vec::new();
    if class.merged {
        flags.push(OrbitFlag::ContinuumSuspect);
    }
    let (morse, degeneracy) = if cfg.compute_index {
        match morse_index(metric, table, &rep.polygon, tol.hessian_step, tol.eig) {
            Ok(m) => {
                if m.degeneracy > 0 {
                    flags.push(OrbitFlag::DegenerateHessian);
                    flags.push(OrbitFlag::ContinuumSuspect);
                }
                (Some(m.index), Some(m.degeneracy))
            }
            Err(e) => {
                debug!("seed {}: Hessian failed: {e}", rep.index);
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    if is_multiple_cover(&xs, tol.cluster) {
        flags.push(OrbitFlag::MultipleCover);
    }
    let canonical_key = match canonicalize(&xs, tol.cluster) {
        Ok(k) => k,
        Err(_) => {
            flags.push(OrbitFlag::AmbiguousKey);
            canonicalize(&xs, tol.cluster * 1e-3).unwrap_or_default()
        }
    };
    flags.sort();
    flags.dedup();
    let rotation = if table.dim() == 2 {
        rotation_number(&xs, &table.interior_point()).ok()
    } else {
        None
    };
    OrbitRecord {
        polygon: rep.polygon,
        residual: rep.residual,
        morse_index: morse,
        degeneracy,
        rotation_number: rotation,
        canonical_key,
        flags,
        seed_index: rep.index,
        hits: class.hits,
    }
}

/// Multistart search for `r`-periodic orbits. Deterministic for a fixed
/// configuration: seeds run in parallel but are merged in seed order.
pub fn find_critical<M: FinslerMetric + ?Sized>(
    metric: &M,
    table: &ConvexTable,
    r: usize,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    if r < 2 {
        return Err(Error::InvalidParameters("r must be at least 2".into()));
    }
    if let Some(d) = metric.dim() {
        if d != table.dim() {
            return Err(Error::DimensionMismatch {
                expected: table.dim(),
                got: d,
            });
        }
    }
    if metric.geodesic_model() == GeodesicModel::Integrated {
        return Err(Error::Unsupported("orbit search needs closed-form geodesics"));
    }
    let tol = cfg.resolve(table, r);
    debug!("search tolerances: {tol:?}");
    let runs: Vec<Run> = (0..cfg.seeds)
        .into_par_iter()
        .filter_map(|i| run_seed(metric, table, r, cfg, &tol, i))
        .collect();
    let converged = runs.len();
    let classes = cluster(runs, &tol);
    let records: Vec<OrbitRecord> = classes
        .into_par_iter()
        .map(|c| classify(metric, table, cfg, &tol, c))
        .collect();
    info!(
        "{} of {} seeds converged into {} classes",
        converged,
        cfg.seeds,
        records.len()
    );
    Ok(SearchOutcome {
        records,
        seeds: cfg.seeds,
        converged,
    })
}
