//! Billiards in Finsler geometries.
//!
//! Reflection in the cotangent bundle, geodesics (chords, Larmor arcs and an
//! Euler–Lagrange integrator), a multistart search for periodic orbits as
//! critical points of the cyclic length function, and the closed-form
//! cohomological lower bounds on how many such orbits must exist.

pub mod billiard;
pub mod error;
pub mod experiment;
pub mod geodesic;
pub mod metric;
pub mod orbit;
pub mod table;
pub mod topology;
pub mod vector;

pub use billiard::{billiard_step, reflect, trace, BoundaryState};
pub use error::{Error, Result};
pub use metric::{FinslerMetric, GeodesicModel, Metric, MetricSpec};
pub use table::{conormal, BoundaryPoint, ConvexTable, Perturbation, TableSpec};
pub use vector::{Covector, Vector};
