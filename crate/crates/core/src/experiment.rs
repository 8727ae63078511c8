//! Experiment configurations and the reports produced from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::billiard::{trace, BoundaryState};
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::orbit::{find_critical, OrbitFlag, OrbitRecord, SearchConfig};
use crate::table::{ConvexTable, TableSpec};
use crate::topology::{betti_numbers, is_prime, orbit_lower_bound, CohomologyProfile};
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Search,
    Trace,
    Betti,
    Verify,
}

/// Initial condition of a billiard trace. `start` is projected onto the
/// boundary; `direction` must point inward there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub steps: usize,
}

fn default_r() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: Metric,
    pub table: TableSpec,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceConfig>,
    /// Whether the table is assumed generic (Λ Morse). Defaults to whether
    /// the table carries a perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidParameters(format!(
                "config line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Builds the table and checks the metric against it.
    pub fn validate(&self) -> Result<ConvexTable> {
        let table = self.table.build()?;
        self.metric.validate_on(&table)?;
        if self.r < 2 {
            return Err(Error::InvalidParameters(format!("r must be at least 2, got {}", self.r)));
        }
        if self.search.seeds == 0 {
            return Err(Error::InvalidParameters("search.seeds must be positive".into()));
        }
        if let Some(t) = &self.trace {
            if t.steps == 0 {
                return Err(Error::InvalidParameters("trace.steps must be positive".into()));
            }
            for (name, v) in [("trace.start", &t.start), ("trace.direction", &t.direction)] {
                if v.len() != table.dim() {
                    return Err(Error::InvalidParameters(format!(
                        "{name} has {} components, the table has dimension {}",
                        v.len(),
                        table.dim()
                    )));
                }
            }
        }
        Ok(table)
    }

    fn is_generic(&self, table: &ConvexTable) -> bool {
        self.generic.unwrap_or_else(|| table.is_perturbed())
    }

    /// The configuration with defaults made explicit.
    pub fn resolved(&self, table: &ConvexTable) -> ExperimentConfig {
        ExperimentConfig {
            search: self.search.resolved(table, self.r),
            generic: Some(self.is_generic(table)),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub vertices: Vec<Vec<f64>>,
    pub lambda: f64,
    pub residual: f64,
    pub index: Option<usize>,
    pub degeneracy: Option<usize>,
    pub rotation_number: Option<usize>,
    pub flags: Vec<OrbitFlag>,
    pub canonical_key: Vec<f64>,
    pub hits: usize,
}

impl From<&OrbitRecord> for OrbitReport {
    fn from(r: &OrbitRecord) -> Self {
        OrbitReport {
            vertices: r
                .polygon
                .positions()
                .into_iter()
                .map(Vector::into_inner)
                .collect(),
            lambda: r.polygon.lambda_value(),
            residual: r.residual,
            index: r.morse_index,
            degeneracy: r.degeneracy,
            rotation_number: r.rotation_number,
            flags: r.flags.clone(),
            canonical_key: r.canonical_key.clone(),
            hits: r.hits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Category bound, any table.
    General,
    /// Betti-sum bound, generic table.
    Generic,
    /// Planar tables: two orbits per rotation number coprime with r.
    PerRotationNumber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    /// Required count (per rotation number for planar tables).
    pub required: u64,
    /// Classes without disqualifying flags.
    pub found: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_rotation_number: Option<BTreeMap<usize, usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail: bound not met")]
    Fail,
    #[serde(rename = "skipped: non-generic")]
    SkippedNonGeneric,
    #[serde(rename = "skipped: r not prime")]
    SkippedNotPrime,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Fail => 2,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub config: ExperimentConfig,
    pub orbits: Vec<OrbitReport>,
    pub classes: usize,
    pub seeds_converged: usize,
    pub bound: Option<BoundCheck>,
    pub status: Status,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn evaluate_bound(
    d: usize,
    r: usize,
    generic: bool,
    records: &[OrbitRecord],
) -> Result<(Option<BoundCheck>, Status)> {
    let usable: Vec<&OrbitRecord> = records.iter().filter(|r| !r.is_flagged()).collect();
    if !records.is_empty() && usable.is_empty() {
        return Ok((None, Status::SkippedNonGeneric));
    }
    if d == 2 {
        let mut per: BTreeMap<usize, usize> = (1..r).filter(|&k| gcd(k, r) == 1).map(|k| (k, 0)).collect();
        for rec in &usable {
            if let Some(c) = rec.rotation_number.and_then(|k| per.get_mut(&k)) {
                *c += 1;
            }
        }
        let pass = per.values().all(|&c| c >= 2);
        let check = BoundCheck {
            kind: BoundKind::PerRotationNumber,
            required: 2,
            found: usable.len(),
            per_rotation_number: Some(per),
        };
        return Ok((Some(check), if pass { Status::Pass } else { Status::Fail }));
    }
    if !(r >= 3 && is_prime(r)) {
        return Ok((None, Status::SkippedNotPrime));
    }
    let required = orbit_lower_bound(d, r, generic)?;
    let check = BoundCheck {
        kind: if generic {
            BoundKind::Generic
        } else {
            BoundKind::General
        },
        required,
        found: usable.len(),
        per_rotation_number: None,
    };
    let status = if usable.len() as u64 >= required {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok((Some(check), status))
}

pub fn run_search(config: &ExperimentConfig) -> Result<SearchReport> {
    let table = config.validate()?;
    let resolved = config.resolved(&table);
    let outcome = find_critical(&config.metric, &table, config.r, &resolved.search)?;
    let (bound, status) = evaluate_bound(
        table.dim(),
        config.r,
        resolved.generic.unwrap_or(false),
        &outcome.records,
    )?;
    Ok(SearchReport {
        orbits: outcome.records.iter().map(OrbitReport::from).collect(),
        classes: outcome.records.len(),
        seeds_converged: outcome.converged,
        bound,
        status,
        config: resolved,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub states: Vec<TraceState>,
}

pub fn run_trace(config: &ExperimentConfig) -> Result<TraceReport> {
    let table = config.validate()?;
    let t = config
        .trace
        .as_ref()
        .ok_or_else(|| Error::InvalidParameters("trace mode needs a \"trace\" section".into()))?;
    let start = table.project_to_boundary(&Vector::new(t.start.clone()))?;
    let s0 = BoundaryState::new(&config.metric, start, &Vector::new(t.direction.clone()))?;
    let states = trace(&config.metric, &table, &s0, t.steps)?;
    Ok(TraceReport {
        states: states
            .into_iter()
            .map(|s| TraceState {
                x: s.point.position.into_inner(),
                v: s.direction.into_inner(),
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyChecks {
    pub total_equals_generic_bound: bool,
    pub alternating_sum_zero: bool,
    pub cat_equals_general_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub profile: CohomologyProfile,
    pub checks: VerifyChecks,
}

impl VerifyReport {
    pub fn all_hold(&self) -> bool {
        let c = &self.checks;
        c.total_equals_generic_bound && c.alternating_sum_zero && c.cat_equals_general_bound
    }
}

pub fn run_verify(d: usize, r: usize) -> Result<VerifyReport> {
    let profile = betti_numbers(d, r)?;
    let checks = VerifyChecks {
        total_equals_generic_bound: profile.total == profile.bound_generic,
        alternating_sum_zero: profile.alternating_sum == 0,
        cat_equals_general_bound: profile.cat_lower == profile.bound_general,
    };
    Ok(VerifyReport { profile, checks })
}

/// Betti numbers as an aligned two-row table.
pub fn betti_table(profile: &CohomologyProfile) -> String {
    let width = profile.betti.len().to_string().len().max(1);
    let degrees: Vec<String> = (0..profile.betti.len()).map(|n| format!("{n:>width$}")).collect();
    let values: Vec<String> = profile.betti.iter().map(|b| format!("{b:>width$}")).collect();
    format!("degree {}\nbetti  {}\n", degrees.join(" "), values.join(" "))
}
