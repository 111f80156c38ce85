//! The report document written by both subcommands.

use serde::{Deserialize, Serialize};
use sipcq::cones::{ClosednessVerdict, LimitRay};
use sipcq::cq::CqReport;
use sipcq::model::{Feasibility, GradientBound};
use sipcq::optimality::{NormalConeRep, ProbeResult, StationarityReport, Variant};
use sipcq::solver::{SolverConfig, SolverTrace};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub instance: InstanceInfo,
    pub parameters: Parameters,
    /// Absent when the solver stopped before producing a usable candidate.
    pub point: Option<Vec<f64>>,
    pub analysis: Option<Analysis>,
    pub solver: Option<SolverTrace>,
    /// Omitted under `--deterministic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub path: String,
    /// SHA-256 of the instance file bytes, lowercase hex.
    pub digest: String,
    pub vars: Vec<String>,
    pub convex: bool,
    pub families: Vec<FamilyInfo>,
    pub fixed_constraints: usize,
    pub equalities: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyInfo {
    pub name: String,
    pub index: String,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub point: Option<Vec<f64>>,
    pub eps_schedule: Vec<f64>,
    pub margin_tol: f64,
    pub truncation: Option<u64>,
    pub variants: Vec<Variant>,
    pub probe_dirs: usize,
    pub probe_samples: usize,
    pub probe_radius: f64,
    pub probe_tol: f64,
    pub membership_tol: f64,
    pub kkt_tol: f64,
    pub seed: u64,
    pub deterministic: bool,
    pub report: String,
    pub max_iters: Option<usize>,
    pub slater_point: Option<Vec<f64>>,
    pub solver: Option<SolverConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub unix_time: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub feasibility: Feasibility,
    pub active_sets: Vec<ActiveSummary>,
    pub gradient_bound: GradientBound,
    pub cq: CqReport,
    pub normal_cones: Vec<ConeSummary>,
    pub stationarity: Vec<StationarityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSummary {
    pub eps: f64,
    pub active: usize,
    pub eps_active: usize,
    pub normalized: usize,
    /// Labels of the active indices, capped at `LABEL_CAP`.
    pub active_labels: Vec<String>,
}

pub const LABEL_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCounts {
    pub eps: f64,
    pub generators: usize,
    pub lineality: usize,
    pub rays: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSummary {
    pub variant: Variant,
    pub valid: bool,
    pub warnings: Vec<String>,
    pub regular: bool,
    pub closedness: ClosednessVerdict,
    pub per_eps: Vec<ConeCounts>,
    pub stabilized: ConeCounts,
    pub stabilized_rays: Vec<LimitRay>,
    pub probes: Vec<ProbeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    /// Membership in the stabilized cone, limit rays included.
    pub in_cone: bool,
    /// `max_quotient <= probe_tol` with enough feasible samples.
    pub empirical_normal: Option<bool>,
    pub probe: ProbeResult,
}

impl ConeSummary {
    pub fn new(rep: &NormalConeRep, probes: Vec<ProbeRow>) -> Self {
        let counts = |eps: f64, c: &sipcq::cones::GeneratedCone| ConeCounts {
            eps,
            generators: c.generators.len(),
            lineality: c.lineality.len(),
            rays: c.rays.len(),
        };
        let last_eps = rep.cones.last().map_or(0.0, |c| c.eps);
        ConeSummary {
            variant: rep.variant,
            valid: rep.valid,
            warnings: rep.warnings.clone(),
            regular: rep.regular,
            closedness: rep.closedness.clone(),
            per_eps: rep.cones.iter().map(|c| counts(c.eps, &c.cone)).collect(),
            stabilized: counts(last_eps, &rep.stabilized),
            stabilized_rays: rep.stabilized.rays.clone(),
            probes,
        }
    }
}
