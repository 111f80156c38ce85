//! The analysis and solve pipelines behind the two subcommands.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use sipcq::cones::membership;
use sipcq::cq::{cq_summary, default_eps_schedule, CqError, CqOptions, SscOptions, DEFAULT_MARGIN_TOL};
use sipcq::model::{
    active_set_in, feasibility_check, gradient_bound_check, materialize, parse_instance, IndexSetDescriptor, MaterializeOptions,
    ModelError, SipInstance, FEASIBILITY_TOL,
};
use sipcq::optimality::{
    convex_global_check, empirical_normal_cone_probe, normal_cone, verify_kkt, verify_perturbed_stationarity, NormalConeOptions,
    OptimalityError, ProbeResult, Variant, DEFAULT_KKT_TOL,
};
use sipcq::solver::{solve, SolverConfig, SolverStatus};

use crate::error::{CliError, EXIT_OK, EXIT_SOLVER_LIMIT};
use crate::report::{
    ActiveSummary, Analysis, ConeSummary, FamilyInfo, InstanceInfo, Parameters, ProbeRow, ReportDocument, RunInfo, LABEL_CAP,
    SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportMode {
    Json,
    Text,
    Both,
}

impl ReportMode {
    pub fn name(self) -> &'static str {
        match self {
            ReportMode::Json => "json",
            ReportMode::Text => "text",
            ReportMode::Both => "both",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Settings {
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
    /// Overrides any seed from the instance's `[solver]` section.
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub report: ReportMode,
    pub max_iters: Option<usize>,
    /// Candidate Slater point checked before the search.
    pub slater_point: Option<Vec<f64>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eps_schedule: default_eps_schedule(),
            margin_tol: DEFAULT_MARGIN_TOL,
            truncation: None,
            variants: vec![Variant::Perturbed],
            probe_dirs: 8,
            probe_samples: 2000,
            probe_radius: 1e-3,
            probe_tol: 1e-3,
            membership_tol: 1e-6,
            kkt_tol: DEFAULT_KKT_TOL,
            seed: None,
            deterministic: false,
            report: ReportMode::Text,
            max_iters: None,
            slater_point: None,
        }
    }
}

impl Settings {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if self.eps_schedule.is_empty() || self.eps_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("--eps-schedule needs positive finite values");
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("--eps-schedule must be strictly decreasing");
        }
        let positive = [
            ("--margin-tol", self.margin_tol),
            ("--probe-radius", self.probe_radius),
            ("--probe-tol", self.probe_tol),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(CliError::Usage(format!("{name} must be positive")));
        }
        if self.variants.is_empty() {
            return bad("--variant needs at least one value");
        }
        if self.truncation == Some(0) || self.max_iters == Some(0) {
            return bad("--truncation and --max-iters must be positive");
        }
        if self.probe_dirs > 0 && self.probe_samples == 0 {
            return bad("--probe-samples must be positive when probing");
        }
        Ok(())
    }

    fn parameters(&self, point: Option<&[f64]>, solver: Option<SolverConfig>) -> Parameters {
        Parameters {
            point: point.map(<[f64]>::to_vec),
            eps_schedule: self.eps_schedule.clone(),
            margin_tol: self.margin_tol,
            truncation: self.truncation,
            variants: self.variants.clone(),
            probe_dirs: self.probe_dirs,
            probe_samples: self.probe_samples,
            probe_radius: self.probe_radius,
            probe_tol: self.probe_tol,
            membership_tol: self.membership_tol,
            kkt_tol: self.kkt_tol,
            seed: self.seed.unwrap_or(0),
            deterministic: self.deterministic,
            report: self.report.name().into(),
            max_iters: self.max_iters,
            slater_point: self.slater_point.clone(),
            solver,
        }
    }
}

/// A parsed instance together with what the report says about its source.
pub struct Loaded {
    pub inst: SipInstance,
    pub info: InstanceInfo,
}

pub fn load(path: &Path, truncation: Option<u64>) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ModelError::Io {
        path: path.display().to_string(),
        message: "not UTF-8".into(),
    })?;
    let mut inst = parse_instance(&text)?;
    if let Some(n) = truncation {
        for f in &mut inst.families {
            if let IndexSetDescriptor::Countable { truncation, .. } = &mut f.set {
                *truncation = n;
            }
        }
        inst.validate()?;
    }
    let info = InstanceInfo {
        path: path.display().to_string(),
        digest: format!("{:x}", Sha256::digest(&bytes)),
        vars: inst.vars.clone(),
        convex: inst.convex,
        families: inst
            .families
            .iter()
            .map(|f| FamilyInfo {
                name: f.name.clone(),
                index: f.index.clone(),
                kind: f.set.kind_name().into(),
            })
            .collect(),
        fixed_constraints: inst.fixed.len(),
        equalities: inst.m(),
    };
    Ok(Loaded { inst, info })
}

/// Parses `"a,b,c"`.
pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("bad coordinate `{}` in point `{s}`", p.trim())))
        })
        .collect()
}

/// `count` unit directions. In the plane they are evenly spaced on the
/// circle; otherwise signed axes come first, then normalized `e_i ± e_j`.
pub fn probe_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let (s, c) = a.sin_cos();
                // exact zeros keep axis directions clean
                let clean = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
                vec![clean(c), clean(s)]
            })
            .collect();
    }
    let mut out = Vec::new();
    let unit = |i: usize, s: f64| {
        let mut v = vec![0.0; n];
        v[i] = s;
        v
    };
    for i in 0..n {
        out.push(unit(i, 1.0));
        out.push(unit(i, -1.0));
    }
    let r = 0.5f64.sqrt();
    for i in 0..n {
        for j in i + 1..n {
            for (a, b) in [(r, r), (r, -r), (-r, r), (-r, -r)] {
                let mut v = vec![0.0; n];
                v[i] = a;
                v[j] = b;
                out.push(v);
            }
        }
    }
    out.truncate(count);
    out
}

pub fn analyze_at(inst: &SipInstance, x: &[f64], s: &Settings) -> Result<Analysis, CliError> {
    inst.check_point(x)?;
    if let Some(p) = &s.slater_point {
        inst.check_point(p)?;
    }
    let feasibility = feasibility_check(inst, x, FEASIBILITY_TOL)?;
    if !feasibility.feasible {
        let (violation, label) = if feasibility.equality_residual > FEASIBILITY_TOL {
            (feasibility.equality_residual, "equalities".to_string())
        } else {
            (feasibility.max_violation, feasibility.worst.clone().unwrap_or_default())
        };
        return Err(CqError::Infeasible { violation, label }.into());
    }
    let seed = s.seed.unwrap_or(0);

    let mat = materialize(inst, x, &MaterializeOptions::default())?;
    let res = mat.analysis_resolution();
    let reports: Vec<_> = s.eps_schedule.iter().map(|&e| active_set_in(&mat, e, res, true)).collect();
    let gradient_bound = gradient_bound_check(&reports[0]);
    let active_sets = reports
        .iter()
        .map(|r| ActiveSummary {
            eps: r.eps,
            active: r.active.len(),
            eps_active: r.eps_active.len(),
            normalized: r.normalized.len(),
            active_labels: r.active.iter().take(LABEL_CAP).map(|e| e.label.clone()).collect(),
        })
        .collect();

    let cq_opts = CqOptions {
        eps_schedule: s.eps_schedule.clone(),
        margin_tol: s.margin_tol,
        ssc: SscOptions {
            seed,
            ..SscOptions::default()
        },
        ssc_candidate: s.slater_point.clone(),
    };
    let cq = cq_summary(inst, x, &cq_opts)?;

    let nc_opts = NormalConeOptions {
        eps_schedule: s.eps_schedule.clone(),
        margin_tol: s.margin_tol,
        seed,
        ..NormalConeOptions::default()
    };
    let directions = probe_directions(inst.n(), s.probe_dirs);
    let probes: Vec<ProbeResult> = directions
        .iter()
        .map(|v| empirical_normal_cone_probe(inst, x, v, s.probe_samples, s.probe_radius, seed))
        .collect::<Result<_, _>>()?;
    let mut normal_cones = Vec::new();
    for &variant in &s.variants {
        let rep = normal_cone(inst, x, variant, &nc_opts)?;
        let mut rows = Vec::new();
        for (v, p) in directions.iter().zip(&probes) {
            let in_cone = membership(&rep.stabilized, v, s.membership_tol, true)
                .map_err(OptimalityError::from)?
                .is_member();
            rows.push(ProbeRow {
                in_cone,
                empirical_normal: (!p.inconclusive).then_some(p.max_quotient <= s.probe_tol),
                probe: p.clone(),
            });
        }
        normal_cones.push(ConeSummary::new(&rep, rows));
    }

    let mut stationarity = vec![
        verify_kkt(inst, x, s.kkt_tol)?,
        verify_perturbed_stationarity(inst, x, &nc_opts, s.kkt_tol)?,
    ];
    if inst.convex {
        stationarity.push(convex_global_check(inst, x, s.kkt_tol)?);
    }
    Ok(Analysis {
        feasibility,
        active_sets,
        gradient_bound,
        cq,
        normal_cones,
        stationarity,
    })
}

fn document(command: &str, loaded: &Loaded, parameters: Parameters, start: Instant, s: &Settings) -> ReportDocument {
    ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        instance: loaded.info.clone(),
        parameters,
        point: None,
        analysis: None,
        solver: None,
        run: (!s.deterministic).then(|| RunInfo {
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_ms: start.elapsed().as_millis() as u64,
        }),
    }
}

pub fn cmd_analyze(path: &Path, point: &[f64], s: &Settings) -> Result<ReportDocument, CliError> {
    let start = Instant::now();
    s.validate()?;
    let loaded = load(path, s.truncation)?;
    let analysis = analyze_at(&loaded.inst, point, s)?;
    let mut doc = document("analyze", &loaded, s.parameters(Some(point), None), start, s);
    doc.point = Some(point.to_vec());
    doc.analysis = Some(analysis);
    Ok(doc)
}

/// Solver run followed by the analysis at its candidate. The exit code is
/// `EXIT_SOLVER_LIMIT` when the outer loop ran out of iterations; the
/// analysis is then skipped because the candidate need not be feasible.
pub fn cmd_solve(path: &Path, s: &Settings) -> Result<(ReportDocument, i32), CliError> {
    let start = Instant::now();
    s.validate()?;
    let loaded = load(path, s.truncation)?;
    let mut cfg = SolverConfig::default().with_options(&loaded.inst.solver_options)?;
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(m) = s.max_iters {
        cfg.max_outer = m;
    }
    cfg.validate()?;
    let (x, trace) = solve(&loaded.inst, &cfg)?;
    let converged = trace.status == SolverStatus::Converged;
    let analysis = if converged { Some(analyze_at(&loaded.inst, &x, s)?) } else { None };
    let mut doc = document("solve", &loaded, s.parameters(None, Some(cfg)), start, s);
    doc.point = Some(x);
    doc.analysis = analysis;
    doc.solver = Some(trace);
    Ok((doc, if converged { EXIT_OK } else { EXIT_SOLVER_LIMIT }))
}
