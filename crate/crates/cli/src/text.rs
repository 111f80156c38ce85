//! Human-readable rendering of a `ReportDocument`.
//!
//! Verdict lines have the form `verdict <name>: <value>`; every value is read
//! from the document itself.

use std::fmt::Write;

use sipcq::optimality::{Outcome, StationarityReport};

use crate::report::{Analysis, ConeSummary, ReportDocument};

fn vec(v: &[f64]) -> String {
    // values that would print as -0.000000 are shown as 0
    let parts: Vec<String> = v.iter().map(|x| format!("{:.6}", if x.abs() < 5e-7 { 0.0 } else { *x })).collect();
    format!("({})", parts.join(", "))
}

fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3e}")
    } else {
        format!("{x}")
    }
}

pub fn render(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "sipcq {} {}", doc.tool_version, doc.command);
    let _ = writeln!(w, "instance  {} (sha256 {})", doc.instance.path, doc.instance.digest);
    let _ = writeln!(w, "variables {}", doc.instance.vars.join(" "));
    if let Some(t) = &doc.solver {
        let _ = writeln!(
            w,
            "solver    {:?} after {} iterations, cost {}, violation {}",
            t.status,
            t.iterations.len(),
            sci(t.cost),
            sci(t.max_violation)
        );
        let _ = writeln!(w, "verdict solver: {:?}", t.status);
    }
    if let Some(p) = &doc.point {
        let _ = writeln!(w, "point     {}", vec(p));
    }
    if let Some(a) = &doc.analysis {
        analysis(w, a);
    }
    out
}

fn analysis(w: &mut String, a: &Analysis) {
    let f = &a.feasibility;
    let _ = writeln!(
        w,
        "feasible  {} (sup g = {}, equality residual {})",
        f.feasible,
        sci(f.max_violation),
        sci(f.equality_residual)
    );
    let _ = writeln!(w, "\nactive sets");
    for s in &a.active_sets {
        let _ = writeln!(w, "  eps {:<8} active {:>6}  eps-active {:>6}  normalized {:>6}", sci(s.eps), s.active, s.eps_active, s.normalized);
    }
    let _ = writeln!(w, "  gradient bound {} (min {})", sci(a.gradient_bound.bound), sci(a.gradient_bound.min_norm));

    let cq = &a.cq;
    let _ = writeln!(w, "\nconstraint qualifications");
    let _ = writeln!(w, "verdict EMFCQ: {:?}", cq.emfcq.verdict);
    let _ = writeln!(w, "  margin {} along {}; {}", sci(cq.emfcq.margin), vec(&cq.emfcq.direction), cq.emfcq.reason);
    let _ = writeln!(w, "verdict PMFCQ: {:?}", cq.pmfcq.verdict);
    let _ = writeln!(w, "  {}", cq.pmfcq.reason);
    for e in &cq.pmfcq.trace {
        let margins: Vec<String> = e.levels.iter().map(|l| sci(l.margin)).collect();
        let _ = writeln!(w, "  eps {:<8} margins [{}] limit {}", sci(e.eps), margins.join(" "), sci(e.limit_estimate));
    }
    let _ = writeln!(w, "verdict NFMCQ: {:?}", cq.nfmcq.verdict);
    let _ = writeln!(w, "  {} scope, {:?}: {}", cq.nfmcq.scope, cq.nfmcq.closedness.status, cq.nfmcq.closedness.reason);
    if let Some(wt) = &cq.nfmcq.closedness.witness {
        let _ = writeln!(w, "  missing ray {} {}", wt.ray.label, vec(&wt.ray.direction));
    }
    let _ = writeln!(w, "verdict SSC: {:?}", cq.ssc.verdict);
    match (&cq.ssc.point, cq.ssc.sup_value) {
        (Some(p), Some(v)) => {
            let _ = writeln!(w, "  Slater point {} with sup g = {}; {}", vec(p), sci(v), cq.ssc.reason);
        }
        _ => {
            let _ = writeln!(w, "  {}", cq.ssc.reason);
        }
    }
    for d in &cq.diagnostics {
        let _ = writeln!(w, "  note: {d}");
    }

    for c in &a.normal_cones {
        cone(w, c);
    }
    let _ = writeln!(w, "\nstationarity");
    for s in &a.stationarity {
        stationarity(w, s);
    }
}

fn cone(w: &mut String, c: &ConeSummary) {
    let name = format!("{:?}", c.variant).to_lowercase();
    let _ = writeln!(w, "\nnormal cone ({name})");
    let _ = writeln!(w, "verdict cone-{name}-valid: {}", c.valid);
    for m in &c.warnings {
        let _ = writeln!(w, "  warning: {m}");
    }
    let _ = writeln!(w, "  regular {}, closedness {:?}", c.regular, c.closedness.status);
    for e in &c.per_eps {
        let _ = writeln!(w, "  eps {:<8} generators {:>6}  lineality {}  rays {}", sci(e.eps), e.generators, e.lineality, e.rays);
    }
    for r in &c.stabilized_rays {
        let _ = writeln!(w, "  ray {} {} attained {}", r.label, vec(&r.direction), r.attained);
    }
    if !c.probes.is_empty() {
        let _ = writeln!(w, "  {:<28} {:>8} {:>12} {:>9}", "direction", "in cone", "quotient", "feasible");
        for p in &c.probes {
            let _ = writeln!(
                w,
                "  {:<28} {:>8} {:>12} {:>9}",
                vec(&p.probe.direction),
                p.in_cone,
                sci(p.probe.max_quotient),
                p.probe.feasible
            );
        }
    }
}

fn stationarity(w: &mut String, s: &StationarityReport) {
    let _ = writeln!(w, "verdict {:?}: {:?}", s.condition, s.outcome);
    let _ = writeln!(w, "  {}", s.reason);
    match s.outcome {
        Outcome::CertificateFound => {
            if let Some(c) = &s.certificate {
                let pairs: Vec<String> = c.support.iter().zip(&c.lambda).map(|(l, v)| format!("{l}={}", sci(*v))).collect();
                let _ = writeln!(w, "  multipliers [{}] residual {}", pairs.join(", "), sci(c.residual));
                if !c.y.is_empty() {
                    let _ = writeln!(w, "  equality multipliers {}", vec(&c.y));
                }
            }
        }
        Outcome::Refuted => {
            if let Some(sep) = &s.separator {
                let _ = writeln!(w, "  separator {} cost slope {}", vec(&sep.direction), sci(sep.cost_slope));
            }
        }
        Outcome::Inconclusive => {}
    }
    if let Some(g) = s.global {
        let _ = writeln!(w, "verdict global: {g}");
    }
    for n in &s.notes {
        let _ = writeln!(w, "  note: {n}");
    }
}
