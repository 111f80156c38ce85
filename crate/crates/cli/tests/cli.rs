use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sipcq_cli::encode::{from_json, to_json};
use sipcq_cli::{cmd_analyze, ReportDocument, Settings};

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name)
}

fn sipcq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sipcq")).args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn schema_errors(doc: &Value) -> Vec<String> {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap())
            .unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_countable_family() {
    let p = instance("countable_cubic.sip");
    let out = sipcq(&["analyze", path_str(&p), "--point=-1,0", "--report", "json", "--deterministic", "--probe-dirs", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let d = json_of(&out);
    assert!(schema_errors(&d).is_empty(), "{:?}", schema_errors(&d));
    let cq = &d["analysis"]["cq"];
    assert_eq!(cq["emfcq"]["verdict"], "Holds");
    assert_eq!(cq["pmfcq"]["verdict"], "Holds");
    assert_eq!(cq["nfmcq"]["verdict"], "Fails");
    assert_eq!(cq["nfmcq"]["closedness"]["status"], "NotClosed");
    let ray = &cq["nfmcq"]["closedness"]["witness"]["ray"]["direction"];
    assert!(ray[0].as_f64().unwrap().abs() < 1e-9 && (ray[1].as_f64().unwrap() + 1.0).abs() < 1e-9);
    let st = d["analysis"]["stationarity"].as_array().unwrap();
    assert_eq!(st[0]["condition"], "UnperturbedKkt");
    assert_eq!(st[0]["outcome"], "Refuted");
    let s = &st[0]["separator"]["direction"];
    assert!(s[0].as_f64().unwrap().abs() < 1e-12 && s[1].as_f64().unwrap() > 0.0);
    assert_eq!(st[1]["outcome"], "CertificateFound");
    assert!(st[1]["certificate"]["support"].as_array().unwrap().iter().any(|l| l.as_str().unwrap().contains("inf")));
    assert_eq!(d["instance"]["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn analyze_interval_family() {
    let p = instance("interval_cubic.sip");
    let out = sipcq(&["analyze", path_str(&p), "--point=-1,0", "--report", "json", "--deterministic", "--probe-dirs", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let d = json_of(&out);
    let cq = &d["analysis"]["cq"];
    assert_eq!(cq["emfcq"]["verdict"], "Holds");
    assert_eq!(cq["pmfcq"]["verdict"], "Fails");
    assert_eq!(cq["nfmcq"]["verdict"], "Holds");
    let cone = &d["analysis"]["normal_cones"][0];
    assert_eq!(cone["valid"], false);
    assert!(!cone["warnings"].as_array().unwrap().is_empty());
    // direction (0,-1) is the fourth of four evenly spaced probes
    let row = &cone["probes"][3];
    assert_eq!(row["probe"]["direction"][1], -1.0);
    assert_eq!(row["in_cone"], false);
    assert_eq!(row["empirical_normal"], true);
}

#[test]
fn infeasible_point_exits_3() {
    let p = instance("countable_cubic.sip");
    let out = sipcq(&["analyze", path_str(&p), "--point=0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("infeasible") && err.contains("g1"), "{err}");
}

#[test]
fn validation_errors_exit_2() {
    let p = instance("countable_cubic.sip");
    assert_eq!(sipcq(&["analyze", path_str(&p), "--point=1,2,3"]).status.code(), Some(2));
    assert_eq!(sipcq(&["analyze", path_str(&p), "--point=a,0"]).status.code(), Some(2));
    assert_eq!(sipcq(&["analyze", "/nonexistent.sip", "--point=0,0"]).status.code(), Some(2));
    assert_eq!(sipcq(&["analyze", path_str(&p), "--point=-1,0", "--eps-schedule=0.1,0.5"]).status.code(), Some(2));
    assert_eq!(sipcq(&["analyze", path_str(&p), "--point=-1,0", "--variant=other"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sip");
    std::fs::write(&bad, "[problem]\nvars = x\n[constraints]\ng = y + 1\n").unwrap();
    let out = sipcq(&["analyze", bad.to_str().unwrap(), "--point=0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_convex_toy() {
    let p = instance("convex_toy.sip");
    let out = sipcq(&["solve", path_str(&p), "--report", "json", "--deterministic", "--probe-dirs", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let d = json_of(&out);
    assert!(schema_errors(&d).is_empty(), "{:?}", schema_errors(&d));
    let x: Vec<f64> = d["point"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x[0] + 0.5).abs() <= 1e-6 && (x[1] + 0.5).abs() <= 1e-6, "{x:?}");
    let st = d["analysis"]["stationarity"].as_array().unwrap();
    assert_eq!(st[0]["outcome"], "CertificateFound");
    assert!((st[0]["certificate"]["lambda"][0].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    let global = st.iter().find(|s| s["condition"] == "ConvexGlobal").unwrap();
    assert_eq!(global["global"], true);
    assert_eq!(d["solver"]["status"], "Converged");
}

#[test]
fn solve_countable_family() {
    let p = instance("countable_cubic.sip");
    let out = sipcq(&["solve", path_str(&p), "--report", "json", "--deterministic", "--probe-dirs", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let d = json_of(&out);
    let x: Vec<f64> = d["point"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x[0] + 1.0).abs() <= 1e-6 && x[1].abs() <= 1e-6, "{x:?}");
}

#[test]
fn solver_limit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let arc = dir.path().join("arc.sip");
    std::fs::write(
        &arc,
        "[problem]\nvars = x1 x2\nminimize = (x1-2)^2 + (x2-2)^2\nconvex = true\nbox = -2 2 ; -2 2\n[index t]\nkind = interval\nlower = 0\nupper = 1.5707963267948966\n[constraints]\ng(t) = x1*cos(t) + x2*sin(t) - 1\n[solver]\nworking_set = 1\n",
    )
    .unwrap();
    let out = sipcq(&["solve", arc.to_str().unwrap(), "--max-iters=1", "--report", "json", "--deterministic"]);
    assert_eq!(out.status.code(), Some(4));
    let d = json_of(&out);
    assert_eq!(d["solver"]["status"], "IterationLimit");
    assert!(d["analysis"].is_null());
    assert!(schema_errors(&d).is_empty(), "{:?}", schema_errors(&d));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let p = instance("interval_cubic.sip");
    let args = ["analyze", path_str(&p), "--point=-1,0", "--report", "json", "--deterministic", "--seed", "5", "--probe-dirs", "3"];
    let a = sipcq(&args);
    let b = sipcq(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains("unix_time"));
    let timed = sipcq(&["analyze", path_str(&p), "--point=-1,0", "--report", "json", "--probe-dirs", "0"]);
    assert!(json_of(&timed)["run"]["elapsed_ms"].is_u64());
}

/// Verdict lines of the text report against the JSON part of `--report both`.
#[test]
fn text_and_json_verdicts_agree() {
    let p = instance("countable_cubic.sip");
    let out = sipcq(&["analyze", path_str(&p), "--point=-1,0", "--report", "both", "--variant", "perturbed,unperturbed", "--probe-dirs", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let all = String::from_utf8(out.stdout).unwrap();
    let split = all.find("\n{").unwrap();
    let (text, json) = all.split_at(split);
    let d: Value = serde_json::from_str(json).unwrap();
    let verdict = |name: &str| -> String {
        let key = format!("verdict {name}: ");
        text.lines().find_map(|l| l.strip_prefix(&key)).unwrap_or_else(|| panic!("no line for {name}")).to_string()
    };
    let cq = &d["analysis"]["cq"];
    for (name, key) in [("EMFCQ", "emfcq"), ("PMFCQ", "pmfcq"), ("NFMCQ", "nfmcq"), ("SSC", "ssc")] {
        assert_eq!(verdict(name), cq[key]["verdict"].as_str().unwrap());
    }
    for s in d["analysis"]["stationarity"].as_array().unwrap() {
        assert_eq!(verdict(s["condition"].as_str().unwrap()), s["outcome"].as_str().unwrap());
    }
    let cones = d["analysis"]["normal_cones"].as_array().unwrap();
    assert_eq!(cones.len(), 2);
    for c in cones {
        let name = c["variant"].as_str().unwrap().to_lowercase();
        assert_eq!(verdict(&format!("cone-{name}-valid")), c["valid"].to_string());
    }
    assert_eq!(cones[1]["valid"], false);
}

#[test]
fn json_out_and_truncation_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let p = instance("countable_cubic.sip");
    let out = sipcq(&[
        "analyze",
        path_str(&p),
        "--point=-1,0",
        "--truncation=500",
        "--probe-dirs=0",
        "--json-out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(d["parameters"]["truncation"], 500);
    // at ε = 0.1 every index up to the truncation is ε-active
    let n = d["analysis"]["active_sets"][0]["eps_active"].as_u64().unwrap();
    assert!((499..=510).contains(&n), "{n}");
    assert_eq!(d["analysis"]["cq"]["nfmcq"]["verdict"], "Fails");
}

#[test]
fn report_round_trips() {
    let s = Settings {
        probe_dirs: 2,
        probe_samples: 200,
        deterministic: true,
        ..Settings::default()
    };
    for (name, x) in [("countable_cubic.sip", [-1.0, 0.0]), ("interval_cubic.sip", [-1.0, 0.0]), ("open_parabola.sip", [0.0, 0.0])] {
        let doc = cmd_analyze(&instance(name), &x, &s).unwrap();
        let text = to_json(&doc).unwrap();
        let back: ReportDocument = from_json(&text).unwrap();
        assert_eq!(back, doc, "{name}");
        assert_eq!(to_json(&back).unwrap(), text);
    }
}
