//! One PASS/FAIL line per acceptance criterion. Criteria 1-12 run the full-budget suite
//! in process; criterion 13 runs the binary twice at the quick budget.

use std::process::Command;

use affine_cs::runner::{run, Budget, Check, Experiment, ExperimentConfig};
use serde_json::Value;

const SEED: u64 = 1;

const TITLES: [&str; 13] = [
    "normalization",
    "closed form vs grid quadrature",
    "admissibility 1-D",
    "minimum uncertainty",
    "commutators",
    "K_n consistency",
    "admissibility n-D",
    "resolution of unity",
    "polarization",
    "geometry",
    "polar decomposition and Jacobians",
    "propagator",
    "determinism",
];

fn line(criterion: u8, passed: bool, detail: &str) -> String {
    let title = TITLES[criterion as usize - 1];
    format!("criterion {criterion:>2} {title:<34} {} {detail}", if passed { "PASS" } else { "FAIL" })
}

fn worst(checks: &[&Check]) -> String {
    let failing: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failing.is_empty() {
        format!("({} checks)", checks.len())
    } else {
        format!("({} checks; failing: {})", checks.len(), failing.join(", "))
    }
}

/// The report with run-dependent fields removed.
fn numeric_part(path: &std::path::Path) -> (Value, f64) {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let wall = v["timing"]["wall_seconds"].as_f64().unwrap();
    v.as_object_mut().unwrap().remove("timing");
    (v, wall)
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["first.json", "second.json"] {
        let out = Command::new(env!("CARGO_BIN_EXE_affcs"))
            .args(["verify-all", "--budget", "quick", "--seed", &SEED.to_string(), "--out", name])
            .current_dir(dir.path())
            .output()
            .unwrap();
        if out.status.code() == Some(2) || out.status.code() == Some(3) {
            return (false, format!("run failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        let path = dir.path().join(name);
        let (v, wall) = numeric_part(&path);
        let csv = std::fs::read(path.with_extension("csv")).unwrap();
        runs.push((serde_json::to_string(&v).unwrap(), csv, wall, out.status.success()));
    }
    let same_json = runs[0].0 == runs[1].0;
    let same_csv = runs[0].1 == runs[1].1;
    let total: f64 = runs.iter().map(|r| r.2).sum();
    let passed = same_json && same_csv && total < 600.0 && runs[0].3;
    let detail = format!(
        "(json identical: {same_json}, csv identical: {same_csv}, quick suite passed: {}, {:.1} s for two runs)",
        runs[0].3, total
    );
    (passed, detail)
}

#[test]
fn acceptance() {
    let mut cfg = ExperimentConfig::new(Experiment::VerifyAll);
    cfg.seed = Some(SEED);
    cfg.budget = Budget::Full;
    let report = run(&cfg).expect("full suite runs");
    let mut lines = Vec::new();
    let mut all = true;
    for criterion in 1..=12u8 {
        let checks: Vec<&Check> = report.checks.iter().filter(|c| c.criterion == Some(criterion)).collect();
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
        all &= passed;
        lines.push(line(criterion, passed, &worst(&checks)));
    }
    let (passed, detail) = determinism();
    all &= passed;
    lines.push(line(13, passed, &detail));
    for l in &lines {
        println!("{l}");
    }
    let supporting: Vec<&Check> = report.checks.iter().filter(|c| c.criterion.is_none()).collect();
    println!("supporting checks: {}", worst(&supporting));
    println!("full suite wall time: {:.1} s", report.timing.wall_seconds);
    assert!(all, "acceptance criteria failed:\n{}", lines.join("\n"));
}
