//! Acceptance gate: the eleven release criteria, printed one line each.
//!
//! Criteria 1–10 are the scenario-level checks from the verification suite,
//! run sequentially on a single worker thread so the wall-clock budgets mean
//! what they say. Criterion 11 exercises the compiled binary twice and
//! byte-compares the CSV artifacts it writes.
//!
//! Run with `--nocapture` to see the per-criterion lines on success; on any
//! failure the panic message repeats the failing criteria.

use std::fs;
use std::process::Command;

use bohmion_core::suite;

/// Wall-clock budgets (milliseconds) that are part of the criteria
/// themselves, keyed by check name.
const RUNTIME_BUDGETS_MS: &[(&str, u64)] = &[
    ("criterion_01_berry_phase", 1_000),
    ("criterion_02_ef_conservation", 60_000),
    ("criterion_09_qgt_battery", 60_000),
];

#[test]
fn acceptance_criteria() {
    // The conservation and battery budgets are quoted single-threaded, so the
    // whole suite runs inside a one-worker pool.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let results = pool.install(|| suite::run(Some("acceptance")));
    assert_eq!(results.len(), 10, "expected the ten suite-level acceptance criteria");

    let mut failures: Vec<String> = Vec::new();
    for r in &results {
        let mut pass = r.pass;
        let mut note = String::new();
        if let Some(&(_, budget)) = RUNTIME_BUDGETS_MS.iter().find(|(n, _)| *n == r.name) {
            if r.runtime_ms > budget {
                pass = false;
                note = format!("; runtime {} ms OVER budget {} ms", r.runtime_ms, budget);
            } else {
                note = format!("; runtime {} ms within {} ms budget", r.runtime_ms, budget);
            }
        }
        println!(
            "{} {} residual {:.3e} (tol {:.1e}, {} ms): {}{}",
            if pass { "PASS" } else { "FAIL" },
            r.name,
            r.residual,
            r.tolerance,
            r.runtime_ms,
            r.detail,
            note,
        );
        if !pass {
            failures.push(r.name.to_string());
        }
    }

    match verify_twice_byte_identical() {
        Ok(detail) => {
            println!("PASS criterion_11_deterministic_artifacts: {detail}");
        }
        Err(e) => {
            println!("FAIL criterion_11_deterministic_artifacts: {e}");
            failures.push("criterion_11_deterministic_artifacts".into());
        }
    }

    assert!(
        failures.is_empty(),
        "acceptance criteria failed: {}",
        failures.join(", ")
    );
}

/// Criterion 11: two single-threaded verification runs of the binary write
/// byte-identical CSV (and manifest) artifacts.
fn verify_twice_byte_identical() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = tmp.path().join(sub);
        let out = Command::new(env!("CARGO_BIN_EXE_bohmion-dyn"))
            .args(["verify", "--threads", "1", "--out"])
            .arg(&out_dir)
            .current_dir(tmp.path())
            .output()
            .map_err(|e| format!("binary did not start: {e}"))?;
        if !out.status.success() {
            return Err(format!(
                "verify run {sub} exited {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        let csv = fs::read(out_dir.join("verify_results.csv"))
            .map_err(|e| format!("verify run {sub} wrote no CSV: {e}"))?;
        let manifest = fs::read(out_dir.join("manifest.json"))
            .map_err(|e| format!("verify run {sub} wrote no manifest: {e}"))?;
        outputs.push((csv, manifest));
    }
    if outputs[0].0 != outputs[1].0 {
        return Err("verify_results.csv differs between identical runs".into());
    }
    if outputs[0].1 != outputs[1].1 {
        return Err("manifest.json differs between identical runs".into());
    }
    Ok(format!(
        "two `verify --threads 1` runs byte-identical ({} CSV bytes)",
        outputs[0].0.len()
    ))
}
