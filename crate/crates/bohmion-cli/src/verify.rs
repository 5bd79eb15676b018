//! The `verify` operation: run the registered invariant checks and the
//! acceptance scenarios, print a human table, and write machine-readable
//! results.
//!
//! Artifacts: `verify_results.csv` (module, name, residual, tolerance,
//! pass — no timing, so repeated single-thread runs are byte-identical) and
//! `verify_results.json` (full records including detail strings and
//! runtimes, for humans and dashboards).

use bohmion_core::suite::{self, CheckResult};

use crate::output::{fmt_f64, Manifest, RunDir};
use crate::run::{CliError, CliResult};

pub struct VerifySummary {
    pub failed: usize,
}

/// A tolerance override `module/name=value` (or `name=value`); a test hook
/// for the negative control that proves a tampered tolerance turns into a
/// named failure and a nonzero exit.
pub fn parse_overrides(raw: &[String]) -> Result<Vec<(String, f64)>, String> {
    let mut out = Vec::with_capacity(raw.len());
    for item in raw {
        let (key, value) = item
            .rsplit_once('=')
            .ok_or_else(|| format!("override must look like CHECK=TOLERANCE (got \"{item}\")"))?;
        let tol: f64 = value
            .parse()
            .map_err(|_| format!("override tolerance must be a float (got \"{value}\")"))?;
        if key.is_empty() {
            return Err(format!("override names no check (got \"{item}\")"));
        }
        out.push((key.to_string(), tol));
    }
    Ok(out)
}

fn matches_key(result: &CheckResult, key: &str) -> bool {
    key == result.name || key == format!("{}/{}", result.module, result.name)
}

/// Run the checks (optionally filtered), apply overrides, print the table,
/// and write the result artifacts into `dir`. Returns the pass/fail tally;
/// the caller finishes the manifest and maps the tally to an exit code.
pub fn run_verify_into(
    filter: Option<&str>,
    overrides: &[(String, f64)],
    dir: &mut RunDir,
    manifest: &mut Manifest,
) -> CliResult<VerifySummary> {
    let mut results = suite::run(filter);
    if results.is_empty() {
        return Err(CliError::Config(format!(
            "no checks match filter \"{}\"",
            filter.unwrap_or("")
        )));
    }
    for (key, tol) in overrides {
        let mut hit = false;
        for result in results.iter_mut() {
            if matches_key(result, key) {
                result.tolerance = *tol;
                result.pass = result.residual <= *tol;
                hit = true;
            }
        }
        if !hit {
            return Err(CliError::Config(format!("tolerance override matches no check: {key}")));
        }
    }

    let name_width = results
        .iter()
        .map(|r| r.module.len() + 1 + r.name.len())
        .max()
        .unwrap_or(0);
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} {:name_width$}  residual {:>12}  tol {:>8}  ({} ms)",
            format!("{}/{}", r.module, r.name),
            format!("{:.3e}", r.residual),
            format!("{:.0e}", r.tolerance),
            r.runtime_ms,
        );
        if !r.pass {
            println!("     {}", r.detail);
            eprintln!(
                "FAIL {}/{}: residual {:.6e} exceeds tolerance {:.1e}",
                r.module, r.name, r.residual, r.tolerance
            );
        }
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "summary: {} checks, {} passed, {} failed",
        results.len(),
        results.len() - failed,
        failed
    );

    let columns: Vec<String> =
        ["module", "name", "residual", "tolerance", "pass"].map(String::from).to_vec();
    let mut csv = dir.csv("verify_results.csv", &columns).map_err(CliError::Config)?;
    // hand-rolled rows: two string columns precede the numeric ones
    for r in &results {
        csv.text_row(&[
            r.module.to_string(),
            r.name.to_string(),
            fmt_f64(r.residual),
            fmt_f64(r.tolerance),
            r.pass.to_string(),
        ])
        .map_err(CliError::Config)?;
    }
    csv.finish().map_err(CliError::Config)?;
    dir.write_json("verify_results.json", &results).map_err(CliError::Config)?;

    manifest.checks_total = Some(results.len());
    manifest.checks_failed = Some(failed);
    Ok(VerifySummary { failed })
}
