//! Scenario runners: build a validated system from the config, propagate it,
//! and stream artifacts through [`crate::output`].
//!
//! Error discipline: everything detectable before propagation is a
//! configuration error (exit 2); a failure during propagation is a numerical
//! abort (exit 3) that leaves a `last_good_*` snapshot of the most recent
//! finite state plus a manifest describing the abort.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use bohmion_core::bohmion::{ehrenfest_energy, ehrenfest_step, EFBohmionSystem, SingleSurfaceSystem};
use bohmion_core::electronic::{
    bloch_from_rho, bo_surfaces, purity, rho_from_bloch, spinor_from_bloch, TwoLevelHamiltonian,
};
use bohmion_core::geometry::{
    berry_curvature, berry_curvature_from_connection, berry_phase_loop, qgt, qgt_covariance_check,
    qgt_uncertainty_check, random_bloch_field, takabayasi_check,
};
use bohmion_core::grid::{spectral_derivative, Grid, GridField};
use bohmion_core::grid_reference::{
    cold_fluid_check, mean_position, schrodinger_energy_1d, vibronic_energy, ColdFluidReport,
    SplitStep1d, SplitStepVibronic,
};
use bohmion_core::kernels::BohmionEnsemble;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::output::{fmt_f64, ConventionRecord, Manifest, RunDir};

/// How an invocation failed, mapped to exit codes by `main`.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or config (exit 2).
    Config(String),
    /// Propagation produced a non-finite or inconsistent state (exit 3).
    Numerical { message: String, last_good: Option<String> },
    /// Verification ran and at least one check failed (exit 1).
    VerifyFailed { failed: usize },
}

pub type CliResult<T> = Result<T, CliError>;

fn config_err<T>(message: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(message.into()))
}

/// Grid metadata replicated into JSON sidecars and reports.
#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

impl From<&Grid> for GridMeta {
    fn from(g: &Grid) -> Self {
        GridMeta { lo: g.lo().to_vec(), hi: g.hi().to_vec(), n: g.shape().to_vec() }
    }
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

/// Column names for one per-point quantity: `q2` in one dimension,
/// `q2_1`, `q2_2`, … above.
fn vector_cols(label: &str, point: usize, dim: usize, out: &mut Vec<String>) {
    if dim == 1 {
        out.push(format!("{label}{point}"));
    } else {
        for ax in 1..=dim {
            out.push(format!("{label}{point}_{ax}"));
        }
    }
}

/// Sample boundaries: multiples of `stride` plus the final step.
fn is_sample(step: u64, stride: u64, steps: u64) -> bool {
    step % stride == 0 || step == steps
}

/// Tracks the largest deviation of a conserved quantity from its value at
/// the first sample: relative when the reference is away from zero.
struct Drift {
    reference: Option<f64>,
    relative: bool,
    max: f64,
}

impl Drift {
    fn relative() -> Self {
        Drift { reference: None, relative: true, max: 0.0 }
    }
    fn absolute() -> Self {
        Drift { reference: None, relative: false, max: 0.0 }
    }
    fn update(&mut self, value: f64) {
        match self.reference {
            None => self.reference = Some(value),
            Some(r) => {
                let dev = if self.relative {
                    (value - r).abs() / r.abs().max(1e-300)
                } else {
                    (value - r).abs()
                };
                self.max = self.max.max(dev);
            }
        }
    }
}

fn numerical(step: u64, err: impl std::fmt::Display, last_good: Option<String>) -> CliError {
    CliError::Numerical {
        message: format!("numerical abort at step {step}: {err}"),
        last_good,
    }
}

/// Write a one-row CSV holding the last finite state; returns its name.
fn abort_snapshot(dir: &mut RunDir, columns: &[String], row: &[f64]) -> Option<String> {
    let name = "last_good.csv";
    let mut csv = dir.csv(name, columns).ok()?;
    csv.row(row).ok()?;
    csv.finish().ok()?;
    Some(name.to_string())
}

// ---------------------------------------------------------------------------
// point-ensemble scenarios
// ---------------------------------------------------------------------------

fn build_ensemble(cfg: &ScenarioConfig, dim: usize, with_rho: bool) -> CliResult<BohmionEnsemble> {
    let spec = cfg.ensemble.as_ref().expect("required section checked");
    let n = spec.weights.len();
    if spec.positions.len() != n * dim {
        return config_err(format!(
            "[ensemble] positions must hold {dim} entries per point ({} points, got {})",
            n,
            spec.positions.len()
        ));
    }
    let rho = if with_rho {
        let bloch = match &spec.bloch {
            Some(b) => b,
            None => return config_err("[ensemble] this scenario kind needs bloch vectors"),
        };
        let mut rho = Vec::with_capacity(n);
        for (a, nvec) in bloch.iter().enumerate() {
            let len = (nvec[0] * nvec[0] + nvec[1] * nvec[1] + nvec[2] * nvec[2]).sqrt();
            if len > 1.0 + 1e-12 {
                return config_err(format!(
                    "[ensemble] bloch vector {} has length {len:.6} > 1",
                    a + 1
                ));
            }
            let target = cfg.conventions.rho_trace.target(spec.weights[a]);
            rho.push(rho_from_bloch(*nvec, target));
        }
        Some(rho)
    } else {
        if spec.bloch.is_some() {
            return config_err(
                "[ensemble] bloch vectors are not used on a single surface; remove them",
            );
        }
        None
    };
    Ok(BohmionEnsemble {
        dim,
        weights: spec.weights.clone(),
        positions: spec.positions.clone(),
        momenta: spec.momenta.clone(),
        rho,
    })
}

/// Single-surface ensemble run. Trajectory row: time, per point the
/// position, momentum, and force components, then total_energy, kinetic,
/// potential, quantum_term.
fn run_bohmion(cfg: &ScenarioConfig, dir: &mut RunDir, manifest: &mut Manifest) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    let dim = grid.dim();
    let ensemble = build_ensemble(cfg, dim, false)?;
    let n = ensemble.n();
    let mut sys = SingleSurfaceSystem::new(
        ensemble,
        cfg.kernel.clone().unwrap(),
        cfg.potential.clone().unwrap(),
        grid,
        cfg.constants.m,
        cfg.constants.hbar,
        cfg.conventions.quantum_term,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let it = cfg.integrator.unwrap();
    let mut columns = vec!["time".to_string()];
    for a in 1..=n {
        vector_cols("q", a, dim, &mut columns);
        vector_cols("p", a, dim, &mut columns);
        vector_cols("f", a, dim, &mut columns);
    }
    for label in ["total_energy", "kinetic", "potential", "quantum_term"] {
        columns.push(label.to_string());
    }
    let mut state_cols = vec!["time".to_string()];
    for a in 1..=n {
        vector_cols("q", a, dim, &mut state_cols);
        vector_cols("p", a, dim, &mut state_cols);
    }

    let mut csv = dir.csv("trajectory.csv", &columns).map_err(CliError::Config)?;
    let mut energy_drift = Drift::relative();

    let mut sample = |sys: &SingleSurfaceSystem, step: u64| -> Result<(), String> {
        let t = it.dt * step as f64;
        let force = sys.force().map_err(|e| e.to_string())?;
        let e = sys.energy_parts().map_err(|e| e.to_string())?;
        energy_drift.update(e.total);
        let mut row = Vec::with_capacity(columns.len());
        row.push(t);
        for a in 0..n {
            row.extend_from_slice(sys.ensemble.q(a));
            row.extend_from_slice(sys.ensemble.p(a));
            row.extend_from_slice(&force[a * dim..(a + 1) * dim]);
        }
        row.extend_from_slice(&[e.total, e.kinetic, e.potential, e.quantum]);
        csv.row(&row)
    };

    sample(&sys, 0).map_err(CliError::Config)?;
    for step in 1..=it.steps {
        let saved_q = sys.ensemble.positions.clone();
        let saved_p = sys.ensemble.momenta.clone();
        if let Err(e) = sys.step(it.dt) {
            let mut row = vec![it.dt * (step - 1) as f64];
            row.extend_from_slice(&saved_q);
            row.extend_from_slice(&saved_p);
            let snap = abort_snapshot(dir, &state_cols, &row);
            return Err(numerical(step, e, snap));
        }
        if is_sample(step, it.sample_stride, it.steps) {
            sample(&sys, step).map_err(|e| numerical(step, e, None))?;
        }
    }
    csv.finish().map_err(CliError::Config)?;
    manifest.drift.insert("energy_rel".into(), energy_drift.max);
    Ok(())
}

/// Mixed quantum–classical ensemble run. Trajectory row: time, per point the
/// position and momentum components, tr ϱ, purity, and the Bloch vector,
/// then total_energy, kinetic, electronic, quantum_term.
fn run_ef_bohmion(
    cfg: &ScenarioConfig,
    dir: &mut RunDir,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    let dim = grid.dim();
    let c = &cfg.constants;
    if c.c.len() != dim {
        return config_err(format!(
            "[constants] C/D must have one entry per grid axis (got {}, grid is {dim}-D)",
            c.c.len()
        ));
    }
    let hamiltonian = TwoLevelHamiltonian::new(c.big_m, c.omega, c.c.clone(), c.d.clone(), c.e)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ensemble = build_ensemble(cfg, dim, true)?;
    let n = ensemble.n();
    let mut sys = EFBohmionSystem::new(
        ensemble,
        cfg.kernel.clone().unwrap(),
        hamiltonian,
        grid,
        c.big_m,
        c.hbar,
        cfg.conventions.quantum_term,
        cfg.conventions.rho_trace,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let it = cfg.integrator.unwrap();
    let mut columns = vec!["time".to_string()];
    for a in 1..=n {
        vector_cols("q", a, dim, &mut columns);
        vector_cols("p", a, dim, &mut columns);
        for label in ["tr_rho", "purity", "n_x", "n_y", "n_z"] {
            columns.push(format!("{label}_{a}"));
        }
    }
    for label in ["total_energy", "kinetic", "electronic", "quantum_term"] {
        columns.push(label.to_string());
    }

    let mut csv = dir.csv("trajectory.csv", &columns).map_err(CliError::Config)?;
    let mut energy_drift = Drift::relative();
    let mut trace_drift = Drift::absolute();
    let mut purity_drift = Drift::absolute();

    let mut sample = |sys: &EFBohmionSystem, step: u64| -> Result<(), String> {
        let t = it.dt * step as f64;
        let e = sys.energy_parts().map_err(|e| e.to_string())?;
        energy_drift.update(e.total);
        let mut row = Vec::with_capacity(columns.len());
        row.push(t);
        let mut trace_dev = 0.0f64;
        let mut purity_dev = 0.0f64;
        for a in 0..n {
            let rho = &sys.rho()[a];
            let tr = rho.trace().re;
            let pur = purity(rho);
            let bloch = bloch_from_rho(rho).map_err(|e| e.to_string())?;
            trace_dev = trace_dev.max((tr - sys.ensemble.weights[a]).abs());
            purity_dev = purity_dev.max(pur);
            row.extend_from_slice(sys.ensemble.q(a));
            row.extend_from_slice(sys.ensemble.p(a));
            row.extend_from_slice(&[tr, pur, bloch[0], bloch[1], bloch[2]]);
        }
        trace_drift.update(trace_dev);
        purity_drift.update(purity_dev);
        row.extend_from_slice(&[e.total, e.kinetic, e.electronic, e.quantum]);
        csv.row(&row)
    };

    sample(&sys, 0).map_err(CliError::Config)?;

    let mut state_cols = vec!["time".to_string()];
    for a in 1..=n {
        vector_cols("q", a, dim, &mut state_cols);
        vector_cols("p", a, dim, &mut state_cols);
        for label in ["tr_rho", "n_x", "n_y", "n_z"] {
            state_cols.push(format!("{label}_{a}"));
        }
    }
    for step in 1..=it.steps {
        let saved = sys.ensemble.clone();
        if let Err(e) = sys.step(it.dt) {
            let mut row = vec![it.dt * (step - 1) as f64];
            let rho = saved.rho.as_deref().unwrap_or(&[]);
            for a in 0..n {
                row.extend_from_slice(saved.q(a));
                row.extend_from_slice(saved.p(a));
                let tr = rho[a].trace().re;
                let bloch = bloch_from_rho(&rho[a]).unwrap_or([f64::NAN; 3]);
                row.extend_from_slice(&[tr, bloch[0], bloch[1], bloch[2]]);
            }
            let snap = abort_snapshot(dir, &state_cols, &row);
            return Err(numerical(step, e, snap));
        }
        if is_sample(step, it.sample_stride, it.steps) {
            sample(&sys, step).map_err(|e| numerical(step, e, None))?;
        }
    }
    csv.finish().map_err(CliError::Config)?;
    manifest.drift.insert("energy_rel".into(), energy_drift.max);
    manifest.drift.insert("trace_abs".into(), trace_drift.max);
    manifest.drift.insert("purity_abs".into(), purity_drift.max);
    Ok(())
}

/// Mean-field reference trajectory: one classical point carrying a unit
/// spinor. Same column layout as the mixed run with one point; the
/// quantum_term column is identically zero (no kernel coupling).
fn run_ehrenfest(
    cfg: &ScenarioConfig,
    dir: &mut RunDir,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let c = &cfg.constants;
    let dim = c.c.len();
    let spec = cfg.ensemble.as_ref().unwrap();
    if spec.weights.len() != 1 {
        return config_err(format!(
            "[ensemble] the mean-field reference propagates exactly one point (got {})",
            spec.weights.len()
        ));
    }
    if spec.positions.len() != dim {
        return config_err(format!(
            "[ensemble] positions must match the coupling dimension {dim} (got {})",
            spec.positions.len()
        ));
    }
    let bloch0 = match &spec.bloch {
        Some(b) => b[0],
        None => return config_err("[ensemble] the mean-field reference needs one bloch vector"),
    };
    let hamiltonian = TwoLevelHamiltonian::new(c.big_m, c.omega, c.c.clone(), c.d.clone(), c.e)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut psi = spinor_from_bloch(bloch0).map_err(|e| {
        CliError::Config(format!("[ensemble] bloch vector must be unit length: {e}"))
    })?;
    let mut q = spec.positions.clone();
    let mut p = spec.momenta.clone();

    let it = cfg.integrator.unwrap();
    let mut columns = vec!["time".to_string()];
    vector_cols("q", 1, dim, &mut columns);
    vector_cols("p", 1, dim, &mut columns);
    for label in ["tr_rho_1", "purity_1", "n_x_1", "n_y_1", "n_z_1"] {
        columns.push(label.to_string());
    }
    for label in ["total_energy", "kinetic", "electronic", "quantum_term"] {
        columns.push(label.to_string());
    }
    let mut state_cols = vec!["time".to_string()];
    vector_cols("q", 1, dim, &mut state_cols);
    vector_cols("p", 1, dim, &mut state_cols);
    for label in ["n_x_1", "n_y_1", "n_z_1"] {
        state_cols.push(label.to_string());
    }

    let mut csv = dir.csv("trajectory.csv", &columns).map_err(CliError::Config)?;
    let mut energy_drift = Drift::relative();
    let mut norm_drift = Drift::absolute();

    let spinor_bloch = |psi: &[Complex64; 2]| -> [f64; 3] {
        let cross = psi[0].conj() * psi[1];
        [
            2.0 * cross.re,
            2.0 * cross.im,
            psi[0].norm_sqr() - psi[1].norm_sqr(),
        ]
    };

    let mut sample = |q: &[f64], p: &[f64], psi: &[Complex64; 2], step: u64| -> Result<(), String> {
        let t = it.dt * step as f64;
        let total = ehrenfest_energy(q, p, psi, &hamiltonian, c.big_m);
        let kinetic: f64 = p.iter().map(|v| v * v).sum::<f64>() / (2.0 * c.big_m);
        let norm_sq = psi[0].norm_sqr() + psi[1].norm_sqr();
        energy_drift.update(total);
        norm_drift.update(norm_sq.sqrt());
        let bloch = spinor_bloch(psi);
        let mut row = Vec::with_capacity(columns.len());
        row.push(t);
        row.extend_from_slice(q);
        row.extend_from_slice(p);
        row.extend_from_slice(&[norm_sq, 1.0, bloch[0], bloch[1], bloch[2]]);
        row.extend_from_slice(&[total, kinetic, total - kinetic, 0.0]);
        csv.row(&row)
    };

    sample(&q, &p, &psi, 0).map_err(CliError::Config)?;
    for step in 1..=it.steps {
        let (sq, sp, spsi) = (q.clone(), p.clone(), psi);
        if let Err(e) = ehrenfest_step(&mut q, &mut p, &mut psi, &hamiltonian, c.big_m, c.hbar, it.dt)
        {
            let mut row = vec![it.dt * (step - 1) as f64];
            row.extend_from_slice(&sq);
            row.extend_from_slice(&sp);
            row.extend_from_slice(&spinor_bloch(&spsi));
            let snap = abort_snapshot(dir, &state_cols, &row);
            return Err(numerical(step, e, snap));
        }
        if is_sample(step, it.sample_stride, it.steps) {
            sample(&q, &p, &psi, step).map_err(|e| numerical(step, e, None))?;
        }
    }
    csv.finish().map_err(CliError::Config)?;
    manifest.drift.insert("energy_rel".into(), energy_drift.max);
    manifest.drift.insert("norm_abs".into(), norm_drift.max);
    Ok(())
}

// ---------------------------------------------------------------------------
// grid scenarios
// ---------------------------------------------------------------------------

/// JSON sidecar accompanying each field snapshot.
#[derive(Debug, Serialize)]
struct SnapshotMeta {
    field: &'static str,
    step: u64,
    time: f64,
    grid: GridMeta,
    ncomp: usize,
    norm: f64,
    component_norms: Vec<f64>,
    energy: f64,
    mean_position: f64,
}

/// Write `psi_<step>.csv` (+ `.json` sidecar): grid coordinate, then the
/// real and imaginary parts of each component.
fn write_snapshot(
    dir: &mut RunDir,
    psi: &GridField,
    step: u64,
    time: f64,
    energy: f64,
    stem: &str,
) -> Result<(), String> {
    let grid = psi.grid();
    let ncomp = psi.ncomp();
    let mut columns = vec!["x".to_string()];
    for comp in 0..ncomp {
        columns.push(format!("re{comp}"));
        columns.push(format!("im{comp}"));
    }
    let mut csv = dir.csv(&format!("{stem}.csv"), &columns)?;
    let xs = grid.axis_coords(0);
    let mut row = vec![0.0; 1 + 2 * ncomp];
    for (i, &x) in xs.iter().enumerate() {
        row[0] = x;
        for comp in 0..ncomp {
            let v = psi.comp(comp)[i];
            row[1 + 2 * comp] = v.re;
            row[2 + 2 * comp] = v.im;
        }
        csv.row(&row)?;
    }
    csv.finish()?;

    let cell = grid.cell_volume();
    let component_norms: Vec<f64> = (0..ncomp)
        .map(|c| {
            (psi.comp(c).iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
        })
        .collect();
    let meta = SnapshotMeta {
        field: "psi",
        step,
        time,
        grid: GridMeta::from(grid),
        ncomp,
        norm: psi.norm_sq().sqrt(),
        component_norms,
        energy,
        mean_position: mean_position(psi, 0).map_err(|e| e.to_string())?,
    };
    dir.write_json(&format!("{stem}.json"), &meta)
}

/// Normalized Gaussian packet exp(−(x−c)²/4σ²)·exp(ik(x−c)/ħ) on `grid`.
fn gaussian_packet(
    grid: &Grid,
    center: f64,
    sigma: f64,
    momentum: f64,
    hbar: f64,
) -> Result<GridField, String> {
    let mut psi = GridField::from_fn(grid.clone(), |x| {
        let dx = x[0] - center;
        let envelope = (-dx * dx / (4.0 * sigma * sigma)).exp();
        Complex64::from_polar(envelope, momentum * dx / hbar)
    })
    .map_err(|e| e.to_string())?;
    let norm = psi.norm_sq().sqrt();
    if !(norm > 0.0) {
        return Err("[initial] packet has zero norm on this grid".into());
    }
    let scale = 1.0 / norm;
    for v in psi.comp_mut(0) {
        *v *= scale;
    }
    Ok(psi)
}

fn run_grid_1d(cfg: &ScenarioConfig, dir: &mut RunDir, manifest: &mut Manifest) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    if grid.dim() != 1 {
        return config_err("[grid] scalar grid propagation is one-dimensional");
    }
    let c = &cfg.constants;
    let potential_spec = cfg.potential.as_ref().unwrap();
    potential_spec.validate(1).map_err(|e| CliError::Config(e.to_string()))?;
    let xs = grid.axis_coords(0);
    let mut potential = Vec::with_capacity(xs.len());
    for &x in &xs {
        potential.push(potential_spec.eval(&[x]).map_err(|e| CliError::Config(e.to_string()))?);
    }
    let init = cfg.initial.as_ref().unwrap();
    let mut psi = gaussian_packet(&grid, init.center, init.sigma, init.momentum, c.hbar)
        .map_err(CliError::Config)?;

    let it = cfg.integrator.unwrap();
    let stepper = SplitStep1d::new(&grid, &potential, c.m, c.hbar, it.dt)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut norm_drift = Drift::absolute();
    let mut energy_drift = Drift::relative();
    let energy_of = |psi: &GridField| -> Result<f64, String> {
        schrodinger_energy_1d(psi, &potential, c.m, c.hbar).map_err(|e| e.to_string())
    };

    let mut snapshot = |dir: &mut RunDir, psi: &GridField, step: u64| -> Result<(), String> {
        let e = energy_of(psi)?;
        norm_drift.update(psi.norm_sq().sqrt());
        energy_drift.update(e);
        write_snapshot(dir, psi, step, it.dt * step as f64, e, &format!("psi_{step:08}"))
    };

    snapshot(dir, &psi, 0).map_err(CliError::Config)?;
    let mut done: u64 = 0;
    while done < it.steps {
        let segment = it.sample_stride.min(it.steps - done);
        let saved = psi.clone();
        if let Err(e) = stepper.run(&mut psi, segment as usize) {
            let last = energy_of(&saved)
                .ok()
                .and_then(|en| {
                    write_snapshot(dir, &saved, done, it.dt * done as f64, en, "last_good_psi")
                        .ok()
                })
                .map(|_| "last_good_psi.csv".to_string());
            return Err(numerical(done + segment, e, last));
        }
        done += segment;
        snapshot(dir, &psi, done).map_err(|e| numerical(done, e, None))?;
    }
    manifest.drift.insert("norm_abs".into(), norm_drift.max);
    manifest.drift.insert("energy_rel".into(), energy_drift.max);
    Ok(())
}

fn run_grid_vibronic(
    cfg: &ScenarioConfig,
    dir: &mut RunDir,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    if grid.dim() != 1 {
        return config_err("[grid] vibronic grid propagation is one-dimensional");
    }
    let c = &cfg.constants;
    if c.c.len() != 1 {
        return config_err("[constants] vibronic propagation needs one-entry C and D");
    }
    let hamiltonian = TwoLevelHamiltonian::new(c.big_m, c.omega, c.c.clone(), c.d.clone(), c.e)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let init = cfg.initial.as_ref().unwrap();
    let amps = init.amplitudes.unwrap_or([1.0, 0.0]);
    let amp_norm = (amps[0] * amps[0] + amps[1] * amps[1]).sqrt();
    let (a0, a1) = (amps[0] / amp_norm, amps[1] / amp_norm);
    let mut psi = GridField::from_fn2(grid.clone(), |x| {
        let dx = x[0] - init.center;
        let envelope = (-dx * dx / (4.0 * init.sigma * init.sigma)).exp();
        let packet = Complex64::from_polar(envelope, init.momentum * dx / c.hbar);
        [packet * a0, packet * a1]
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    let norm = psi.norm_sq().sqrt();
    if !(norm > 0.0) {
        return config_err("[initial] packet has zero norm on this grid");
    }
    for comp in 0..2 {
        for v in psi.comp_mut(comp) {
            *v /= norm;
        }
    }

    let it = cfg.integrator.unwrap();
    let stepper = SplitStepVibronic::new(&grid, &hamiltonian, c.big_m, c.hbar, it.dt)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut norm_drift = Drift::absolute();
    let mut energy_drift = Drift::relative();
    let energy_of = |psi: &GridField| -> Result<f64, String> {
        vibronic_energy(psi, &hamiltonian, c.big_m, c.hbar).map_err(|e| e.to_string())
    };

    let mut snapshot = |dir: &mut RunDir, psi: &GridField, step: u64| -> Result<(), String> {
        let e = energy_of(psi)?;
        norm_drift.update(psi.norm_sq().sqrt());
        energy_drift.update(e);
        write_snapshot(dir, psi, step, it.dt * step as f64, e, &format!("psi_{step:08}"))
    };

    snapshot(dir, &psi, 0).map_err(CliError::Config)?;
    let mut done: u64 = 0;
    while done < it.steps {
        let segment = it.sample_stride.min(it.steps - done);
        let saved = psi.clone();
        if let Err(e) = stepper.run(&mut psi, segment as usize) {
            let last = energy_of(&saved)
                .ok()
                .and_then(|en| {
                    write_snapshot(dir, &saved, done, it.dt * done as f64, en, "last_good_psi")
                        .ok()
                })
                .map(|_| "last_good_psi.csv".to_string());
            return Err(numerical(done + segment, e, last));
        }
        done += segment;
        snapshot(dir, &psi, done).map_err(|e| numerical(done, e, None))?;
    }
    manifest.drift.insert("norm_abs".into(), norm_drift.max);
    manifest.drift.insert("energy_rel".into(), energy_drift.max);
    Ok(())
}

// ---------------------------------------------------------------------------
// geometry suite
// ---------------------------------------------------------------------------

/// One entry of `geometry_report.json`.
#[derive(Debug, Serialize)]
struct GeometryRecord {
    check_name: &'static str,
    max_residual: f64,
    location: String,
    grid_meta: GridMeta,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct BerryPhaseReport {
    band: &'static str,
    center: [f64; 2],
    radius: f64,
    points: usize,
    measured_phase: f64,
    expected_phase: f64,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

/// Distance between two angles on the circle.
fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Running (value, location) maximum.
struct Peak {
    value: f64,
    location: String,
}

impl Peak {
    fn new() -> Self {
        Peak { value: 0.0, location: "—".to_string() }
    }
    fn update(&mut self, value: f64, location: impl FnOnce() -> String) {
        if value > self.value || self.location == "—" {
            self.value = value;
            self.location = location();
        }
    }
}

fn node_location(grid: &Grid, flat: usize, seed: u64) -> String {
    let mut x = vec![0.0; grid.dim()];
    grid.point(flat, &mut x);
    let coords: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
    format!("field seed {seed}, node {flat} at ({})", coords.join(", "))
}

fn run_geometry(cfg: &ScenarioConfig, dir: &mut RunDir, _manifest: &mut Manifest) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    if grid.dim() != 2 {
        return config_err("[grid] the geometry battery runs on a two-dimensional parameter grid");
    }
    let c = &cfg.constants;
    if c.c.len() != 2 {
        return config_err(
            "[constants] loop holonomies need two-axis couplings (C and D of length 2)",
        );
    }
    let hamiltonian = TwoLevelHamiltonian::new(c.big_m, c.omega, c.c.clone(), c.d.clone(), c.e)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let loop_spec = cfg.loop_spec.as_ref().unwrap();

    // --- loop holonomy -----------------------------------------------------
    let k = loop_spec.points;
    let mut points = Vec::with_capacity(2 * k);
    for i in 0..k {
        let angle = TAU * i as f64 / k as f64;
        points.push(loop_spec.center[0] + loop_spec.radius * angle.cos());
        points.push(loop_spec.center[1] + loop_spec.radius * angle.sin());
    }
    let phase = berry_phase_loop(&hamiltonian, &points, loop_spec.band)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let residual = angle_distance(phase, loop_spec.expected_phase);
    const PHASE_TOL: f64 = 1e-3;

    let mut csv = dir
        .csv(
            "berry_loop.csv",
            &["i", "r_1", "r_2", "e_lower", "e_upper"].map(String::from),
        )
        .map_err(CliError::Config)?;
    for i in 0..k {
        let r = [points[2 * i], points[2 * i + 1]];
        let (a, b) = hamiltonian.eval(&r);
        let surfaces = bo_surfaces(a, b);
        csv.row(&[i as f64, r[0], r[1], surfaces.e_lower, surfaces.e_upper])
            .map_err(CliError::Config)?;
    }
    csv.finish().map_err(CliError::Config)?;

    let band_name = match loop_spec.band {
        bohmion_core::geometry::Band::Lower => "lower",
        bohmion_core::geometry::Band::Upper => "upper",
    };
    dir.write_json(
        "berry_phase.json",
        &BerryPhaseReport {
            band: band_name,
            center: loop_spec.center,
            radius: loop_spec.radius,
            points: k,
            measured_phase: phase,
            expected_phase: loop_spec.expected_phase,
            residual,
            tolerance: PHASE_TOL,
            pass: residual <= PHASE_TOL,
        },
    )
    .map_err(CliError::Config)?;

    let mut records = vec![GeometryRecord {
        check_name: "berry_phase_loop",
        max_residual: residual,
        location: format!(
            "loop center ({}, {}), radius {}, {k} points, {band_name} band; measured phase {}",
            fmt_f64(loop_spec.center[0]),
            fmt_f64(loop_spec.center[1]),
            fmt_f64(loop_spec.radius),
            fmt_f64(phase),
        ),
        grid_meta: GridMeta::from(&grid),
        pass: residual <= PHASE_TOL,
    }];

    // --- random-field identity battery --------------------------------------
    if let Some(geo) = &cfg.geometry {
        let len = grid.len();
        let mut covariance = Peak::new();
        let mut curl = Peak::new();
        let mut slack = Peak::new();
        let mut pullback = Peak::new();
        let mut mermin_ho = Peak::new();
        for seed in cfg.seed..cfg.seed + geo.field_count {
            let (state, theta, phi) =
                random_bloch_field(&grid, c.hbar, seed).map_err(|e| CliError::Config(e.to_string()))?;
            let step = |e: bohmion_core::Error| CliError::Numerical {
                message: format!("geometry battery failed at seed {seed}: {e}"),
                last_good: None,
            };

            covariance.update(qgt_covariance_check(&state).map_err(step)?, || {
                format!("field seed {seed}")
            });

            let from_qgt = berry_curvature(&state).map_err(step)?;
            let from_connection = berry_curvature_from_connection(&state).map_err(step)?;
            for i in 0..len {
                curl.update((from_qgt[i] - from_connection[i]).abs(), || {
                    node_location(&grid, i, seed)
                });
            }

            let margins = qgt_uncertainty_check(&state).map_err(step)?;
            slack.update((-margins.schrodinger).max(0.0), || {
                format!("field seed {seed} (schrodinger)")
            });
            slack.update((-margins.robertson).max(0.0), || {
                format!("field seed {seed} (robertson)")
            });

            let q = qgt(&state).map_err(step)?;
            let to_complex =
                |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
            let theta_c = to_complex(&theta);
            let phi_c = to_complex(&phi);
            let mut dtheta = Vec::new();
            let mut dphi = Vec::new();
            for axis in 0..2 {
                dtheta.push(spectral_derivative(&grid, &theta_c, axis).map_err(step)?);
                dphi.push(spectral_derivative(&grid, &phi_c, axis).map_err(step)?);
            }
            for flat in 0..len {
                let st = theta[flat].sin();
                for i in 0..2 {
                    for j in 0..2 {
                        let metric_expect = 0.25
                            * (dtheta[i][flat].re * dtheta[j][flat].re
                                + st * st * dphi[i][flat].re * dphi[j][flat].re);
                        let curvature_expect = 0.5
                            * st
                            * (dtheta[i][flat].re * dphi[j][flat].re
                                - dtheta[j][flat].re * dphi[i][flat].re);
                        pullback.update((q.metric(flat, i, j) - metric_expect).abs(), || {
                            node_location(&grid, flat, seed)
                        });
                        pullback.update(
                            (q.curvature(flat, i, j) - curvature_expect).abs(),
                            || node_location(&grid, flat, seed),
                        );
                    }
                }
            }

            mermin_ho.update(takabayasi_check(&state).map_err(step)?, || {
                format!("field seed {seed}")
            });
        }

        for (name, peak, tol) in [
            ("qgt_covariance", &covariance, 1e-10),
            ("curvature_curl_agreement", &curl, 1e-8),
            ("uncertainty_slack", &slack, 1e-12),
            ("bloch_pullback_closed_form", &pullback, 1e-8),
            ("mermin_ho_identity", &mermin_ho, 1e-7),
        ] {
            records.push(GeometryRecord {
                check_name: name,
                max_residual: peak.value,
                location: peak.location.clone(),
                grid_meta: GridMeta::from(&grid),
                pass: peak.value <= tol,
            });
        }
    }

    dir.write_json("geometry_report.json", &records).map_err(CliError::Config)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cold fluid
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ColdFluidRunReport {
    coarse: ColdFluidReport,
    fine: ColdFluidReport,
    /// fine/coarse residual ratios; first-order remainders should at least
    /// halve when the grid doubles.
    diag_ratio: f64,
    current_ratio: f64,
    pass: bool,
}

fn run_cold_fluid(cfg: &ScenarioConfig, dir: &mut RunDir, _manifest: &mut Manifest) -> CliResult<()> {
    let grid = cfg.grid.as_ref().unwrap().build().map_err(CliError::Config)?;
    if grid.dim() != 1 {
        return config_err("[grid] the cold-fluid check is one-dimensional");
    }
    let spec = cfg.cold_fluid.as_ref().unwrap();
    let c = &cfg.constants;
    let (center, sigma, slope, spring) =
        (spec.center, spec.sigma, spec.velocity_slope, spec.spring);
    let density = move |x: f64| (-(x - center) * (x - center) / (sigma * sigma)).exp();
    let velocity = move |x: f64| slope * x;
    let potential = move |x: f64| 0.5 * spring * x * x;

    let coarse = cold_fluid_check(&grid, density, velocity, potential, c.m, c.hbar)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let fine_grid = Grid::new(
        grid.lo().to_vec(),
        grid.hi().to_vec(),
        grid.shape().iter().map(|&n| 2 * n).collect(),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let fine = cold_fluid_check(&fine_grid, density, velocity, potential, c.m, c.hbar)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let ratio = |f: f64, co: f64| if co < 1e-14 { 0.0 } else { f / co };
    let diag_ratio = ratio(fine.max_diag_residual, coarse.max_diag_residual);
    let current_ratio = ratio(fine.max_current_residual, coarse.max_current_residual);
    let pass = diag_ratio <= 0.5 && current_ratio <= 0.5 && coarse.energy_residual <= 1e-6;

    let mut csv = dir
        .csv(
            "cold_fluid_fields.csv",
            &["x", "density", "velocity", "potential"].map(String::from),
        )
        .map_err(CliError::Config)?;
    for &x in &grid.axis_coords(0) {
        csv.row(&[x, density(x), velocity(x), potential(x)]).map_err(CliError::Config)?;
    }
    csv.finish().map_err(CliError::Config)?;

    dir.write_json(
        "cold_fluid_report.json",
        &ColdFluidRunReport { coarse, fine, diag_ratio, current_ratio, pass },
    )
    .map_err(CliError::Config)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

/// Run one scenario into `out_dir`. The manifest is written even when the
/// run aborts numerically, so the abort context is machine-readable.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    config_bytes: &[u8],
    out_dir: &Path,
    threads: usize,
) -> CliResult<()> {
    let unused: Vec<String> = cfg.unused_sections().iter().map(|s| s.to_string()).collect();
    for section in &unused {
        eprintln!(
            "note: section [{section}] is not used by scenario kind \"{}\"",
            cfg.scenario.name()
        );
    }
    let mut dir = RunDir::create(out_dir).map_err(CliError::Config)?;
    let mut manifest = Manifest::new(
        cfg.scenario.name(),
        crate::output::sha256_hex(config_bytes),
        cfg.seed,
        threads,
        ConventionRecord::from(&cfg.conventions),
        unused,
    );

    let outcome = match cfg.scenario {
        ScenarioKind::Bohmion => run_bohmion(cfg, &mut dir, &mut manifest),
        ScenarioKind::EfBohmion => run_ef_bohmion(cfg, &mut dir, &mut manifest),
        ScenarioKind::Ehrenfest => run_ehrenfest(cfg, &mut dir, &mut manifest),
        ScenarioKind::Grid1d => run_grid_1d(cfg, &mut dir, &mut manifest),
        ScenarioKind::GridVibronic => run_grid_vibronic(cfg, &mut dir, &mut manifest),
        ScenarioKind::GeometrySuite => run_geometry(cfg, &mut dir, &mut manifest),
        ScenarioKind::ColdFluid => run_cold_fluid(cfg, &mut dir, &mut manifest),
        ScenarioKind::VerifyAll => {
            let summary = crate::verify::run_verify_into(
                cfg.filter.as_deref(),
                &[],
                &mut dir,
                &mut manifest,
            )?;
            dir.finish(&mut manifest).map_err(CliError::Config)?;
            return if summary.failed == 0 {
                Ok(())
            } else {
                Err(CliError::VerifyFailed { failed: summary.failed })
            };
        }
    };

    match outcome {
        Ok(()) => {
            dir.finish(&mut manifest).map_err(CliError::Config)?;
            Ok(())
        }
        Err(CliError::Numerical { message, last_good }) => {
            manifest.aborted = true;
            manifest.abort_message = Some(message.clone());
            manifest.last_good_snapshot = last_good.clone();
            dir.finish(&mut manifest).map_err(CliError::Config)?;
            Err(CliError::Numerical { message, last_good })
        }
        Err(other) => Err(other),
    }
}
