//! Time integration of the particle-like ("Bohmion") models.
//!
//! Two systems share the kernel-integral machinery:
//!
//! * `SingleSurfaceSystem` — N weighted points on one electronic surface with
//!   potential energy U({q}) = Σ_a w_a V(q_a) + (ħ²/8m) Σ_ab w_a w_b I_ab.
//!   The ħ² term is the smoothed Fisher-information energy (positive for
//!   Gaussian kernels), and the conserved energy is T + U.
//! * `EFBohmionSystem` — the mixed quantum–classical model: each point also
//!   carries a 2×2 electronic matrix ϱ_a evolving unitarily under
//!   Ĥ_a^eff = Ĥ_e(q_a) + (ħ²/2M) Σ_b I_ab ϱ_b, which is the ϱ-derivative of
//!   the quadratic coupling energy (ħ²/4M) Σ_ab (⟨ϱ_a|ϱ_b⟩ − w_a w_b) I_ab —
//!   the factor 2 between the two coefficients is what makes the total energy
//!   a conserved quantity of the coupled flow.
//!
//! Both steppers are Strang compositions built on velocity Verlet; the
//! electronic substep uses an implicit-midpoint fixed point so the whole EF
//! step is time-reversible to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::electronic::TwoLevelHamiltonian;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{
    bohmion_integrals, BohmionEnsemble, Kernel, PairIntegrals, RhoTrace, DEFAULT_FLOOR_REL,
};
use crate::matrix2::{expm_two_level, Matrix2};
use crate::verlet::{check_finite, verlet_step};

/// Convergence threshold (max entry change) of the electronic midpoint fixed
/// point.
pub const FIXED_POINT_TOL: f64 = 1e-15;
/// Iteration cap; non-convergence aborts the step as a numerical error.
pub const FIXED_POINT_MAX_ITER: usize = 60;

// ---------------------------------------------------------------------------
// external potentials
// ---------------------------------------------------------------------------

/// Uniform-knot natural cubic spline, the tabulated-potential representation.
///
/// Serialized as its knot data; the second-derivative table is rebuilt on
/// deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineKnots", into = "SplineKnots")]
pub struct CubicSpline {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

/// Serialized form of [`CubicSpline`]: uniformly spaced samples on [lo, hi].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineKnots {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl TryFrom<SplineKnots> for CubicSpline {
    type Error = Error;
    fn try_from(k: SplineKnots) -> Result<Self> {
        CubicSpline::new(k.lo, k.hi, k.values)
    }
}

impl From<CubicSpline> for SplineKnots {
    fn from(s: CubicSpline) -> Self {
        SplineKnots { lo: s.lo, hi: s.hi, values: s.values }
    }
}

impl CubicSpline {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Config(format!(
                "spline range [{lo}, {hi}] is not a proper interval"
            )));
        }
        if values.len() < 4 {
            return Err(Error::Config(format!(
                "spline needs at least 4 knots (got {})",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite spline value".into()));
        }
        let n = values.len();
        let h = (hi - lo) / (n - 1) as f64;
        // Natural boundary conditions: M_0 = M_{n−1} = 0; interior rows
        // M_{i−1} + 4 M_i + M_{i+1} = 6(y_{i+1} − 2y_i + y_{i−1})/h².
        let m = n - 2;
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        let rhs = |i: usize| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        cp[0] = 0.25;
        dp[0] = rhs(1) / 4.0;
        for k in 1..m {
            let denom = 4.0 - cp[k - 1];
            cp[k] = 1.0 / denom;
            dp[k] = (rhs(k + 1) - dp[k - 1]) / denom;
        }
        let mut second = vec![0.0; n];
        second[m] = dp[m - 1];
        for k in (1..m).rev() {
            second[k] = dp[k - 1] - cp[k - 1] * second[k + 1];
        }
        Ok(CubicSpline { lo, hi, values, second })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !x.is_finite() || x < self.lo || x > self.hi {
            return Err(Error::OutOfTable { x, lo: self.lo, hi: self.hi });
        }
        let h = self.h();
        let idx = (((x - self.lo) / h) as usize).min(self.values.len() - 2);
        Ok((idx, x - (self.lo + idx as f64 * h)))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (i, t) = self.locate(x)?;
        let h = self.h();
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        Ok(y0 + t * (b + t * (m0 / 2.0 + t * (m1 - m0) / (6.0 * h))))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        let (i, t) = self.locate(x)?;
        let h = self.h();
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        Ok(b + t * (m0 + t * (m1 - m0) / (2.0 * h)))
    }
}

/// External potential families with analytic gradients. No user code runs:
/// configurations can only select from these shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Potential {
    /// V(q) = ½ k |q|².
    Harmonic { spring: f64 },
    /// V(q) = a|q|⁴ − b|q|², wells at |q| = √(b/2a) for b > 0.
    QuarticDoubleWell { quartic: f64, quadratic: f64 },
    /// Natural cubic spline through uniform samples; one dimension only.
    Tabulated { table: CubicSpline },
}

impl Potential {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Potential::Harmonic { spring } => {
                if !(spring.is_finite() && *spring >= 0.0) {
                    return Err(Error::Config(format!(
                        "harmonic spring must be non-negative (got {spring})"
                    )));
                }
            }
            Potential::QuarticDoubleWell { quartic, quadratic } => {
                if !(quartic.is_finite() && *quartic > 0.0) || !quadratic.is_finite() {
                    return Err(Error::Config(format!(
                        "double well needs a positive quartic coefficient (got {quartic}, {quadratic})"
                    )));
                }
            }
            Potential::Tabulated { .. } => {
                if dim != 1 {
                    return Err(Error::Config(format!(
                        "tabulated potentials are one-dimensional (ensemble dimension {dim})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, q: &[f64]) -> Result<f64> {
        match self {
            Potential::Harmonic { spring } => {
                Ok(0.5 * spring * q.iter().map(|x| x * x).sum::<f64>())
            }
            Potential::QuarticDoubleWell { quartic, quadratic } => {
                let r2: f64 = q.iter().map(|x| x * x).sum();
                Ok(quartic * r2 * r2 - quadratic * r2)
            }
            Potential::Tabulated { table } => table.eval(q[0]),
        }
    }

    pub fn grad(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Potential::Harmonic { spring } => {
                for (o, &x) in out.iter_mut().zip(q) {
                    *o = spring * x;
                }
            }
            Potential::QuarticDoubleWell { quartic, quadratic } => {
                let r2: f64 = q.iter().map(|x| x * x).sum();
                let s = 4.0 * quartic * r2 - 2.0 * quadratic;
                for (o, &x) in out.iter_mut().zip(q) {
                    *o = s * x;
                }
            }
            Potential::Tabulated { table } => {
                out[0] = table.deriv(q[0])?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// single-surface model
// ---------------------------------------------------------------------------

/// Energy breakdown of a single-surface state.
#[derive(Debug, Clone, Copy)]
pub struct SingleSurfaceEnergy {
    pub kinetic: f64,
    pub potential: f64,
    pub quantum: f64,
    pub total: f64,
}

/// N weighted points with kernel-regularized quantum coupling on one surface.
#[derive(Debug, Clone)]
pub struct SingleSurfaceSystem {
    pub ensemble: BohmionEnsemble,
    pub kernel: Kernel,
    pub potential: Potential,
    pub grid: Grid,
    pub mass: f64,
    pub hbar: f64,
    pub quantum_term: bool,
    pub floor_rel: f64,
}

impl SingleSurfaceSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ensemble: BohmionEnsemble,
        kernel: Kernel,
        potential: Potential,
        grid: Grid,
        mass: f64,
        hbar: f64,
        quantum_term: bool,
    ) -> Result<Self> {
        kernel.validate()?;
        ensemble.validate(RhoTrace::Weight)?;
        if ensemble.rho.is_some() {
            return Err(Error::InvalidEnsemble(
                "single-surface ensembles carry no electronic matrices".into(),
            ));
        }
        potential.validate(ensemble.dim)?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Config(format!("mass must be positive (got {mass})")));
        }
        if !(hbar.is_finite() && hbar >= 0.0) {
            return Err(Error::Config(format!("hbar must be non-negative (got {hbar})")));
        }
        if kernel.dim() != ensemble.dim || grid.dim() != ensemble.dim {
            return Err(Error::Config(format!(
                "dimension mismatch: kernel {}, ensemble {}, grid {}",
                kernel.dim(),
                ensemble.dim,
                grid.dim()
            )));
        }
        if quantum_term && hbar != 0.0 && !kernel.supports_gradients() {
            return Err(Error::InvalidKernel(
                "the quantum force needs a twice-differentiable kernel".into(),
            ));
        }
        Ok(SingleSurfaceSystem {
            ensemble,
            kernel,
            potential,
            grid,
            mass,
            hbar,
            quantum_term,
            floor_rel: DEFAULT_FLOOR_REL,
        })
    }

    fn quantum_active(&self) -> bool {
        self.quantum_term && self.hbar != 0.0
    }

    pub fn kinetic_energy(&self) -> f64 {
        let mut t = 0.0;
        for a in 0..self.ensemble.n() {
            let p2: f64 = self.ensemble.p(a).iter().map(|p| p * p).sum();
            t += p2 / (2.0 * self.mass * self.ensemble.weights[a]);
        }
        t
    }

    /// Full configuration energy U(q) = Σ_a w_a V(q_a) + (ħ²/8m) Σ_ab w_a w_b I_ab
    /// at trial positions — the function whose negative gradient is the force.
    pub fn potential_energy_at(&self, positions: &[f64]) -> Result<f64> {
        let d = self.ensemble.dim;
        let mut u = 0.0;
        for a in 0..self.ensemble.n() {
            u += self.ensemble.weights[a] * self.potential.eval(&positions[a * d..(a + 1) * d])?;
        }
        if self.quantum_active() {
            let scratch = self.ensemble.with_positions(positions);
            let ints =
                bohmion_integrals(&scratch, &self.kernel, &self.grid, self.floor_rel, false)?;
            u += self.quantum_coefficient() * weighted_integral_sum(&ints, &self.ensemble.weights);
        }
        Ok(u)
    }

    fn quantum_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (8.0 * self.mass)
    }

    pub fn energy_parts(&self) -> Result<SingleSurfaceEnergy> {
        let d = self.ensemble.dim;
        let mut potential = 0.0;
        for a in 0..self.ensemble.n() {
            potential +=
                self.ensemble.weights[a] * self.potential.eval(&self.ensemble.positions[a * d..(a + 1) * d])?;
        }
        let quantum = if self.quantum_active() {
            let ints = bohmion_integrals(
                &self.ensemble,
                &self.kernel,
                &self.grid,
                self.floor_rel,
                false,
            )?;
            self.quantum_coefficient() * weighted_integral_sum(&ints, &self.ensemble.weights)
        } else {
            0.0
        };
        let kinetic = self.kinetic_energy();
        Ok(SingleSurfaceEnergy { kinetic, potential, quantum, total: kinetic + potential + quantum })
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(self.energy_parts()?.total)
    }

    /// Force at trial positions, written into `out` (flat N×d).
    pub fn force_at(&self, positions: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.ensemble.n();
        let d = self.ensemble.dim;
        let mut gbuf = vec![0.0; d];
        for a in 0..n {
            self.potential.grad(&positions[a * d..(a + 1) * d], &mut gbuf)?;
            let w = self.ensemble.weights[a];
            for ax in 0..d {
                out[a * d + ax] = -w * gbuf[ax];
            }
        }
        if self.quantum_active() {
            let scratch = self.ensemble.with_positions(positions);
            let ints = bohmion_integrals(&scratch, &self.kernel, &self.grid, self.floor_rel, true)?;
            let lam = self.quantum_coefficient();
            let w = &self.ensemble.weights;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let coeff = lam * w[b] * w[c];
                        let g = ints.d_i(a, b, c);
                        for ax in 0..d {
                            out[a * d + ax] -= coeff * g[ax];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn force(&self) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.ensemble.positions.len()];
        self.force_at(&self.ensemble.positions, &mut f)?;
        Ok(f)
    }

    /// One velocity-Verlet step; weights untouched.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::Config(format!("step size must be finite and nonzero (got {dt})")));
        }
        let masses = per_dof_masses(&self.ensemble, self.mass);
        let mut q = self.ensemble.positions.clone();
        let mut p = self.ensemble.momenta.clone();
        verlet_step(&mut q, &mut p, &masses, dt, |pos, f| self.force_at(pos, f))?;
        self.ensemble.positions = q;
        self.ensemble.momenta = p;
        Ok(())
    }
}

fn per_dof_masses(ensemble: &BohmionEnsemble, mass: f64) -> Vec<f64> {
    let d = ensemble.dim;
    let mut m = vec![0.0; ensemble.n() * d];
    for a in 0..ensemble.n() {
        for ax in 0..d {
            m[a * d + ax] = mass * ensemble.weights[a];
        }
    }
    m
}

fn weighted_integral_sum(ints: &PairIntegrals, w: &[f64]) -> f64 {
    let n = w.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += w[a] * w[b] * ints.i_ab(a, b);
        }
    }
    s
}

/// Forces on every point of a single-surface system.
pub fn single_surface_force(system: &SingleSurfaceSystem) -> Result<Vec<f64>> {
    system.force()
}

/// One Verlet step of a single-surface system.
pub fn step_single_surface(system: &mut SingleSurfaceSystem, dt: f64) -> Result<()> {
    system.step(dt)
}

// ---------------------------------------------------------------------------
// mixed quantum–classical model
// ---------------------------------------------------------------------------

/// Energy breakdown of a mixed quantum–classical state.
#[derive(Debug, Clone, Copy)]
pub struct EFEnergy {
    pub kinetic: f64,
    pub electronic: f64,
    pub quantum: f64,
    pub total: f64,
}

/// N weighted points, each carrying an electronic density matrix ϱ_a, with
/// kernel-mediated ϱϱ coupling.
#[derive(Debug, Clone)]
pub struct EFBohmionSystem {
    pub ensemble: BohmionEnsemble,
    pub kernel: Kernel,
    pub hamiltonian: TwoLevelHamiltonian,
    pub grid: Grid,
    /// Nuclear mass M.
    pub mass: f64,
    pub hbar: f64,
    pub quantum_term: bool,
    pub rho_trace: RhoTrace,
    pub floor_rel: f64,
}

impl EFBohmionSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ensemble: BohmionEnsemble,
        kernel: Kernel,
        hamiltonian: TwoLevelHamiltonian,
        grid: Grid,
        mass: f64,
        hbar: f64,
        quantum_term: bool,
        rho_trace: RhoTrace,
    ) -> Result<Self> {
        kernel.validate()?;
        hamiltonian.validate()?;
        ensemble.validate(rho_trace)?;
        if ensemble.rho.is_none() {
            return Err(Error::InvalidEnsemble(
                "mixed quantum–classical ensembles need one electronic matrix per point".into(),
            ));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Config(format!("nuclear mass must be positive (got {mass})")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Config(format!(
                "hbar must be positive for electronic evolution (got {hbar})"
            )));
        }
        if kernel.dim() != ensemble.dim
            || grid.dim() != ensemble.dim
            || hamiltonian.dim() != ensemble.dim
        {
            return Err(Error::Config(format!(
                "dimension mismatch: kernel {}, ensemble {}, grid {}, electronic couplings {}",
                kernel.dim(),
                ensemble.dim,
                grid.dim(),
                hamiltonian.dim()
            )));
        }
        if quantum_term && !kernel.supports_gradients() {
            return Err(Error::InvalidKernel(
                "the quantum force needs a twice-differentiable kernel".into(),
            ));
        }
        Ok(EFBohmionSystem {
            ensemble,
            kernel,
            hamiltonian,
            grid,
            mass,
            hbar,
            quantum_term,
            rho_trace,
            floor_rel: DEFAULT_FLOOR_REL,
        })
    }

    pub fn rho(&self) -> &[Matrix2] {
        self.ensemble.rho.as_deref().expect("validated at construction")
    }

    pub fn integrals(&self, with_grad: bool) -> Result<PairIntegrals> {
        bohmion_integrals(&self.ensemble, &self.kernel, &self.grid, self.floor_rel, with_grad)
    }

    /// Coefficient of the ϱϱ coupling in the energy.
    fn energy_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (4.0 * self.mass)
    }

    /// Coefficient of Σ_b I_ab ϱ_b in the effective Hamiltonian: twice the
    /// energy coefficient, from differentiating the symmetric double sum.
    fn heff_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    /// G_ab = ⟨ϱ_a|ϱ_b⟩ − w_a w_b, the coupling coefficients of the quantum
    /// term. Zero on the diagonal for pure states under the trace-w
    /// convention.
    fn coupling_matrix(&self, rho: &[Matrix2]) -> Vec<f64> {
        let n = rho.len();
        let w = &self.ensemble.weights;
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = rho[a].re_tr_mul(&rho[b]) - w[a] * w[b];
            }
        }
        g
    }

    fn heff_at(
        &self,
        a: usize,
        positions: &[f64],
        rho: &[Matrix2],
        ints: Option<&PairIntegrals>,
    ) -> Matrix2 {
        let d = self.ensemble.dim;
        let mut h = self.hamiltonian.matrix(&positions[a * d..(a + 1) * d]);
        if let Some(ints) = ints {
            let mut coup = Matrix2::zero();
            for (b, r) in rho.iter().enumerate() {
                coup = coup.add(&r.scale_re(ints.i_ab(a, b)));
            }
            h = h.add(&coup.scale_re(self.heff_coefficient()));
        }
        h
    }

    pub fn kinetic_energy(&self) -> f64 {
        let mut t = 0.0;
        for a in 0..self.ensemble.n() {
            let p2: f64 = self.ensemble.p(a).iter().map(|p| p * p).sum();
            t += p2 / (2.0 * self.mass * self.ensemble.weights[a]);
        }
        t
    }

    /// Electronic + quantum coupling energy at trial state: the part of the
    /// total energy whose negative q-gradient (at frozen ϱ) is the force.
    pub fn potential_energy_at(&self, positions: &[f64], rho: &[Matrix2]) -> Result<f64> {
        let d = self.ensemble.dim;
        let n = self.ensemble.n();
        let mut e = 0.0;
        for (a, r) in rho.iter().enumerate() {
            let h = self.hamiltonian.matrix(&positions[a * d..(a + 1) * d]);
            e += r.re_tr_mul(&h);
        }
        if self.quantum_term {
            let scratch = self.ensemble.with_positions(positions);
            let ints =
                bohmion_integrals(&scratch, &self.kernel, &self.grid, self.floor_rel, false)?;
            let g = self.coupling_matrix(rho);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += g[a * n + b] * ints.i_ab(a, b);
                }
            }
            e += self.energy_coefficient() * s;
        }
        Ok(e)
    }

    pub fn energy_parts(&self) -> Result<EFEnergy> {
        let d = self.ensemble.dim;
        let n = self.ensemble.n();
        let rho = self.rho();
        let mut electronic = 0.0;
        for (a, r) in rho.iter().enumerate() {
            let h = self.hamiltonian.matrix(&self.ensemble.positions[a * d..(a + 1) * d]);
            electronic += r.re_tr_mul(&h);
        }
        let quantum = if self.quantum_term {
            let ints = self.integrals(false)?;
            let g = self.coupling_matrix(rho);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += g[a * n + b] * ints.i_ab(a, b);
                }
            }
            self.energy_coefficient() * s
        } else {
            0.0
        };
        let kinetic = self.kinetic_energy();
        Ok(EFEnergy { kinetic, electronic, quantum, total: kinetic + electronic + quantum })
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(self.energy_parts()?.total)
    }

    /// Force at trial state with ϱ frozen:
    /// F_c = −⟨ϱ_c, ∇Ĥ_e(q_c)⟩ − (ħ²/4M) Σ_ab G_ab ∂I_ab/∂q_c.
    pub fn force_at(&self, positions: &[f64], rho: &[Matrix2], out: &mut [f64]) -> Result<()> {
        let n = self.ensemble.n();
        let d = self.ensemble.dim;
        for (c, r) in rho.iter().enumerate() {
            let grads = self.hamiltonian.grad_matrix(&positions[c * d..(c + 1) * d]);
            for ax in 0..d {
                out[c * d + ax] = -r.re_tr_mul(&grads[ax]);
            }
        }
        if self.quantum_term {
            let scratch = self.ensemble.with_positions(positions);
            let ints = bohmion_integrals(&scratch, &self.kernel, &self.grid, self.floor_rel, true)?;
            let g = self.coupling_matrix(rho);
            let lam = self.energy_coefficient();
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let coeff = lam * g[a * n + b];
                        let di = ints.d_i(c, a, b);
                        for ax in 0..d {
                            out[c * d + ax] -= coeff * di[ax];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn force(&self) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.ensemble.positions.len()];
        self.force_at(&self.ensemble.positions, self.rho(), &mut f)?;
        Ok(f)
    }

    /// Electronic substep: every ϱ_a is conjugated by
    /// U_a = expm(Ĥ_a^eff(q_mid, ϱ_mid)) where ϱ_mid = (ϱ_old + ϱ_new)/2 is
    /// determined self-consistently across all points at once. The midpoint
    /// centering makes the substep self-adjoint, hence the whole step
    /// time-reversible; unitary conjugation preserves trace and spectrum
    /// exactly.
    fn electronic_midpoint_update(
        &self,
        q_mid: &[f64],
        rho_old: &[Matrix2],
        dt: f64,
    ) -> Result<Vec<Matrix2>> {
        let n = rho_old.len();
        let d = self.ensemble.dim;
        let h_e: Vec<Matrix2> = (0..n)
            .map(|a| self.hamiltonian.matrix(&q_mid[a * d..(a + 1) * d]))
            .collect();
        if !self.quantum_term {
            let mut out = Vec::with_capacity(n);
            for (r, h) in rho_old.iter().zip(&h_e) {
                let u = expm_two_level(h, dt, self.hbar)?;
                out.push(r.conjugate_by(&u));
            }
            return Ok(out);
        }
        let scratch = self.ensemble.with_positions(q_mid);
        let ints = bohmion_integrals(&scratch, &self.kernel, &self.grid, self.floor_rel, false)?;
        let lam = self.heff_coefficient();
        let mut rho_new: Vec<Matrix2> = rho_old.to_vec();
        let mut delta = f64::INFINITY;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let rho_mid: Vec<Matrix2> = rho_old
                .iter()
                .zip(&rho_new)
                .map(|(o, n)| o.add(n).scale_re(0.5))
                .collect();
            let mut next = Vec::with_capacity(n);
            for a in 0..n {
                let mut coup = Matrix2::zero();
                for (b, r) in rho_mid.iter().enumerate() {
                    coup = coup.add(&r.scale_re(ints.i_ab(a, b)));
                }
                let h = h_e[a].add(&coup.scale_re(lam));
                let u = expm_two_level(&h, dt, self.hbar)?;
                next.push(rho_old[a].conjugate_by(&u));
            }
            delta = next
                .iter()
                .zip(&rho_new)
                .map(|(a, b)| a.sub(b).max_norm())
                .fold(0.0f64, f64::max);
            rho_new = next;
            if delta <= FIXED_POINT_TOL {
                return Ok(rho_new);
            }
        }
        Err(Error::FixedPointDiverged { max_iter: FIXED_POINT_MAX_ITER, delta })
    }

    /// One Strang step: half-kick, half-drift, electronic midpoint update,
    /// half-drift, half-kick. On error the state is left untouched.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::Config(format!("step size must be finite and nonzero (got {dt})")));
        }
        let nd = self.ensemble.positions.len();
        let masses = per_dof_masses(&self.ensemble, self.mass);
        let mut q = self.ensemble.positions.clone();
        let mut p = self.ensemble.momenta.clone();
        let rho_old = self.rho().to_vec();

        let mut f = vec![0.0; nd];
        self.force_at(&q, &rho_old, &mut f)?;
        check_finite(&f, "force")?;
        for i in 0..nd {
            p[i] += 0.5 * dt * f[i];
        }
        for i in 0..nd {
            q[i] += 0.5 * dt * p[i] / masses[i];
        }
        let rho_new = self.electronic_midpoint_update(&q, &rho_old, dt)?;
        for i in 0..nd {
            q[i] += 0.5 * dt * p[i] / masses[i];
        }
        self.force_at(&q, &rho_new, &mut f)?;
        check_finite(&f, "force")?;
        for i in 0..nd {
            p[i] += 0.5 * dt * f[i];
        }
        check_finite(&q, "positions")?;
        check_finite(&p, "momenta")?;
        self.ensemble.positions = q;
        self.ensemble.momenta = p;
        self.ensemble.rho = Some(rho_new);
        Ok(())
    }
}

/// Effective electronic Hamiltonian Ĥ_a^eff = Ĥ_e(q_a) + (ħ²/2M) Σ_b I_ab ϱ_b
/// driving iħ ϱ̇_a = [Ĥ_a^eff, ϱ_a].
pub fn ef_effective_hamiltonian(system: &EFBohmionSystem, a: usize) -> Result<Matrix2> {
    let ints = if system.quantum_term { Some(system.integrals(false)?) } else { None };
    Ok(system.heff_at(a, &system.ensemble.positions, system.rho(), ints.as_ref()))
}

/// Forces on every point of a mixed quantum–classical system (frozen ϱ).
pub fn ef_bohmion_force(system: &EFBohmionSystem) -> Result<Vec<f64>> {
    system.force()
}

/// Total energy E = Σ_a |p_a|²/(2Mw_a) + Σ_a ⟨ϱ_a, Ĥ_e(q_a)⟩
/// + (ħ²/4M) Σ_ab (⟨ϱ_a|ϱ_b⟩ − w_a w_b) I_ab.
pub fn ef_bohmion_energy(system: &EFBohmionSystem) -> Result<f64> {
    system.energy()
}

/// One Strang step of the mixed quantum–classical system.
pub fn step_ef_bohmion(system: &mut EFBohmionSystem, dt: f64) -> Result<()> {
    system.step(dt)
}

// ---------------------------------------------------------------------------
// mean-field reference dynamics
// ---------------------------------------------------------------------------

/// Mean-field energy M-kinetic + ⟨ψ|Ĥ_e(q)|ψ⟩.
pub fn ehrenfest_energy(
    q: &[f64],
    p: &[f64],
    psi: &[Complex64; 2],
    hamiltonian: &TwoLevelHamiltonian,
    mass: f64,
) -> f64 {
    let kin: f64 = p.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass);
    kin + expectation(&hamiltonian.matrix(q), psi)
}

fn expectation(m: &Matrix2, psi: &[Complex64; 2]) -> f64 {
    let mp = m.apply(*psi);
    (psi[0].conj() * mp[0] + psi[1].conj() * mp[1]).re
}

fn ehrenfest_force(q: &[f64], psi: &[Complex64; 2], ham: &TwoLevelHamiltonian, out: &mut [f64]) {
    for (ax, g) in ham.grad_matrix(q).iter().enumerate() {
        out[ax] = -expectation(g, psi);
    }
}

/// One Strang step of the quantum–classical mean-field model:
/// M q̈ = −⟨ψ|∇Ĥ_e(q)|ψ⟩, iħ ψ̇ = Ĥ_e(q) ψ, with the wavefunction advanced by
/// the exact two-level propagator at the mid-step position.
pub fn ehrenfest_step(
    q: &mut [f64],
    p: &mut [f64],
    psi: &mut [Complex64; 2],
    hamiltonian: &TwoLevelHamiltonian,
    mass: f64,
    hbar: f64,
    dt: f64,
) -> Result<()> {
    let d = hamiltonian.dim();
    if q.len() != d || p.len() != d {
        return Err(Error::Config(format!(
            "expected {d}-dimensional state (got q: {}, p: {})",
            q.len(),
            p.len()
        )));
    }
    if !(mass.is_finite() && mass > 0.0) || !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::Config("mass and hbar must be positive".into()));
    }
    let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Normalization(format!("‖ψ‖ = {norm:.12} (expected 1)")));
    }
    let mut f = vec![0.0; d];
    ehrenfest_force(q, psi, hamiltonian, &mut f);
    check_finite(&f, "force")?;
    for i in 0..d {
        p[i] += 0.5 * dt * f[i];
    }
    for i in 0..d {
        q[i] += 0.5 * dt * p[i] / mass;
    }
    let u = expm_two_level(&hamiltonian.matrix(q), dt, hbar)?;
    *psi = u.apply(*psi);
    for i in 0..d {
        q[i] += 0.5 * dt * p[i] / mass;
    }
    ehrenfest_force(q, psi, hamiltonian, &mut f);
    check_finite(&f, "force")?;
    for i in 0..d {
        p[i] += 0.5 * dt * f[i];
    }
    check_finite(q, "positions")?;
    check_finite(p, "momenta")?;
    if !psi[0].is_finite() || !psi[1].is_finite() {
        return Err(Error::NonFinite("wavefunction".into()));
    }
    Ok(())
}
