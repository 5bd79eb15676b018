//! Scenario configuration: a single TOML file with flat sections, strict
//! (unknown keys rejected at every level), with defaults printable via
//! `--print-defaults`.
//!
//! One [`ScenarioConfig`] covers every scenario kind. Sections not consumed
//! by the selected kind are reported (stderr note + manifest entry) but do
//! not abort the run, so the fully populated `--print-defaults` document is
//! itself runnable. Missing required sections are configuration errors.

use bohmion_core::geometry::Band;
use bohmion_core::kernels::{Kernel, RhoTrace};
use bohmion_core::{Grid, Potential};
use serde::{Deserialize, Serialize};

/// Which experiment the config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Weighted point ensemble on one potential surface.
    Bohmion,
    /// Mixed quantum–classical ensemble with per-point electronic matrices.
    EfBohmion,
    /// Single mean-field trajectory with a wavefunction on two levels.
    Ehrenfest,
    /// Grid propagation of a scalar 1-D wavefunction.
    #[serde(rename = "grid_1d")]
    Grid1d,
    /// Grid propagation of a two-component 1-D wavefunction.
    GridVibronic,
    /// Loop holonomy plus the quantum-geometry identity battery.
    GeometrySuite,
    /// Cold-fluid closure diagnostics on a density/velocity pair.
    ColdFluid,
    /// Run the whole verification suite and write its reports.
    VerifyAll,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Bohmion => "bohmion",
            ScenarioKind::EfBohmion => "ef_bohmion",
            ScenarioKind::Ehrenfest => "ehrenfest",
            ScenarioKind::Grid1d => "grid_1d",
            ScenarioKind::GridVibronic => "grid_vibronic",
            ScenarioKind::GeometrySuite => "geometry_suite",
            ScenarioKind::ColdFluid => "cold_fluid",
            ScenarioKind::VerifyAll => "verify_all",
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_vec() -> Vec<f64> {
    vec![1.0]
}
fn zero_vec() -> Vec<f64> {
    vec![0.0]
}

/// Physical constants shared by the models. `m` is the point/grid particle
/// mass, `M` the nuclear mass of the two-level models; `omega`, `C`, `D`,
/// `E` parameterize the two-level Hamiltonian
/// ½Mω²|r|² + ½(C·r + E)σ_x + ½(D·r)σ_z.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(rename = "M", default = "one")]
    pub big_m: f64,
    #[serde(default = "one")]
    pub omega: f64,
    /// σ_x coupling per nuclear axis.
    #[serde(rename = "C", default = "zero_vec")]
    pub c: Vec<f64>,
    /// σ_z coupling per nuclear axis.
    #[serde(rename = "D", default = "one_vec")]
    pub d: Vec<f64>,
    /// Constant σ_x offset.
    #[serde(rename = "E", default)]
    pub e: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            hbar: 1.0,
            m: 1.0,
            big_m: 1.0,
            omega: 1.0,
            c: zero_vec(),
            d: one_vec(),
            e: 0.0,
        }
    }
}

/// Gradient convention for the point forces: the only implemented choice is
/// the gradient at frozen electronic matrices. The flag exists so the
/// convention is recorded explicitly in configs and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientScope {
    FrozenRho,
}

impl GradientScope {
    pub fn name(&self) -> &'static str {
        "frozen_rho"
    }
}

fn default_rho_trace() -> RhoTrace {
    RhoTrace::Weight
}
fn default_gradient_scope() -> GradientScope {
    GradientScope::FrozenRho
}
fn default_true() -> bool {
    true
}

/// Model conventions recorded in every manifest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    /// Trace convention for the electronic matrices: tr ϱ_a = w_a
    /// ("weight", default) or tr ϱ_a = 1 ("unit").
    #[serde(default = "default_rho_trace")]
    pub rho_trace: RhoTrace,
    /// Force convention; only "frozen_rho" is implemented.
    #[serde(default = "default_gradient_scope")]
    pub gradient_scope: GradientScope,
    /// Whether the kernel-regularized quantum coupling is active.
    #[serde(default = "default_true")]
    pub quantum_term: bool,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            rho_trace: RhoTrace::Weight,
            gradient_scope: GradientScope::FrozenRho,
            quantum_term: true,
        }
    }
}

/// Uniform periodic box: `lo`/`hi`/`n` per axis (1–3 axes).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, String> {
        Grid::new(self.lo.clone(), self.hi.clone(), self.n.clone())
            .map_err(|e| format!("[grid]: {e}"))
    }
}

/// Point ensemble: `positions`/`momenta` are flat (point-major) lists of
/// length N·dim; `bloch` gives one Bloch vector per point for the mixed
/// quantum–classical kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub weights: Vec<f64>,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<Vec<[f64; 3]>>,
}

/// Initial wavepacket for the grid kinds: a normalized Gaussian
/// exp(−(x−center)²/(4 sigma²)) · exp(i momentum·(x−center)/ħ), where
/// `sigma` is the standard deviation of |ψ|². The vibronic kind splits it
/// over the two components with the given (normalized) real `amplitudes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub center: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub momentum: f64,
    /// Two-component weights for grid_vibronic; ignored by grid_1d.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<[f64; 2]>,
}

/// Ground-state width of the unit harmonic oscillator, √(ħ/2mω) at
/// ħ = m = ω = 1.
fn default_sigma() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            center: 0.0,
            sigma: default_sigma(),
            momentum: 0.0,
            amplitudes: Some([1.0, 0.0]),
        }
    }
}

/// Time stepping: fixed step `dt`, `steps` total, one output sample every
/// `sample_stride` steps (plus the initial and final states).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub steps: u64,
    #[serde(default = "default_stride")]
    pub sample_stride: u64,
}

fn default_stride() -> u64 {
    1000
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec { dt: 1e-3, steps: 100_000, sample_stride: 1000 }
    }
}

/// Closed circular parameter loop for the two-level holonomy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_loop_points")]
    pub points: usize,
    #[serde(default = "default_band")]
    pub band: Band,
    /// Expected holonomy in radians; the report records the distance of the
    /// measured phase from this value (mod 2π).
    pub expected_phase: f64,
}

fn default_loop_points() -> usize {
    512
}
fn default_band() -> Band {
    Band::Lower
}

impl Default for LoopSpec {
    fn default() -> Self {
        LoopSpec {
            center: [0.0, 0.0],
            radius: 1.0,
            points: 512,
            band: Band::Lower,
            expected_phase: std::f64::consts::PI,
        }
    }
}

/// Size of the random-field identity battery.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    /// Number of seeded random Bloch fields; seeds run seed..seed+count.
    #[serde(default = "default_field_count")]
    pub field_count: u64,
}

fn default_field_count() -> u64 {
    32
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec { field_count: default_field_count() }
    }
}

/// Cold-fluid closure inputs: Gaussian density
/// exp(−(x−center)²/sigma²), linear velocity u(x) = velocity_slope·x, and
/// harmonic potential ½·spring·x².
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColdFluidSpec {
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub velocity_slope: f64,
    #[serde(default = "one")]
    pub spring: f64,
}

impl Default for ColdFluidSpec {
    fn default() -> Self {
        ColdFluidSpec { center: 0.0, sigma: 1.0, velocity_slope: 4.0, spring: 1.0 }
    }
}

/// One scenario file. Scalar keys first, then the flat sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// Base seed for seeded sweeps (geometry battery).
    #[serde(default)]
    pub seed: u64,
    /// Check filter for scenario = "verify_all" (substring of module or
    /// check name; empty means everything).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub conventions: Conventions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default, rename = "loop", skip_serializing_if = "Option::is_none")]
    pub loop_spec: Option<LoopSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold_fluid: Option<ColdFluidSpec>,
}

/// Names of the optional sections, for policy messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Kernel,
    Potential,
    Grid,
    Ensemble,
    Initial,
    Integrator,
    Loop,
    Geometry,
    ColdFluid,
    Filter,
}

impl Section {
    pub fn key(&self) -> &'static str {
        match self {
            Section::Kernel => "kernel",
            Section::Potential => "potential",
            Section::Grid => "grid",
            Section::Ensemble => "ensemble",
            Section::Initial => "initial",
            Section::Integrator => "integrator",
            Section::Loop => "loop",
            Section::Geometry => "geometry",
            Section::ColdFluid => "cold_fluid",
            Section::Filter => "filter",
        }
    }
}

const ALL_SECTIONS: [Section; 10] = [
    Section::Kernel,
    Section::Potential,
    Section::Grid,
    Section::Ensemble,
    Section::Initial,
    Section::Integrator,
    Section::Loop,
    Section::Geometry,
    Section::ColdFluid,
    Section::Filter,
];

/// Sections each scenario kind consumes: (required, optional).
fn policy(kind: ScenarioKind) -> (&'static [Section], &'static [Section]) {
    use Section::*;
    match kind {
        ScenarioKind::Bohmion => (&[Kernel, Potential, Grid, Ensemble, Integrator], &[]),
        ScenarioKind::EfBohmion => (&[Kernel, Grid, Ensemble, Integrator], &[]),
        ScenarioKind::Ehrenfest => (&[Ensemble, Integrator], &[]),
        ScenarioKind::Grid1d => (&[Grid, Potential, Initial, Integrator], &[]),
        ScenarioKind::GridVibronic => (&[Grid, Initial, Integrator], &[]),
        ScenarioKind::GeometrySuite => (&[Grid, Loop], &[Geometry]),
        ScenarioKind::ColdFluid => (&[Grid, ColdFluid], &[]),
        ScenarioKind::VerifyAll => (&[], &[Filter]),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| format!("config does not parse:\n{e}"))?;
        cfg.check_sections()?;
        cfg.check_values()?;
        Ok(cfg)
    }

    fn provided(&self, section: Section) -> bool {
        match section {
            Section::Kernel => self.kernel.is_some(),
            Section::Potential => self.potential.is_some(),
            Section::Grid => self.grid.is_some(),
            Section::Ensemble => self.ensemble.is_some(),
            Section::Initial => self.initial.is_some(),
            Section::Integrator => self.integrator.is_some(),
            Section::Loop => self.loop_spec.is_some(),
            Section::Geometry => self.geometry.is_some(),
            Section::ColdFluid => self.cold_fluid.is_some(),
            Section::Filter => self.filter.is_some(),
        }
    }

    /// Missing required sections are errors; present-but-unused sections are
    /// collected so the runner can note them without aborting.
    fn check_sections(&self) -> Result<(), String> {
        let (required, _) = policy(self.scenario);
        for section in required {
            if !self.provided(*section) {
                return Err(format!(
                    "scenario kind \"{}\" requires section [{}]",
                    self.scenario.name(),
                    section.key()
                ));
            }
        }
        Ok(())
    }

    /// Sections present in the file that the scenario kind never reads.
    pub fn unused_sections(&self) -> Vec<&'static str> {
        let (required, optional) = policy(self.scenario);
        ALL_SECTIONS
            .iter()
            .filter(|s| {
                self.provided(**s) && !required.contains(s) && !optional.contains(s)
            })
            .map(|s| s.key())
            .collect()
    }

    /// Cross-field validation that does not need the physics modules
    /// (their constructors re-validate everything they consume).
    fn check_values(&self) -> Result<(), String> {
        let c = &self.constants;
        for (name, v) in [("hbar", c.hbar), ("m", c.m), ("M", c.big_m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("[constants] {name} must be positive (got {v})"));
            }
        }
        if !c.omega.is_finite() || !c.e.is_finite() {
            return Err("[constants] omega and E must be finite".into());
        }
        if c.c.len() != c.d.len() || c.c.is_empty() || c.c.len() > 3 {
            return Err(format!(
                "[constants] C and D must share a length in 1..=3 (got {} and {})",
                c.c.len(),
                c.d.len()
            ));
        }
        if let Some(g) = &self.grid {
            if g.lo.len() != g.hi.len() || g.lo.len() != g.n.len() {
                return Err(format!(
                    "[grid] lo, hi, n must share a length (got {}, {}, {})",
                    g.lo.len(),
                    g.hi.len(),
                    g.n.len()
                ));
            }
        }
        if let Some(it) = &self.integrator {
            if !(it.dt.is_finite() && it.dt > 0.0) {
                return Err(format!("[integrator] dt must be positive (got {})", it.dt));
            }
            if it.steps == 0 {
                return Err("[integrator] steps must be at least 1".into());
            }
            if it.sample_stride == 0 {
                return Err("[integrator] sample_stride must be at least 1".into());
            }
        }
        if let Some(e) = &self.ensemble {
            if e.weights.is_empty() {
                return Err("[ensemble] needs at least one point".into());
            }
            let n = e.weights.len();
            if e.positions.len() % n != 0 || e.positions.len() != e.momenta.len() {
                return Err(format!(
                    "[ensemble] positions/momenta must hold dim entries per point \
                     (got {} weights, {} positions, {} momenta)",
                    n,
                    e.positions.len(),
                    e.momenta.len()
                ));
            }
            if let Some(b) = &e.bloch {
                if b.len() != n {
                    return Err(format!(
                        "[ensemble] bloch must hold one vector per point (got {} for {n})",
                        b.len()
                    ));
                }
            }
        }
        if let Some(l) = &self.loop_spec {
            if !(l.radius.is_finite() && l.radius > 0.0) {
                return Err(format!("[loop] radius must be positive (got {})", l.radius));
            }
            if l.points < 64 {
                return Err(format!("[loop] needs at least 64 points (got {})", l.points));
            }
            if !l.expected_phase.is_finite() {
                return Err("[loop] expected_phase must be finite".into());
            }
        }
        if let Some(i) = &self.initial {
            if !(i.sigma.is_finite() && i.sigma > 0.0) {
                return Err(format!("[initial] sigma must be positive (got {})", i.sigma));
            }
            if !i.center.is_finite() || !i.momentum.is_finite() {
                return Err("[initial] center and momentum must be finite".into());
            }
            if let Some(a) = i.amplitudes {
                if !(a[0].is_finite() && a[1].is_finite())
                    || (a[0] * a[0] + a[1] * a[1]) <= 0.0
                {
                    return Err("[initial] amplitudes must be finite and not both zero".into());
                }
            }
        }
        if let Some(cf) = &self.cold_fluid {
            if !(cf.sigma.is_finite() && cf.sigma > 0.0) {
                return Err(format!("[cold_fluid] sigma must be positive (got {})", cf.sigma));
            }
            if !cf.center.is_finite()
                || !cf.velocity_slope.is_finite()
                || !cf.spring.is_finite()
            {
                return Err("[cold_fluid] parameters must be finite".into());
            }
        }
        if let Some(g) = &self.geometry {
            if g.field_count == 0 {
                return Err("[geometry] field_count must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Fully populated document for `--print-defaults`: every section at its
    /// default value. The document is a runnable ef_bohmion scenario; other
    /// kinds are reached by changing `scenario` and deleting the sections
    /// the chosen kind does not read.
    pub fn defaults() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::EfBohmion,
            seed: 0,
            filter: None,
            constants: Constants::default(),
            conventions: Conventions::default(),
            kernel: Some(Kernel::Gaussian { alpha: 0.5, dim: 1 }),
            potential: Some(Potential::Harmonic { spring: 1.0 }),
            grid: Some(GridSpec { lo: vec![-8.0], hi: vec![8.0], n: vec![256] }),
            ensemble: Some(EnsembleSpec {
                weights: vec![0.5, 0.5],
                positions: vec![-0.5, 0.5],
                momenta: vec![0.0, 0.0],
                bloch: Some(vec![[0.8, 0.0, 0.6], [-0.48, 0.6, 0.64]]),
            }),
            initial: Some(InitialSpec::default()),
            integrator: Some(IntegratorSpec::default()),
            loop_spec: Some(LoopSpec::default()),
            geometry: Some(GeometrySpec::default()),
            cold_fluid: Some(ColdFluidSpec::default()),
        }
    }

    pub fn print_defaults() -> String {
        let body = toml::to_string_pretty(&Self::defaults())
            .expect("default config always serializes");
        let mut out = String::new();
        out.push_str(
            "# Full scenario schema with every key at its default value.\n\
             # scenario kinds: bohmion | ef_bohmion | ehrenfest | grid_1d | grid_vibronic\n\
             #                 | geometry_suite | cold_fluid | verify_all\n\
             # Sections by kind:\n\
             #   bohmion        [kernel] [potential] [grid] [ensemble] [integrator]\n\
             #   ef_bohmion     [kernel] [grid] [ensemble] [integrator]  (bloch required)\n\
             #   ehrenfest      [ensemble] [integrator]  (one point, |bloch| = 1)\n\
             #   grid_1d        [grid] [potential] [initial] [integrator]\n\
             #   grid_vibronic  [grid] [initial] [integrator]\n\
             #   geometry_suite [grid] [loop]  ([geometry] optional)\n\
             #   cold_fluid     [grid] [cold_fluid]\n\
             #   verify_all     (key `filter` optional)\n\
             # [constants] and [conventions] apply wherever relevant; unused\n\
             # sections are reported but do not abort the run.\n\n",
        );
        out.push_str(&body);
        out
    }
}
