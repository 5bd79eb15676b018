//! Smoothing kernels and the regularized pair integrals
//!
//!   I_ab = ∫ ∇K(r−q_a)·∇K(r−q_b) / D̄(r) d^d r,
//!   D̄(r) = Σ_c w_c K(r−q_c),
//!
//! together with their analytic position gradients. These integrals carry the
//! entire ħ²-coupling between the particle-like solutions, so they are
//! evaluated carefully: one shared denominator per configuration, a relative
//! floor against far-field 0/0, and a chunked accumulation whose summation
//! order is independent of the worker-thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::matrix2::Matrix2;
use num_complex::Complex64;

/// Default relative denominator floor, ε = 1e-14·max D̄.
pub const DEFAULT_FLOOR_REL: f64 = 1e-14;

/// Fixed chunk length for grid accumulation. Partial sums are produced per
/// chunk and combined in chunk order, so results are bitwise identical for
/// every thread count.
const CHUNK: usize = 4096;

/// Normalized smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Kernel {
    /// K(r) = (2πα²)^{−d/2} exp(−|r|²/2α²), valid for d ∈ {1,2,3}.
    Gaussian { alpha: f64, dim: usize },
    /// K(x) = (2α)^{−1} e^{−|x|/α}, the Green's function of 1 − α²∂²on the
    /// line. Only d = 1; the gradient has a kink at 0 (resolved as ∇K(0) = 0
    /// by symmetry), so this kernel is excluded from force/gradient paths.
    Helmholtz1d { alpha: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "width must be positive (got {alpha})"
            )));
        }
        match *self {
            Kernel::Gaussian { dim, .. } => {
                if !(1..=3).contains(&dim) {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian kernel dimension must be 1..=3 (got {dim})"
                    )));
                }
            }
            Kernel::Helmholtz1d { .. } => {}
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Kernel::Gaussian { alpha, .. } => alpha,
            Kernel::Helmholtz1d { alpha } => alpha,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Kernel::Gaussian { dim, .. } => dim,
            Kernel::Helmholtz1d { .. } => 1,
        }
    }

    /// Whether the kernel is twice differentiable, as force evaluation
    /// requires.
    pub fn supports_gradients(&self) -> bool {
        matches!(self, Kernel::Gaussian { .. })
    }

    /// K(r).
    pub fn eval(&self, r: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { alpha, dim } => {
                let r2: f64 = r.iter().map(|x| x * x).sum();
                let norm = (2.0 * std::f64::consts::PI * alpha * alpha).powf(-(dim as f64) / 2.0);
                norm * (-r2 / (2.0 * alpha * alpha)).exp()
            }
            Kernel::Helmholtz1d { alpha } => (-r[0].abs() / alpha).exp() / (2.0 * alpha),
        }
    }

    /// ∇K(r), written into `out`.
    pub fn grad(&self, r: &[f64], out: &mut [f64]) {
        match *self {
            Kernel::Gaussian { alpha, .. } => {
                let k = self.eval(r);
                let inv_a2 = 1.0 / (alpha * alpha);
                for (o, &x) in out.iter_mut().zip(r.iter()) {
                    *o = -x * inv_a2 * k;
                }
            }
            Kernel::Helmholtz1d { alpha } => {
                // sign convention at the kink: ∇K(0) = 0
                let k = self.eval(r);
                out[0] = if r[0] == 0.0 {
                    0.0
                } else {
                    -r[0].signum() * k / alpha
                };
            }
        }
    }

    /// Hessian-vector product ∇∇K(r)·v for twice-differentiable kernels:
    /// for the Gaussian, ∇∇K = (r r^T/α⁴ − 1/α²)·K.
    fn hessian_apply(&self, r: &[f64], k_val: f64, v: &[f64], out: &mut [f64]) {
        match *self {
            Kernel::Gaussian { alpha, .. } => {
                let a2 = alpha * alpha;
                let rv: f64 = r.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for i in 0..r.len() {
                    out[i] = (r[i] * rv / (a2 * a2) - v[i] / a2) * k_val;
                }
            }
            Kernel::Helmholtz1d { .. } => unreachable!("hessian requested for a kernel without one"),
        }
    }
}

/// Convention for the trace of the electronic matrices ϱ_a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoTrace {
    /// tr ϱ_a = w_a (default): ϱ_a = w_a φ_aφ_a† makes the diagonal coupling
    /// coefficient tr(ϱ_aϱ_a) − w_a² vanish for pure states.
    Weight,
    /// tr ϱ_a = 1 (recorded alternative; changes the ħ²-coupling magnitude).
    Unit,
}

impl RhoTrace {
    pub fn target(&self, weight: f64) -> f64 {
        match self {
            RhoTrace::Weight => weight,
            RhoTrace::Unit => 1.0,
        }
    }
}

/// Weighted point ensemble carrying positions, momenta, and (for the mixed
/// quantum–classical model) one electronic density matrix per point.
#[derive(Debug, Clone)]
pub struct BohmionEnsemble {
    pub dim: usize,
    /// Weights w_a > 0 with Σ w_a = 1.
    pub weights: Vec<f64>,
    /// Positions, flat N×d.
    pub positions: Vec<f64>,
    /// Momenta, flat N×d.
    pub momenta: Vec<f64>,
    /// Electronic matrices ϱ_a (present only for the mixed model).
    pub rho: Option<Vec<Matrix2>>,
}

impl BohmionEnsemble {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn q(&self, a: usize) -> &[f64] {
        &self.positions[a * self.dim..(a + 1) * self.dim]
    }

    pub fn p(&self, a: usize) -> &[f64] {
        &self.momenta[a * self.dim..(a + 1) * self.dim]
    }

    /// Copy of the ensemble with replaced positions — used for trial-position
    /// force evaluations inside integrators and finite-difference oracles.
    pub fn with_positions(&self, positions: &[f64]) -> BohmionEnsemble {
        BohmionEnsemble {
            dim: self.dim,
            weights: self.weights.clone(),
            positions: positions.to_vec(),
            momenta: self.momenta.clone(),
            rho: self.rho.clone(),
        }
    }

    /// Validate weights, array shapes, finiteness, and (when present) the
    /// electronic matrices: Hermitian, trace per `rho_trace`, positive
    /// semidefinite.
    pub fn validate(&self, rho_trace: RhoTrace) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidEnsemble("ensemble is empty".into()));
        }
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::InvalidEnsemble(format!(
                "dimension must be 1..=3 (got {})",
                self.dim
            )));
        }
        if self.positions.len() != n * self.dim || self.momenta.len() != n * self.dim {
            return Err(Error::InvalidEnsemble(format!(
                "expected {}×{} positions and momenta (got {} and {})",
                n,
                self.dim,
                self.positions.len(),
                self.momenta.len()
            )));
        }
        if self
            .positions
            .iter()
            .chain(self.momenta.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidEnsemble("non-finite position or momentum".into()));
        }
        let mut sum = 0.0;
        for (a, &w) in self.weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidEnsemble(format!(
                    "weight {a} must be positive (got {w})"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!(
                "weights must sum to 1 (got {sum:.16})"
            )));
        }
        if let Some(rho) = &self.rho {
            if rho.len() != n {
                return Err(Error::InvalidEnsemble(format!(
                    "expected {} electronic matrices (got {})",
                    n,
                    rho.len()
                )));
            }
            for (a, m) in rho.iter().enumerate() {
                if !m.is_finite() {
                    return Err(Error::InvalidEnsemble(format!("non-finite ϱ_{a}")));
                }
                let herm = m.hermiticity_residual();
                if herm > 1e-12 * m.max_norm().max(1.0) {
                    return Err(Error::InvalidEnsemble(format!(
                        "ϱ_{a} not Hermitian (residual {herm:.3e})"
                    )));
                }
                let target = rho_trace.target(self.weights[a]);
                let tr = m.trace().re;
                if (tr - target).abs() > 1e-12 {
                    return Err(Error::InvalidEnsemble(format!(
                        "tr ϱ_{a} = {tr:.16}, expected {target:.16}"
                    )));
                }
                let [lo, _] = m.eigenvalues_hermitian();
                if lo < -1e-12 {
                    return Err(Error::InvalidEnsemble(format!(
                        "ϱ_{a} not positive semidefinite (λ_min = {lo:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Smoothed density D̄(r) = Σ_a w_a K(r−q_a) sampled on the grid.
///
/// Every point must sit at least 4α inside the box so the kernel mass on the
/// grid is complete to quadrature tolerance.
pub fn smoothed_density(
    ensemble: &BohmionEnsemble,
    kernel: &Kernel,
    grid: &Grid,
) -> Result<GridField> {
    kernel.validate()?;
    check_dims(ensemble, kernel, grid)?;
    check_clearance(ensemble, kernel, grid)?;
    let d = grid.dim();
    let mut x = vec![0.0; d];
    let mut dr = vec![0.0; d];
    let mut field = GridField::zeros(grid.clone(), 1)?;
    for flat in 0..grid.len() {
        grid.point(flat, &mut x);
        let mut dens = 0.0;
        for a in 0..ensemble.n() {
            displacement(&x, ensemble.q(a), &mut dr);
            dens += ensemble.weights[a] * kernel.eval(&dr);
        }
        field.comp_mut(0)[flat] = Complex64::new(dens, 0.0);
    }
    Ok(field)
}

fn displacement(x: &[f64], q: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] - q[i];
    }
}

fn check_dims(ensemble: &BohmionEnsemble, kernel: &Kernel, grid: &Grid) -> Result<()> {
    if kernel.dim() != ensemble.dim || grid.dim() != ensemble.dim {
        return Err(Error::InvalidKernel(format!(
            "dimension mismatch: kernel {}, ensemble {}, grid {}",
            kernel.dim(),
            ensemble.dim,
            grid.dim()
        )));
    }
    Ok(())
}

/// Every point must stay at least 4α inside the box: beyond that clearance the
/// kernel mass lost off the grid edge exceeds quadrature tolerance and the
/// integrals silently degrade.
pub fn check_clearance(ensemble: &BohmionEnsemble, kernel: &Kernel, grid: &Grid) -> Result<()> {
    let clearance = 4.0 * kernel.alpha();
    for a in 0..ensemble.n() {
        let q = ensemble.q(a);
        for ax in 0..grid.dim() {
            let gap = (q[ax] - grid.lo()[ax]).min(grid.hi()[ax] - q[ax]);
            if gap < clearance {
                return Err(Error::BoundaryClearance {
                    index: a,
                    clearance: gap,
                    required: clearance,
                });
            }
        }
    }
    Ok(())
}

/// Pair integrals I_ab and (optionally) the full gradient array
/// ∂I_bc/∂q_a over a shared floored denominator.
#[derive(Debug, Clone)]
pub struct PairIntegrals {
    pub n: usize,
    pub dim: usize,
    /// I[a·n + b]; exactly symmetric by construction.
    pub i: Vec<f64>,
    /// grad[((a·n + b)·n + c)·dim + ax] = ∂I_bc/∂q_a · ê_ax;
    /// exactly symmetric in (b, c) by construction.
    pub grad: Option<Vec<f64>>,
}

impl PairIntegrals {
    pub fn i_ab(&self, a: usize, b: usize) -> f64 {
        self.i[a * self.n + b]
    }

    pub fn d_i(&self, a: usize, b: usize, c: usize) -> &[f64] {
        let g = self.grad.as_ref().expect("gradients were not requested");
        let base = ((a * self.n + b) * self.n + c) * self.dim;
        &g[base..base + self.dim]
    }
}

/// Evaluate all pair integrals (and their gradients when `with_grad`) on the
/// grid with the relative denominator floor `floor_rel`.
///
/// The gradient of I_bc = ∫ ∇K_b·∇K_c/D̄ with respect to q_a is
///
///   ∂I_bc/∂q_a = −∫ [δ_ab ∇∇K_b·∇K_c + δ_ac ∇∇K_c·∇K_b] / D̄
///               + ∫ w_a ∇K_a (∇K_b·∇K_c) / D̄²,
///
/// the second term coming from the variation of the shared denominator.
pub fn bohmion_integrals(
    ensemble: &BohmionEnsemble,
    kernel: &Kernel,
    grid: &Grid,
    floor_rel: f64,
    with_grad: bool,
) -> Result<PairIntegrals> {
    kernel.validate()?;
    check_dims(ensemble, kernel, grid)?;
    check_clearance(ensemble, kernel, grid)?;
    if with_grad && !kernel.supports_gradients() {
        return Err(Error::InvalidKernel(
            "this kernel is not twice differentiable; gradients (forces) are unavailable".into(),
        ));
    }
    if !(floor_rel.is_finite() && floor_rel > 0.0) {
        return Err(Error::InvalidKernel(format!(
            "denominator floor must be positive (got {floor_rel})"
        )));
    }
    let n = ensemble.n();
    let d = ensemble.dim;
    let len = grid.len();

    // Pass 1: shared denominator and its maximum.
    let dbar = smoothed_density_raw(ensemble, kernel, grid);
    let max_d = dbar.iter().cloned().fold(0.0f64, f64::max);
    if !(max_d.is_finite() && max_d > 0.0) {
        return Err(Error::NanInIntegrand);
    }
    let eps = floor_rel * max_d;

    // Pass 2: chunked accumulation of the numerators.
    let nchunks = len.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            accumulate_chunk(
                ensemble, kernel, grid, &dbar, eps, with_grad,
                ci * CHUNK, (ci * CHUNK + CHUNK).min(len),
            )
        })
        .collect();

    let vol = grid.cell_volume();
    let mut i_sum = vec![0.0; n * n];
    let mut g_sum = vec![0.0; if with_grad { n * n * n * d } else { 0 }];
    for (ip, gp) in &partials {
        for (acc, v) in i_sum.iter_mut().zip(ip.iter()) {
            *acc += v;
        }
        for (acc, v) in g_sum.iter_mut().zip(gp.iter()) {
            *acc += v;
        }
    }
    for v in i_sum.iter_mut() {
        *v *= vol;
    }
    for v in g_sum.iter_mut() {
        *v *= vol;
    }

    // Mirror the triangles computed below the diagonal: I is symmetric in
    // (a,b), the gradient in (b,c).
    for a in 0..n {
        for b in 0..a {
            i_sum[b * n + a] = i_sum[a * n + b];
        }
    }
    if with_grad {
        for a in 0..n {
            for b in 0..n {
                for c in 0..b {
                    for ax in 0..d {
                        g_sum[((a * n + c) * n + b) * d + ax] =
                            g_sum[((a * n + b) * n + c) * d + ax];
                    }
                }
            }
        }
    }

    if i_sum.iter().chain(g_sum.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NanInIntegrand);
    }
    Ok(PairIntegrals {
        n,
        dim: d,
        i: i_sum,
        grad: if with_grad { Some(g_sum) } else { None },
    })
}

fn smoothed_density_raw(ensemble: &BohmionEnsemble, kernel: &Kernel, grid: &Grid) -> Vec<f64> {
    let d = grid.dim();
    let len = grid.len();
    let n = ensemble.n();
    let nchunks = len.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut x = vec![0.0; d];
            let mut dr = vec![0.0; d];
            let mut out = Vec::with_capacity(hi - lo);
            for flat in lo..hi {
                grid.point(flat, &mut x);
                let mut dens = 0.0;
                for a in 0..n {
                    displacement(&x, ensemble.q(a), &mut dr);
                    dens += ensemble.weights[a] * kernel.eval(&dr);
                }
                out.push(dens);
            }
            out
        })
        .collect();
    chunks.concat()
}

#[allow(clippy::too_many_arguments)]
fn accumulate_chunk(
    ensemble: &BohmionEnsemble,
    kernel: &Kernel,
    grid: &Grid,
    dbar: &[f64],
    eps: f64,
    with_grad: bool,
    lo: usize,
    hi: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = ensemble.n();
    let d = ensemble.dim;
    let mut i_acc = vec![0.0; n * n];
    let mut g_acc = vec![0.0; if with_grad { n * n * n * d } else { 0 }];

    let mut x = vec![0.0; d];
    let mut dr = vec![0.0; n * d];
    let mut kv = vec![0.0; n];
    let mut gr = vec![0.0; n * d];
    let mut hbuf = vec![0.0; d];

    for flat in lo..hi {
        grid.point(flat, &mut x);
        for a in 0..n {
            let (dra, qa) = (&mut dr[a * d..(a + 1) * d], ensemble.q(a));
            for i in 0..d {
                dra[i] = x[i] - qa[i];
            }
            kv[a] = kernel.eval(&dr[a * d..(a + 1) * d]);
        }
        for a in 0..n {
            kernel.grad(&dr[a * d..(a + 1) * d], &mut gr[a * d..(a + 1) * d]);
        }
        let denom = dbar[flat].max(eps);
        let inv = 1.0 / denom;
        for a in 0..n {
            for b in 0..=a {
                let dot: f64 = (0..d).map(|i| gr[a * d + i] * gr[b * d + i]).sum();
                i_acc[a * n + b] += dot * inv;
            }
        }
        if with_grad {
            let inv2 = inv * inv;
            for b in 0..n {
                for c in 0..=b {
                    let dot: f64 = (0..d).map(|i| gr[b * d + i] * gr[c * d + i]).sum();
                    let s = dot * inv2;
                    // denominator variation, every a
                    for a in 0..n {
                        let wa = ensemble.weights[a];
                        let base = ((a * n + b) * n + c) * d;
                        for i in 0..d {
                            g_acc[base + i] += wa * gr[a * d + i] * s;
                        }
                    }
                    // numerator variation, a = b and a = c
                    kernel.hessian_apply(
                        &dr[b * d..(b + 1) * d],
                        kv[b],
                        &gr[c * d..(c + 1) * d],
                        &mut hbuf,
                    );
                    let base_b = ((b * n + b) * n + c) * d;
                    for i in 0..d {
                        g_acc[base_b + i] -= hbuf[i] * inv;
                    }
                    kernel.hessian_apply(
                        &dr[c * d..(c + 1) * d],
                        kv[c],
                        &gr[b * d..(b + 1) * d],
                        &mut hbuf,
                    );
                    let base_c = ((c * n + b) * n + c) * d;
                    for i in 0..d {
                        g_acc[base_c + i] -= hbuf[i] * inv;
                    }
                }
            }
        }
    }
    (i_acc, g_acc)
}

/// Single pair integral I_ab (shares the full-ensemble denominator).
pub fn bohmion_integral(
    a: usize,
    b: usize,
    ensemble: &BohmionEnsemble,
    kernel: &Kernel,
    grid: &Grid,
    floor_rel: f64,
) -> Result<f64> {
    let ints = bohmion_integrals(ensemble, kernel, grid, floor_rel, false)?;
    Ok(ints.i_ab(a, b))
}

/// Full gradient array ∂I_bc/∂q_a, flattened as
/// `[((a·n + b)·n + c)·d + axis]`.
pub fn bohmion_integral_grad(
    ensemble: &BohmionEnsemble,
    kernel: &Kernel,
    grid: &Grid,
    floor_rel: f64,
) -> Result<Vec<f64>> {
    let ints = bohmion_integrals(ensemble, kernel, grid, floor_rel, true)?;
    Ok(ints.grad.expect("gradients were requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::quadrature;

    fn ensemble_1d(w: &[f64], q: &[f64]) -> BohmionEnsemble {
        BohmionEnsemble {
            dim: 1,
            weights: w.to_vec(),
            positions: q.to_vec(),
            momenta: vec![0.0; q.len()],
            rho: None,
        }
    }

    #[test]
    fn gaussian_normalization_at_origin() {
        let k = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let v = k.eval(&[0.0]);
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kernels_are_even() {
        for k in [
            Kernel::Gaussian { alpha: 0.7, dim: 1 },
            Kernel::Helmholtz1d { alpha: 0.4 },
        ] {
            for &r in &[0.13, 1.7, 3.9] {
                assert_eq!(k.eval(&[r]), k.eval(&[-r]));
            }
        }
        let k3 = Kernel::Gaussian { alpha: 1.2, dim: 3 };
        let r = [0.3, -0.8, 1.1];
        let rm = [-0.3, 0.8, -1.1];
        assert_eq!(k3.eval(&r), k3.eval(&rm));
    }

    #[test]
    fn kernels_integrate_to_one() {
        let grid = Grid::new_1d(-10.0, 10.0, 512).unwrap();
        let k = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let samples: Vec<f64> = grid.axis_coords(0).iter().map(|&x| k.eval(&[x])).collect();
        let total = quadrature(&grid, &samples).unwrap();
        assert!((total - 1.0).abs() < 1e-10, "kernel {k:?} integrates to {total}");

        // The exponential kernel has a kink at 0, so the midpoint rule is
        // only O(h²) there; a wide box keeps the e^{−|x|/α} tail below that.
        let grid = Grid::new_1d(-30.0, 30.0, 8192).unwrap();
        let k = Kernel::Helmholtz1d { alpha: 1.0 };
        let samples: Vec<f64> = grid.axis_coords(0).iter().map(|&x| k.eval(&[x])).collect();
        let total = quadrature(&grid, &samples).unwrap();
        assert!((total - 1.0).abs() < 5e-6, "kernel {k:?} integrates to {total}");
        let grid2 = Grid::new(vec![-8.0, -8.0], vec![8.0, 8.0], vec![128, 128]).unwrap();
        let k2 = Kernel::Gaussian { alpha: 0.8, dim: 2 };
        let mut x = [0.0; 2];
        let mut samples = vec![0.0; grid2.len()];
        for (flat, s) in samples.iter_mut().enumerate() {
            grid2.point(flat, &mut x);
            *s = k2.eval(&x);
        }
        let total = quadrature(&grid2, &samples).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn helmholtz_gradient_kink_convention() {
        let k = Kernel::Helmholtz1d { alpha: 0.5 };
        let mut g = [0.0];
        k.grad(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        k.grad(&[0.3], &mut g);
        assert!(g[0] < 0.0);
    }

    #[test]
    fn gaussian_gradient_matches_finite_differences() {
        let k = Kernel::Gaussian { alpha: 0.9, dim: 2 };
        let r = [0.4, -1.2];
        let mut g = [0.0; 2];
        k.grad(&r, &mut g);
        let eps = 1e-6;
        for i in 0..2 {
            let mut rp = r;
            rp[i] += eps;
            let mut rm = r;
            rm[i] -= eps;
            let fd = (k.eval(&rp) - k.eval(&rm)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothed_density_single_peak_and_normalization() {
        let grid = Grid::new_1d(-12.0, 12.0, 512).unwrap();
        let kernel = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let ens = ensemble_1d(&[1.0], &[0.7]);
        let field = smoothed_density(&ens, &kernel, &grid).unwrap();
        // single peak: D̄ = K(x − q) pointwise
        let xs = grid.axis_coords(0);
        for (flat, &x) in xs.iter().enumerate() {
            let expect = kernel.eval(&[x - 0.7]);
            assert!((field.comp(0)[flat].re - expect).abs() < 1e-15);
        }
        assert!((field.quadrature_re().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smoothed_density_even_for_symmetric_pair() {
        let grid = Grid::new_1d(-12.0, 12.0, 512).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.8, dim: 1 };
        let ens = ensemble_1d(&[0.5, 0.5], &[-1.5, 1.5]);
        let field = smoothed_density(&ens, &kernel, &grid).unwrap();
        let n = grid.len();
        // node j and node n−j sit at ±x (node 0 is the unpaired edge)
        for j in 1..n {
            let a = field.comp(0)[j].re;
            let b = field.comp(0)[n - j].re;
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn smoothed_density_rejects_boundary_violation() {
        let grid = Grid::new_1d(-4.0, 4.0, 128).unwrap();
        let kernel = Kernel::Gaussian { alpha: 1.5, dim: 1 };
        let ens = ensemble_1d(&[1.0], &[3.0]);
        match smoothed_density(&ens, &kernel, &grid) {
            Err(Error::BoundaryClearance { index: 0, .. }) => {}
            other => panic!("expected boundary-clearance error, got {other:?}"),
        }
    }

    #[test]
    fn single_bohmion_integral_is_fisher_information() {
        // N=1: I_11 = ∫ |∇K|²/K = d/α² for the Gaussian kernel.
        for (alpha, dim, n) in [(1.0, 1, 512), (0.5, 1, 512), (0.8, 2, 256)] {
            let grid = if dim == 1 {
                Grid::new_1d(-10.0, 10.0, n).unwrap()
            } else {
                Grid::new(vec![-8.0, -8.0], vec![8.0, 8.0], vec![n, n]).unwrap()
            };
            let kernel = Kernel::Gaussian { alpha, dim };
            let mut ens = ensemble_1d(&[1.0], &[0.1]);
            ens.dim = dim;
            ens.positions = vec![0.1; dim];
            ens.momenta = vec![0.0; dim];
            let i11 = bohmion_integral(0, 0, &ens, &kernel, &grid, DEFAULT_FLOOR_REL).unwrap();
            let expect = dim as f64 / (alpha * alpha);
            assert!(
                ((i11 - expect) / expect).abs() < 1e-10,
                "I_11 = {i11}, expected {expect}"
            );
        }
    }

    #[test]
    fn translation_invariance_of_single_integral() {
        let grid = Grid::new_1d(-14.0, 14.0, 1024).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.75, dim: 1 };
        let a = bohmion_integral(0, 0, &ensemble_1d(&[1.0], &[-2.3]), &kernel, &grid, DEFAULT_FLOOR_REL)
            .unwrap();
        let b = bohmion_integral(0, 0, &ensemble_1d(&[1.0], &[3.1]), &kernel, &grid, DEFAULT_FLOOR_REL)
            .unwrap();
        assert!((a - b).abs() < 1e-10, "translation changed I_11 by {:.3e}", a - b);
    }

    #[test]
    fn pair_integral_symmetry_three_bohmions() {
        let grid = Grid::new_1d(-14.0, 14.0, 768).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.9, dim: 1 };
        let ens = ensemble_1d(&[0.25, 0.45, 0.3], &[-1.7, 0.4, 2.2]);
        let ints = bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL, false).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(ints.i_ab(a, b), ints.i_ab(b, a), "exact mirror symmetry");
            }
        }
    }

    #[test]
    fn frozen_regression_value_of_i12() {
        // Converged two-point value, pinned by grid refinement (n = 512 vs
        // 4096 agree to well below 1e-8).
        let kernel = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let ens = ensemble_1d(&[0.5, 0.5], &[-1.0, 1.0]);
        let coarse = Grid::new_1d(-12.0, 12.0, 512).unwrap();
        let fine = Grid::new_1d(-12.0, 12.0, 4096).unwrap();
        let i_coarse = bohmion_integral(0, 1, &ens, &kernel, &coarse, DEFAULT_FLOOR_REL).unwrap();
        let i_fine = bohmion_integral(0, 1, &ens, &kernel, &fine, DEFAULT_FLOOR_REL).unwrap();
        assert!((i_coarse - i_fine).abs() < 1e-8);
        const I12: f64 = -0.1835111816021164;
        const I11: f64 = 1.2843121631887306;
        assert!((i_coarse - I12).abs() < 1e-8, "I_12 = {i_coarse:.16}");
        let i11 = bohmion_integral(0, 0, &ens, &kernel, &coarse, DEFAULT_FLOOR_REL).unwrap();
        assert!((i11 - I11).abs() < 1e-8, "I_11 = {i11:.16}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid::new_1d(-14.0, 14.0, 1024).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.8, dim: 1 };
        let w = [0.35, 0.65];
        let q = [-0.9, 0.7];
        let ens = ensemble_1d(&w, &q);
        let ints = bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL, true).unwrap();
        let eps = 1e-5;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut qp = q;
                    qp[a] += eps;
                    let mut qm = q;
                    qm[a] -= eps;
                    let ip = bohmion_integral(b, c, &ensemble_1d(&w, &qp), &kernel, &grid, DEFAULT_FLOOR_REL).unwrap();
                    let im = bohmion_integral(b, c, &ensemble_1d(&w, &qm), &kernel, &grid, DEFAULT_FLOOR_REL).unwrap();
                    let fd = (ip - im) / (2.0 * eps);
                    let an = ints.d_i(a, b, c)[0];
                    let denom = fd.abs().max(1e-12);
                    assert!(
                        ((an - fd) / denom).abs() < 1e-6,
                        "∂I_{b}{c}/∂q_{a}: analytic {an:.12e} vs fd {fd:.12e}"
                    );
                }
            }
        }
    }

    #[test]
    fn single_bohmion_gradient_vanishes() {
        let grid = Grid::new_1d(-10.0, 10.0, 512).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.6, dim: 1 };
        let ens = ensemble_1d(&[1.0], &[0.45]);
        let g = bohmion_integral_grad(&ens, &kernel, &grid, DEFAULT_FLOOR_REL).unwrap();
        assert!(g[0].abs() < 1e-8, "∂I_11/∂q_1 = {:.3e}", g[0]);
    }

    #[test]
    fn mirror_symmetric_pair_has_antisymmetric_gradient() {
        let grid = Grid::new_1d(-12.0, 12.0, 1024).unwrap();
        let kernel = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let ens = ensemble_1d(&[0.5, 0.5], &[-1.1, 1.1]);
        let ints = bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL, true).unwrap();
        let d1 = ints.d_i(0, 0, 1)[0];
        let d2 = ints.d_i(1, 0, 1)[0];
        assert!((d1 + d2).abs() < 1e-10, "∂I_12/∂q_1 = {d1:.3e}, ∂I_12/∂q_2 = {d2:.3e}");
    }

    #[test]
    fn global_translation_leaves_integrals_invariant() {
        let kernel = Kernel::Gaussian { alpha: 0.9, dim: 1 };
        let w = [0.4, 0.6];
        let base = Grid::new_1d(-13.0, 13.0, 1024).unwrap();
        let shifted = Grid::new_1d(-13.0 + 0.8, 13.0 + 0.8, 1024).unwrap();
        let a = bohmion_integrals(&ensemble_1d(&w, &[-1.0, 0.8]), &kernel, &base, DEFAULT_FLOOR_REL, false).unwrap();
        let b = bohmion_integrals(&ensemble_1d(&w, &[-0.2, 1.6]), &kernel, &shifted, DEFAULT_FLOOR_REL, false).unwrap();
        for idx in 0..4 {
            assert!((a.i[idx] - b.i[idx]).abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_law_for_gaussian_widths() {
        // I(2α, q) = ¼ I(α, q/2) in d = 1 by the substitution r → r/2.
        let kernel_a = Kernel::Gaussian { alpha: 1.0, dim: 1 };
        let kernel_2a = Kernel::Gaussian { alpha: 2.0, dim: 1 };
        let grid = Grid::new_1d(-20.0, 20.0, 2048).unwrap();
        let w = [0.5, 0.5];
        let i_half = bohmion_integrals(&ensemble_1d(&w, &[-0.55, 0.55]), &kernel_a, &grid, DEFAULT_FLOOR_REL, false).unwrap();
        let i_full = bohmion_integrals(&ensemble_1d(&w, &[-1.1, 1.1]), &kernel_2a, &grid, DEFAULT_FLOOR_REL, false).unwrap();
        for idx in 0..4 {
            let rel = (i_full.i[idx] - 0.25 * i_half.i[idx]).abs() / i_half.i[idx].abs().max(1e-12);
            assert!(rel < 1e-6, "scaling law violated at {idx}: {rel:.3e}");
        }
    }

    #[test]
    fn floor_halving_changes_little() {
        let grid = Grid::new_1d(-14.0, 14.0, 1024).unwrap();
        let kernel = Kernel::Gaussian { alpha: 0.8, dim: 1 };
        let ens = ensemble_1d(&[0.45, 0.55], &[-1.2, 0.9]);
        let a = bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL, false).unwrap();
        let b = bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL / 2.0, false).unwrap();
        for idx in 0..4 {
            assert!((a.i[idx] - b.i[idx]).abs() < 1e-9, "floor sensitivity at {idx}");
        }
    }

    #[test]
    fn helmholtz_kernel_allows_integrals_but_not_gradients() {
        let grid = Grid::new_1d(-12.0, 12.0, 1024).unwrap();
        let kernel = Kernel::Helmholtz1d { alpha: 0.9 };
        // kept off the grid nodes so the kink convention ∇K(0) := 0 never
        // deletes a quadrature cell
        let ens = ensemble_1d(&[1.0], &[0.05]);
        // I_11 = ∫ |∇K|²/K = 1/α² · ∫ K = 1/α² (the kink has measure zero)
        let i11 = bohmion_integral(0, 0, &ens, &kernel, &grid, DEFAULT_FLOOR_REL).unwrap();
        assert!((i11 - 1.0 / (0.9 * 0.9)).abs() / i11 < 1e-3, "I_11 = {i11}");
        assert!(matches!(
            bohmion_integrals(&ens, &kernel, &grid, DEFAULT_FLOOR_REL, true),
            Err(Error::InvalidKernel(_))
        ));
    }

    #[test]
    fn ensemble_validation_catches_bad_weights_and_rho() {
        let mut ens = ensemble_1d(&[0.6, 0.6], &[0.0, 1.0]);
        assert!(ens.validate(RhoTrace::Weight).is_err());
        ens.weights = vec![0.5, 0.5];
        assert!(ens.validate(RhoTrace::Weight).is_ok());
        // trace convention mismatch
        ens.rho = Some(vec![Matrix2::identity().scale_re(0.5); 2]);
        assert!(ens.validate(RhoTrace::Weight).is_err()); // tr = 1 ≠ w = 0.5
        ens.rho = Some(vec![Matrix2::identity().scale_re(0.25); 2]);
        assert!(ens.validate(RhoTrace::Weight).is_ok());
    }
}
