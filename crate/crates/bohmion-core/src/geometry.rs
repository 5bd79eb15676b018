//! Quantum-geometry diagnostics for parameter-dependent two-level states:
//! quantum geometric tensor, Berry connection/curvature/phase, the γ
//! connection and its covariance identity, uncertainty relations, and the
//! Mermin–Ho (Takabayasi) curvature check.
//!
//! All identities here are verified on fields ψ(r) of unit spinors sampled
//! over a periodic parameter grid, with spectral derivatives throughout.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::electronic::{bo_surfaces, TwoLevelHamiltonian};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::matrix2::Matrix2;

/// Unit spinor field over a 1-D or 2-D parameter grid.
#[derive(Debug, Clone)]
pub struct ParametrizedStateField {
    field: GridField,
    hbar: f64,
}

impl ParametrizedStateField {
    /// Wrap a two-component field after checking the pointwise normalization
    /// ‖ψ(r)‖ = 1 to 1e-12.
    pub fn new(field: GridField, hbar: f64) -> Result<Self> {
        if field.ncomp() != 2 {
            return Err(Error::InvalidGrid("expected a two-component spinor field".into()));
        }
        let d = field.grid().dim();
        if d == 0 || d > 2 {
            return Err(Error::InvalidGrid(format!(
                "parameter grids are 1-D or 2-D (got {d}-D)"
            )));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Config(format!("hbar must be positive (got {hbar})")));
        }
        for (i, d) in field.density().iter().enumerate() {
            if (d - 1.0).abs() > 1e-12 {
                return Err(Error::Normalization(format!(
                    "‖ψ‖² = {d:.15} at cell {i} (expected 1)"
                )));
            }
        }
        Ok(ParametrizedStateField { field, hbar })
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn spinor(&self, flat: usize) -> [Complex64; 2] {
        [self.field.comp(0)[flat], self.field.comp(1)[flat]]
    }

    fn derivatives(&self) -> Result<Vec<GridField>> {
        (0..self.grid().dim()).map(|axis| self.field.spectral_derivative(axis)).collect()
    }
}

/// Quantum geometric tensor Q_ij(r) = ⟨∂_iψ|(1 − ψψ†)|∂_jψ⟩ per grid point.
///
/// Storage is component-major: entry (i, j) at point `flat` lives at
/// `(i·dim + j)·len + flat`.
#[derive(Debug, Clone)]
pub struct QGTField {
    pub dim: usize,
    pub hbar: f64,
    len: usize,
    q: Vec<Complex64>,
}

impl QGTField {
    pub fn q(&self, flat: usize, i: usize, j: usize) -> Complex64 {
        self.q[(i * self.dim + j) * self.len + flat]
    }

    /// Metric part T_ij = Re Q_ij.
    pub fn metric(&self, flat: usize, i: usize, j: usize) -> f64 {
        self.q(flat, i, j).re
    }

    /// Berry curvature B_ij = 2ħ Im Q_ij.
    pub fn curvature(&self, flat: usize, i: usize, j: usize) -> f64 {
        2.0 * self.hbar * self.q(flat, i, j).im
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Quantum geometric tensor of a state field, spectral derivatives.
pub fn qgt(state: &ParametrizedStateField) -> Result<QGTField> {
    let d = state.grid().dim();
    let len = state.grid().len();
    let derivs = state.derivatives()?;
    let mut q = vec![Complex64::new(0.0, 0.0); d * d * len];
    for i in 0..d {
        for j in 0..d {
            let slot = &mut q[(i * d + j) * len..(i * d + j + 1) * len];
            for flat in 0..len {
                let psi = state.spinor(flat);
                let di = [derivs[i].comp(0)[flat], derivs[i].comp(1)[flat]];
                let dj = [derivs[j].comp(0)[flat], derivs[j].comp(1)[flat]];
                let di_dj = di[0].conj() * dj[0] + di[1].conj() * dj[1];
                let di_psi = di[0].conj() * psi[0] + di[1].conj() * psi[1];
                let psi_dj = psi[0].conj() * dj[0] + psi[1].conj() * dj[1];
                slot[flat] = di_dj - di_psi * psi_dj;
            }
        }
    }
    Ok(QGTField { dim: d, hbar: state.hbar(), len, q })
}

/// Berry connection A_j(r) = ħ Im⟨ψ|∂_jψ⟩, axis-major (axis·len + flat).
pub fn berry_connection(state: &ParametrizedStateField) -> Result<Vec<f64>> {
    let d = state.grid().dim();
    let len = state.grid().len();
    let derivs = state.derivatives()?;
    let mut a = vec![0.0; d * len];
    for (axis, dpsi) in derivs.iter().enumerate() {
        for flat in 0..len {
            let psi = state.spinor(flat);
            let dv = [dpsi.comp(0)[flat], dpsi.comp(1)[flat]];
            a[axis * len + flat] = state.hbar() * (psi[0].conj() * dv[0] + psi[1].conj() * dv[1]).im;
        }
    }
    Ok(a)
}

/// Berry curvature B_12(r) = 2ħ Im Q_12 on a 2-D parameter grid.
pub fn berry_curvature(state: &ParametrizedStateField) -> Result<Vec<f64>> {
    if state.grid().dim() != 2 {
        return Err(Error::InvalidGrid("curvature needs a 2-D parameter grid".into()));
    }
    let q = qgt(state)?;
    Ok((0..q.len()).map(|flat| q.curvature(flat, 0, 1)).collect())
}

/// Berry curvature from the connection: B_12 = ∂_1 A_2 − ∂_2 A_1 (spectral).
/// An independent route to [`berry_curvature`] — the two must agree.
pub fn berry_curvature_from_connection(state: &ParametrizedStateField) -> Result<Vec<f64>> {
    if state.grid().dim() != 2 {
        return Err(Error::InvalidGrid("curvature needs a 2-D parameter grid".into()));
    }
    let grid = state.grid();
    let len = grid.len();
    let a = berry_connection(state)?;
    let a1: Vec<Complex64> = a[..len].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let a2: Vec<Complex64> = a[len..].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let d1_a2 = crate::grid::spectral_derivative(grid, &a2, 0)?;
    let d2_a1 = crate::grid::spectral_derivative(grid, &a1, 1)?;
    Ok((0..len).map(|flat| d1_a2[flat].re - d2_a1[flat].re).collect())
}

/// Pointwise skew-Hermitian connection matrices γ_j with ∂_jψ = −γ_jψ,
/// axis-major like the other per-axis fields.
#[derive(Debug, Clone)]
pub struct GammaField {
    pub dim: usize,
    len: usize,
    gamma: Vec<Matrix2>,
}

impl GammaField {
    pub fn at(&self, flat: usize, axis: usize) -> &Matrix2 {
        &self.gamma[axis * self.len + flat]
    }

    pub fn at_mut(&mut self, flat: usize, axis: usize) -> &mut Matrix2 {
        &mut self.gamma[axis * self.len + flat]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn outer(u: [Complex64; 2], v: [Complex64; 2]) -> Matrix2 {
    Matrix2 {
        e: [
            [u[0] * v[0].conj(), u[0] * v[1].conj()],
            [u[1] * v[0].conj(), u[1] * v[1].conj()],
        ],
    }
}

/// Canonical connection matrices
/// γ_j = ψ(∂_jψ)† − (∂_jψ)ψ† + ⟨ψ|∂_jψ⟩ψψ†.
///
/// Any γ with ∂_jψ = −γ_jψ works for the identities below; this is the
/// minimal skew-Hermitian representative.
pub fn gamma_connection(state: &ParametrizedStateField) -> Result<GammaField> {
    let d = state.grid().dim();
    let len = state.grid().len();
    let derivs = state.derivatives()?;
    let mut gamma = Vec::with_capacity(d * len);
    for dpsi in &derivs {
        for flat in 0..len {
            let psi = state.spinor(flat);
            let norm2 = psi[0].norm_sqr() + psi[1].norm_sqr();
            if (norm2 - 1.0).abs() > 1e-8 {
                return Err(Error::Normalization(format!(
                    "‖ψ‖² = {norm2:.12} at cell {flat} (expected 1)"
                )));
            }
            let dv = [dpsi.comp(0)[flat], dpsi.comp(1)[flat]];
            let overlap = psi[0].conj() * dv[0] + psi[1].conj() * dv[1];
            let g = outer(psi, dv)
                .sub(&outer(dv, psi))
                .add(&outer(psi, psi).scale(overlap));
            gamma.push(g);
        }
    }
    Ok(GammaField { dim: d, len, gamma })
}

fn expectation(m: &Matrix2, psi: [Complex64; 2]) -> Complex64 {
    let mp = m.apply(psi);
    psi[0].conj() * mp[0] + psi[1].conj() * mp[1]
}

/// Covariance residual max |Q_ij − (⟨γ_i⟩⟨γ_j⟩ − ⟨γ_iγ_j⟩)| for a given γ.
///
/// The identity holds for every γ satisfying the defining relation, including
/// any gauge-shifted γ_j + i·c(r)·ψψ†.
pub fn qgt_covariance_residual(
    state: &ParametrizedStateField,
    gamma: &GammaField,
) -> Result<f64> {
    let d = state.grid().dim();
    let len = state.grid().len();
    if gamma.dim != d || gamma.len != len {
        return Err(Error::InvalidGrid("connection field does not match the state grid".into()));
    }
    let q = qgt(state)?;
    let mut worst = 0.0f64;
    for flat in 0..len {
        let psi = state.spinor(flat);
        for i in 0..d {
            for j in 0..d {
                let gi = gamma.at(flat, i);
                let gj = gamma.at(flat, j);
                let cov = expectation(gi, psi) * expectation(gj, psi)
                    - expectation(&gi.mul(gj), psi);
                worst = worst.max((q.q(flat, i, j) - cov).norm());
            }
        }
    }
    Ok(worst)
}

/// Covariance identity with the canonical γ.
pub fn qgt_covariance_check(state: &ParametrizedStateField) -> Result<f64> {
    let gamma = gamma_connection(state)?;
    qgt_covariance_residual(state, &gamma)
}

/// Residual of the two-level closed form
/// Q_ij = ¼ γ⃗_i·γ⃗_j − ħ⁻²(s·γ⃗_i)(s·γ⃗_j) + (i/2ħ) s·(γ⃗_i × γ⃗_j)
/// with γ⃗_j the R³ image of the su(2) part of γ_j and s = ħn/2.
pub fn qgt_two_level_form_check(state: &ParametrizedStateField) -> Result<f64> {
    let d = state.grid().dim();
    let len = state.grid().len();
    let hbar = state.hbar();
    let q = qgt(state)?;
    let gamma = gamma_connection(state)?;
    let mut worst = 0.0f64;
    for flat in 0..len {
        let psi = state.spinor(flat);
        // Bloch vector of the pure state, s = ħn/2
        let n = [
            2.0 * (psi[0].conj() * psi[1]).re,
            2.0 * (psi[0].conj() * psi[1]).im,
            psi[0].norm_sqr() - psi[1].norm_sqr(),
        ];
        let s = [0.5 * hbar * n[0], 0.5 * hbar * n[1], 0.5 * hbar * n[2]];
        // su(2) part of γ mapped to R³ via γ|su2 = −(i/2) γ⃗·σ. The complex
        // Pauli coefficients b_k = Tr(σ_k γ)/2 of the anti-Hermitian γ are
        // purely imaginary, so γ⃗_k = −2 Im b_k.
        let vec_of = |g: &Matrix2| -> [f64; 3] {
            let bx = 0.5 * (g.e[0][1] + g.e[1][0]);
            let by = 0.5 * Complex64::i() * (g.e[0][1] - g.e[1][0]);
            let bz = 0.5 * (g.e[0][0] - g.e[1][1]);
            [-2.0 * bx.im, -2.0 * by.im, -2.0 * bz.im]
        };
        for i in 0..d {
            for j in 0..d {
                let gi = vec_of(gamma.at(flat, i));
                let gj = vec_of(gamma.at(flat, j));
                let dot = gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2];
                let si = s[0] * gi[0] + s[1] * gi[1] + s[2] * gi[2];
                let sj = s[0] * gj[0] + s[1] * gj[1] + s[2] * gj[2];
                let cross = [
                    gi[1] * gj[2] - gi[2] * gj[1],
                    gi[2] * gj[0] - gi[0] * gj[2],
                    gi[0] * gj[1] - gi[1] * gj[0],
                ];
                let s_cross = s[0] * cross[0] + s[1] * cross[1] + s[2] * cross[2];
                let form = Complex64::new(0.25 * dot - si * sj / (hbar * hbar), 0.0)
                    + Complex64::new(0.0, s_cross / (2.0 * hbar));
                worst = worst.max((q.q(flat, i, j) - form).norm());
            }
        }
    }
    Ok(worst)
}

/// Minimal margins of the Schrödinger (Q_ii Q_jj ≥ |Q_ij|²) and Robertson
/// (√(Q_ii Q_jj) ≥ |Im Q_ij|) inequalities over the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UncertaintyMargins {
    pub schrodinger: f64,
    pub robertson: f64,
}

/// Verify both uncertainty relations pointwise (slack −1e-12); returns the
/// minimal margins, or the location of the first violation.
pub fn qgt_uncertainty_check(state: &ParametrizedStateField) -> Result<UncertaintyMargins> {
    let d = state.grid().dim();
    if d < 2 {
        return Err(Error::InvalidGrid("uncertainty check needs ≥ 2 parameters".into()));
    }
    let q = qgt(state)?;
    let mut margins = UncertaintyMargins { schrodinger: f64::INFINITY, robertson: f64::INFINITY };
    for flat in 0..q.len() {
        for i in 0..d {
            for j in (i + 1)..d {
                let qii = q.q(flat, i, i).re;
                let qjj = q.q(flat, j, j).re;
                let qij = q.q(flat, i, j);
                let schrodinger = qii * qjj - qij.norm_sqr();
                let robertson = (qii * qjj).max(0.0).sqrt() - qij.im.abs();
                if schrodinger < -1e-12 {
                    return Err(Error::UncertaintyViolated { index: flat, margin: schrodinger });
                }
                if robertson < -1e-12 {
                    return Err(Error::UncertaintyViolated { index: flat, margin: robertson });
                }
                margins.schrodinger = margins.schrodinger.min(schrodinger);
                margins.robertson = margins.robertson.min(robertson);
            }
        }
    }
    Ok(margins)
}

/// Mermin–Ho check: B_12 from the QGT against (ħ/2) n·(∂_1n × ∂_2n) with the
/// Bloch vector n(r) of the pure state, spectral derivatives. Returns the max
/// pointwise residual.
pub fn takabayasi_check(state: &ParametrizedStateField) -> Result<f64> {
    if state.grid().dim() != 2 {
        return Err(Error::InvalidGrid("Mermin–Ho check needs a 2-D parameter grid".into()));
    }
    let grid = state.grid();
    let len = grid.len();
    let hbar = state.hbar();

    let mut n_fields = vec![vec![Complex64::new(0.0, 0.0); len]; 3];
    for flat in 0..len {
        let psi = state.spinor(flat);
        let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::MixedState { norm: norm.sqrt() });
        }
        n_fields[0][flat] = Complex64::new(2.0 * (psi[0].conj() * psi[1]).re, 0.0);
        n_fields[1][flat] = Complex64::new(2.0 * (psi[0].conj() * psi[1]).im, 0.0);
        n_fields[2][flat] = Complex64::new(psi[0].norm_sqr() - psi[1].norm_sqr(), 0.0);
    }
    let mut dn = [[None, None], [None, None], [None, None]];
    for (c, f) in n_fields.iter().enumerate() {
        for axis in 0..2 {
            dn[c][axis] = Some(crate::grid::spectral_derivative(grid, f, axis)?);
        }
    }
    let b = berry_curvature(state)?;
    let mut worst = 0.0f64;
    for flat in 0..len {
        let d1 = [
            dn[0][0].as_ref().unwrap()[flat].re,
            dn[1][0].as_ref().unwrap()[flat].re,
            dn[2][0].as_ref().unwrap()[flat].re,
        ];
        let d2 = [
            dn[0][1].as_ref().unwrap()[flat].re,
            dn[1][1].as_ref().unwrap()[flat].re,
            dn[2][1].as_ref().unwrap()[flat].re,
        ];
        let cross = [
            d1[1] * d2[2] - d1[2] * d2[1],
            d1[2] * d2[0] - d1[0] * d2[2],
            d1[0] * d2[1] - d1[1] * d2[0],
        ];
        let n = [
            n_fields[0][flat].re,
            n_fields[1][flat].re,
            n_fields[2][flat].re,
        ];
        let mermin_ho = 0.5 * hbar * (n[0] * cross[0] + n[1] * cross[1] + n[2] * cross[2]);
        worst = worst.max((b[flat] - mermin_ho).abs());
    }
    Ok(worst)
}

/// Electronic band selector for loop holonomies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Lower,
    Upper,
}

/// Discrete Berry phase of a band eigenvector around a closed parameter loop:
/// −arg ∏_k ⟨v(r_k)|v(r_{k+1})⟩ with wraparound. Each eigenvector's arbitrary
/// phase appears once as bra and once as ket, so the product is
/// gauge-independent. Result in (−π, π].
pub fn berry_phase_loop(
    hamiltonian: &TwoLevelHamiltonian,
    points: &[f64],
    band: Band,
) -> Result<f64> {
    let d = hamiltonian.dim();
    if points.is_empty() || points.len() % d != 0 {
        return Err(Error::Config(format!(
            "loop points must be a flat sequence of {d}-dimensional coordinates"
        )));
    }
    let k = points.len() / d;
    if k < 64 {
        return Err(Error::Config(format!("loop needs at least 64 points (got {k})")));
    }
    let mut vectors = Vec::with_capacity(k);
    for (idx, chunk) in points.chunks(d).enumerate() {
        let (a, b) = hamiltonian.eval(chunk);
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        if nb < 1e-8 {
            return Err(Error::DegenerateLoop { index: idx, value: nb });
        }
        let surf = bo_surfaces(a, b);
        vectors.push(match band {
            Band::Lower => surf.v_lower,
            Band::Upper => surf.v_upper,
        });
    }
    let mut product = Complex64::new(1.0, 0.0);
    for i in 0..k {
        let v = vectors[i];
        let w = vectors[(i + 1) % k];
        let overlap = v[0].conj() * w[0] + v[1].conj() * w[1];
        product *= overlap / overlap.norm();
    }
    let mut phase = -product.arg();
    if phase <= -std::f64::consts::PI + 1e-12 {
        phase += 2.0 * std::f64::consts::PI;
    }
    Ok(phase)
}

/// Smooth random Bloch-sphere field for property sweeps: a few low-order
/// Fourier modes drive θ(r) around π/2 and φ(r) around 0, keeping the state
/// well away from the poles. Returns the field together with the θ and φ
/// samples so closed-form pullbacks can be compared against it.
pub fn random_bloch_field(
    grid: &Grid,
    hbar: f64,
    seed: u64,
) -> Result<(ParametrizedStateField, Vec<f64>, Vec<f64>)> {
    let d = grid.dim();
    if d == 0 || d > 2 {
        return Err(Error::InvalidGrid(format!("parameter grids are 1-D or 2-D (got {d}-D)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: &[[i32; 2]] = &[
        [1, 0],
        [0, 1],
        [1, 1],
        [1, -1],
        [2, 0],
        [0, 2],
        [2, 1],
        [1, 2],
    ];
    // coefficient set per field: (amplitude, phase) per mode
    let mut draw = |scale: f64| -> Vec<(f64, f64)> {
        modes
            .iter()
            .map(|m| {
                let order = (m[0] * m[0] + m[1] * m[1]) as f64;
                (
                    rng.gen_range(-1.0..1.0) * scale / (1.0 + order),
                    rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                )
            })
            .collect()
    };
    let theta_coeffs = draw(0.9);
    let phi_coeffs = draw(1.2);

    let len = grid.len();
    let mut theta = vec![0.0; len];
    let mut phi = vec![0.0; len];
    let mut x = vec![0.0; d];
    for flat in 0..len {
        grid.point(flat, &mut x);
        let t: Vec<f64> = (0..d)
            .map(|axis| (x[axis] - grid.lo()[axis]) / grid.extent(axis))
            .collect();
        let eval = |coeffs: &[(f64, f64)]| -> f64 {
            modes
                .iter()
                .zip(coeffs)
                .map(|(m, &(amp, ph))| {
                    let mut arg = ph;
                    arg += 2.0 * std::f64::consts::PI * m[0] as f64 * t[0];
                    if d > 1 {
                        arg += 2.0 * std::f64::consts::PI * m[1] as f64 * t[1];
                    }
                    amp * arg.cos()
                })
                .sum()
        };
        theta[flat] = 0.5 * std::f64::consts::PI + eval(&theta_coeffs);
        phi[flat] = eval(&phi_coeffs);
    }

    let mut field = GridField::zeros(grid.clone(), 2)?;
    for flat in 0..len {
        field.comp_mut(0)[flat] = Complex64::new((theta[flat] / 2.0).cos(), 0.0);
        field.comp_mut(1)[flat] = Complex64::from_polar((theta[flat] / 2.0).sin(), phi[flat]);
    }
    Ok((ParametrizedStateField::new(field, hbar)?, theta, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn param_grid(n: usize) -> Grid {
        Grid::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI], vec![n, n]).unwrap()
    }

    fn bloch_field_from(
        grid: &Grid,
        hbar: f64,
        theta: impl Fn(&[f64]) -> f64,
        phi: impl Fn(&[f64]) -> f64,
    ) -> ParametrizedStateField {
        let field = GridField::from_fn2(grid.clone(), |x| {
            let t = theta(x);
            let p = phi(x);
            [
                Complex64::new((t / 2.0).cos(), 0.0),
                Complex64::from_polar((t / 2.0).sin(), p),
            ]
        })
        .unwrap();
        ParametrizedStateField::new(field, hbar).unwrap()
    }

    fn jahn_teller() -> TwoLevelHamiltonian {
        TwoLevelHamiltonian::new(1.0, 1.0, vec![1.0, 0.0], vec![0.0, 1.0], 0.0).unwrap()
    }

    fn circle(center: [f64; 2], radius: f64, k: usize, reversed: bool) -> Vec<f64> {
        let mut pts = Vec::with_capacity(2 * k);
        for i in 0..k {
            let t = 2.0 * PI * i as f64 / k as f64;
            let t = if reversed { -t } else { t };
            pts.push(center[0] + radius * t.cos());
            pts.push(center[1] + radius * t.sin());
        }
        pts
    }

    #[test]
    fn constant_field_has_trivial_geometry() {
        let grid = param_grid(16);
        let state = bloch_field_from(&grid, 1.0, |_| 1.1, |_| 0.4);
        let q = qgt(&state).unwrap();
        let a = berry_connection(&state).unwrap();
        let gamma = gamma_connection(&state).unwrap();
        for flat in 0..grid.len() {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(q.q(flat, i, j).norm() < 1e-12);
                }
                assert!(a[i * grid.len() + flat].abs() < 1e-12);
                assert!(gamma.at(flat, i).max_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bloch_pullback_matches_closed_forms() {
        let grid = param_grid(32);
        let (state, theta, phi) = random_bloch_field(&grid, 1.0, 7).unwrap();
        let q = qgt(&state).unwrap();
        let len = grid.len();
        let hbar = 1.0;

        let th_c: Vec<Complex64> = theta.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let ph_c: Vec<Complex64> = phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut dth = Vec::new();
        let mut dph = Vec::new();
        for axis in 0..2 {
            dth.push(crate::grid::spectral_derivative(&grid, &th_c, axis).unwrap());
            dph.push(crate::grid::spectral_derivative(&grid, &ph_c, axis).unwrap());
        }
        let mut worst_t = 0.0f64;
        let mut worst_b = 0.0f64;
        for flat in 0..len {
            let st = theta[flat].sin();
            for i in 0..2 {
                for j in 0..2 {
                    let ti = 0.25
                        * (dth[i][flat].re * dth[j][flat].re
                            + st * st * dph[i][flat].re * dph[j][flat].re);
                    worst_t = worst_t.max((q.metric(flat, i, j) - ti).abs());
                    let bij = 0.5
                        * hbar
                        * st
                        * (dth[i][flat].re * dph[j][flat].re
                            - dth[j][flat].re * dph[i][flat].re);
                    worst_b = worst_b.max((q.curvature(flat, i, j) - bij).abs());
                }
            }
        }
        assert!(worst_t < 1e-8, "metric residual {worst_t:.3e}");
        assert!(worst_b < 1e-8, "curvature residual {worst_b:.3e}");
    }

    #[test]
    fn qgt_is_hermitian_with_nonnegative_diagonal() {
        let grid = param_grid(24);
        for seed in 0..10 {
            let (state, _, _) = random_bloch_field(&grid, 1.0, seed).unwrap();
            let q = qgt(&state).unwrap();
            for flat in 0..grid.len() {
                for i in 0..2 {
                    assert!(q.q(flat, i, i).im.abs() < 1e-14);
                    assert!(q.q(flat, i, i).re >= -1e-12);
                    for j in 0..2 {
                        assert!((q.q(flat, i, j) - q.q(flat, j, i).conj()).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn real_field_has_vanishing_connection() {
        let grid = param_grid(24);
        let state = bloch_field_from(
            &grid,
            1.0,
            |x| 1.2 + 0.4 * x[0].sin() + 0.3 * (x[1] + 0.2 * x[0]).cos(),
            |_| 0.0,
        );
        let a = berry_connection(&state).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn curvature_formulas_agree_and_connection_shifts_under_gauge() {
        // n = 48 keeps the aliasing tail of the phase-shifted field below the
        // tolerances (the random fields are smooth but not band-limited).
        let grid = param_grid(48);
        let (state, _, _) = random_bloch_field(&grid, 1.0, 11).unwrap();
        let from_qgt = berry_curvature(&state).unwrap();
        let from_a = berry_curvature_from_connection(&state).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            worst = worst.max((from_qgt[i] - from_a[i]).abs());
        }
        assert!(worst < 1e-8, "dual-formula residual {worst:.3e}");

        // ψ → e^{iθ(r)/ħ}ψ shifts A by ∂θ and leaves the curvature alone
        let hbar = 1.0;
        let a0 = berry_connection(&state).unwrap();
        let mut shifted = state.field().clone();
        let len = grid.len();
        let mut x = vec![0.0; 2];
        let mut dtheta = vec![vec![0.0; len]; 2];
        for flat in 0..len {
            grid.point(flat, &mut x);
            let theta = 0.4 * x[0].sin() + 0.25 * (x[1] * 2.0).cos();
            let rot = Complex64::from_polar(1.0, theta / hbar);
            shifted.comp_mut(0)[flat] *= rot;
            shifted.comp_mut(1)[flat] *= rot;
            dtheta[0][flat] = 0.4 * x[0].cos();
            dtheta[1][flat] = -0.5 * (x[1] * 2.0).sin();
        }
        let shifted_state = ParametrizedStateField::new(shifted, hbar).unwrap();
        let a1 = berry_connection(&shifted_state).unwrap();
        let mut worst_shift = 0.0f64;
        for axis in 0..2 {
            for flat in 0..len {
                let idx = axis * len + flat;
                worst_shift = worst_shift.max((a1[idx] - a0[idx] - dtheta[axis][flat]).abs());
            }
        }
        assert!(worst_shift < 1e-9, "gauge shift residual {worst_shift:.3e}");
    }

    #[test]
    fn gamma_satisfies_its_defining_relation() {
        // n = 48: the projection identity compares against the spectral
        // derivative, whose aliasing tail must sit below the 1e-13 asserts.
        let grid = param_grid(48);
        let (state, _, _) = random_bloch_field(&grid, 1.0, 3).unwrap();
        let gamma = gamma_connection(&state).unwrap();
        let a = berry_connection(&state).unwrap();
        let len = grid.len();
        let mut worst_rel = 0.0f64;
        let mut worst_skew = 0.0f64;
        let mut worst_proj = 0.0f64;
        for axis in 0..2 {
            let dpsi = state.field().spectral_derivative(axis).unwrap();
            for flat in 0..len {
                let psi = state.spinor(flat);
                let g = gamma.at(flat, axis);
                let gp = g.apply(psi);
                let dv = [dpsi.comp(0)[flat], dpsi.comp(1)[flat]];
                worst_rel = worst_rel
                    .max((gp[0] + dv[0]).norm())
                    .max((gp[1] + dv[1]).norm());
                worst_skew = worst_skew.max(g.add(&g.adjoint()).max_norm());
                // ⟨ψ|iħγ_j|ψ⟩ recovers the Berry connection
                let proj = Complex64::new(0.0, state.hbar()) * expectation(g, psi);
                assert!(proj.im.abs() < 1e-12, "projection not real: {proj}");
                worst_proj = worst_proj.max((proj.re - a[axis * len + flat]).abs());
            }
        }
        assert!(worst_rel < 1e-9, "defining relation residual {worst_rel:.3e}");
        assert!(worst_skew < 1e-13, "skew-Hermiticity residual {worst_skew:.3e}");
        assert!(worst_proj < 1e-9, "Berry projection residual {worst_proj:.3e}");
    }

    #[test]
    fn covariance_identity_holds_and_survives_gauge_ambiguity() {
        let grid = param_grid(24);
        let (state, _, _) = random_bloch_field(&grid, 1.0, 5).unwrap();
        let residual = qgt_covariance_check(&state).unwrap();
        assert!(residual < 1e-10, "covariance residual {residual:.3e}");

        // γ_j → γ_j + i c(r) ψψ† is still a valid connection
        let mut gamma = gamma_connection(&state).unwrap();
        let len = grid.len();
        let mut x = vec![0.0; 2];
        for flat in 0..len {
            grid.point(flat, &mut x);
            let c = 0.7 * x[0].cos() - 0.2 * x[1].sin();
            let psi = state.spinor(flat);
            let shift = outer(psi, psi).scale(Complex64::new(0.0, c));
            for axis in 0..2 {
                *gamma.at_mut(flat, axis) = gamma.at(flat, axis).add(&shift);
            }
        }
        let shifted = qgt_covariance_residual(&state, &gamma).unwrap();
        assert!(
            (shifted - residual).abs() < 1e-11,
            "gauge ambiguity moved the residual: {residual:.3e} → {shifted:.3e}"
        );
    }

    #[test]
    fn two_level_closed_form_matches_qgt() {
        let grid = param_grid(24);
        for seed in [0, 9, 42] {
            let (state, _, _) = random_bloch_field(&grid, 1.0, seed).unwrap();
            let residual = qgt_two_level_form_check(&state).unwrap();
            assert!(residual < 1e-9, "closed-form residual {residual:.3e} (seed {seed})");
        }
    }

    #[test]
    fn uncertainty_relations_hold_on_random_fields() {
        let grid = param_grid(16);
        for seed in 0..50 {
            let (state, _, _) = random_bloch_field(&grid, 1.0, seed).unwrap();
            let margins = qgt_uncertainty_check(&state).unwrap();
            assert!(margins.schrodinger >= -1e-12);
            assert!(margins.robertson >= -1e-12);
        }
    }

    #[test]
    fn uncertainty_equality_when_gradients_align() {
        // θ and φ depending on the same combination s = x + y make Q rank
        // one, saturating the Schrödinger inequality pointwise.
        let grid = param_grid(32);
        let state = bloch_field_from(
            &grid,
            1.0,
            |x| 1.3 + 0.4 * (x[0] + x[1]).sin(),
            |x| 0.5 * (x[0] + x[1]).cos(),
        );
        let q = qgt(&state).unwrap();
        let mut worst = 0.0f64;
        for flat in 0..grid.len() {
            let margin = q.q(flat, 0, 0).re * q.q(flat, 1, 1).re - q.q(flat, 0, 1).norm_sqr();
            worst = worst.max(margin.abs());
        }
        assert!(worst < 1e-10, "equality-case margin {worst:.3e}");
    }

    #[test]
    fn mermin_ho_relation_holds_and_refines() {
        let run = |n: usize| {
            let grid = param_grid(n);
            let (state, _, _) = random_bloch_field(&grid, 1.0, 13).unwrap();
            takabayasi_check(&state).unwrap()
        };
        let coarse = run(24);
        let fine = run(48);
        assert!(coarse < 1e-7, "Mermin–Ho residual {coarse:.3e}");
        assert!(fine < coarse / 2.0, "no refinement gain: {coarse:.3e} → {fine:.3e}");
    }

    #[test]
    fn coplanar_bloch_vectors_have_no_curvature() {
        // φ constant keeps n on a great circle; the curvature vanishes even
        // though the metric does not.
        let grid = param_grid(24);
        let state = bloch_field_from(
            &grid,
            1.0,
            |x| 1.2 + 0.4 * x[0].sin() + 0.3 * x[1].cos(),
            |_| 0.7,
        );
        let b = berry_curvature(&state).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-9), "curvature should vanish");
        let residual = takabayasi_check(&state).unwrap();
        assert!(residual < 1e-9);
    }

    #[test]
    fn jahn_teller_loop_carries_phase_pi() {
        let ham = jahn_teller();
        let p512 = berry_phase_loop(&ham, &circle([0.0, 0.0], 1.0, 512, false), Band::Lower)
            .unwrap();
        assert!((p512 - PI).abs() < 1e-3, "enclosing-loop phase {p512}");
        let p1024 = berry_phase_loop(&ham, &circle([0.0, 0.0], 1.0, 1024, false), Band::Lower)
            .unwrap();
        assert!((p512 - p1024).abs() < 1e-6, "refinement moved the phase by {:.3e}", p512 - p1024);
        let upper = berry_phase_loop(&ham, &circle([0.0, 0.0], 1.0, 512, false), Band::Upper)
            .unwrap();
        assert!((upper - PI).abs() < 1e-3, "upper-band phase {upper}");
    }

    #[test]
    fn loop_without_intersection_has_no_phase() {
        let ham = jahn_teller();
        let phase = berry_phase_loop(&ham, &circle([3.0, 0.0], 0.5, 256, false), Band::Lower)
            .unwrap();
        assert!(phase.abs() < 1e-3, "contractible-loop phase {phase}");
    }

    #[test]
    fn loop_phase_is_reparametrization_invariant_and_orientation_odd() {
        let ham = jahn_teller();
        // non-uniform parametrization of the same unit circle
        let k = 512;
        let mut pts = Vec::with_capacity(2 * k);
        for i in 0..k {
            let s = i as f64 / k as f64;
            let t = 2.0 * PI * (s + 0.15 * (2.0 * PI * s).sin() / (2.0 * PI));
            pts.push(t.cos());
            pts.push(t.sin());
        }
        let uniform =
            berry_phase_loop(&ham, &circle([0.0, 0.0], 1.0, k, false), Band::Lower).unwrap();
        let warped = berry_phase_loop(&ham, &pts, Band::Lower).unwrap();
        assert!((uniform - warped).abs() < 1e-6, "reparametrization moved the phase");

        // reversing a π loop lands on −π, which is reported as +π
        let reversed =
            berry_phase_loop(&ham, &circle([0.0, 0.0], 1.0, k, true), Band::Lower).unwrap();
        assert!((reversed - PI).abs() < 1e-3);
        // reversing a trivial loop stays at 0 = −0
        let trivial =
            berry_phase_loop(&ham, &circle([3.0, 0.0], 0.5, 256, true), Band::Lower).unwrap();
        assert!(trivial.abs() < 1e-3);
    }

    #[test]
    fn degenerate_and_undersampled_loops_are_rejected() {
        let ham = jahn_teller();
        let tiny = circle([0.0, 0.0], 1e-9, 128, false);
        assert!(matches!(
            berry_phase_loop(&ham, &tiny, Band::Lower),
            Err(Error::DegenerateLoop { .. })
        ));
        let sparse = circle([0.0, 0.0], 1.0, 32, false);
        assert!(matches!(berry_phase_loop(&ham, &sparse, Band::Lower), Err(Error::Config(_))));
    }

    #[test]
    fn quantized_phases_for_real_hamiltonians() {
        // b_y ≡ 0 for the whole family: every loop phase must be 0 or π.
        let ham = TwoLevelHamiltonian::new(1.0, 1.0, vec![0.8, 0.1], vec![-0.2, 1.1], 0.3)
            .unwrap();
        for (center, radius) in [([0.5, 0.4], 0.9), ([2.0, -1.0], 0.6), ([-0.3, 0.2], 1.4)] {
            match berry_phase_loop(&ham, &circle(center, radius, 512, false), Band::Lower) {
                Ok(phase) => {
                    let dist = phase.abs().min((phase - PI).abs());
                    assert!(dist < 1e-3, "non-quantized phase {phase}");
                }
                Err(Error::DegenerateLoop { .. }) => {} // loop ran through the intersection
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }
}
