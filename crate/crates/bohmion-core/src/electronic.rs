//! Two-level electronic structure: the spin-boson / Jahn–Teller Hamiltonian
//! family, Born–Oppenheimer surfaces with a robust eigenvector gauge, and
//! Bloch-vector algebra.
//!
//! The Hamiltonian on C² is H(r) = a(r)·1 + b(r)·σ with
//!
//!   a(r) = ½ M ω² |r|²,   b(r) = ½ (C·r + E, 0, D·r),
//!
//! where C, D ∈ R^d are linear coupling vectors and E a constant offset.
//! With C = (c, 0), D = (0, c), E = 0 in d = 2 this is the linear E⊗ε
//! Jahn–Teller model, whose surfaces intersect conically at the origin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix2::Matrix2;

/// Spin-boson family two-level Hamiltonian with analytic gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelHamiltonian {
    /// Nuclear mass entering the harmonic scalar part.
    pub mass: f64,
    /// Harmonic frequency of the scalar part.
    pub omega: f64,
    /// Linear coupling on σ_x, one entry per nuclear axis.
    pub c: Vec<f64>,
    /// Linear coupling on σ_z, one entry per nuclear axis.
    pub d: Vec<f64>,
    /// Constant σ_x offset.
    pub e: f64,
}

impl TwoLevelHamiltonian {
    pub fn new(mass: f64, omega: f64, c: Vec<f64>, d: Vec<f64>, e: f64) -> Result<Self> {
        let h = TwoLevelHamiltonian { mass, omega, c, d, e };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::Config(format!("nuclear mass must be positive (got {})", self.mass)));
        }
        if self.c.len() != self.d.len() || self.c.is_empty() || self.c.len() > 3 {
            return Err(Error::Config(format!(
                "coupling vectors must share a dimension in 1..=3 (got C: {}, D: {})",
                self.c.len(),
                self.d.len()
            )));
        }
        if !self.omega.is_finite()
            || !self.e.is_finite()
            || self.c.iter().chain(self.d.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::Config("non-finite Hamiltonian parameter".into()));
        }
        Ok(())
    }

    /// Nuclear dimension d.
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Scalar part a(r) = ½Mω²|r|².
    pub fn scalar(&self, r: &[f64]) -> f64 {
        let r2: f64 = r.iter().map(|x| x * x).sum();
        0.5 * self.mass * self.omega * self.omega * r2
    }

    /// Vector part b(r) = ½(C·r + E, 0, D·r).
    pub fn vector(&self, r: &[f64]) -> [f64; 3] {
        let cr: f64 = self.c.iter().zip(r).map(|(c, x)| c * x).sum();
        let dr: f64 = self.d.iter().zip(r).map(|(d, x)| d * x).sum();
        [0.5 * (cr + self.e), 0.0, 0.5 * dr]
    }

    /// (a, b) at r.
    pub fn eval(&self, r: &[f64]) -> (f64, [f64; 3]) {
        (self.scalar(r), self.vector(r))
    }

    /// (∇a, ∇b) at r: ∇a = Mω²r, ∂b/∂r_i = ½(C_i, 0, D_i).
    pub fn grad(&self, r: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let grad_a: Vec<f64> = r
            .iter()
            .map(|x| self.mass * self.omega * self.omega * x)
            .collect();
        let grad_b: Vec<[f64; 3]> = (0..self.dim())
            .map(|i| [0.5 * self.c[i], 0.0, 0.5 * self.d[i]])
            .collect();
        (grad_a, grad_b)
    }

    /// Matrix form a·1 + b·σ at r.
    pub fn matrix(&self, r: &[f64]) -> Matrix2 {
        let (a, b) = self.eval(r);
        Matrix2::from_pauli(a, b)
    }

    /// Per-axis gradient matrices ∂H/∂r_i.
    pub fn grad_matrix(&self, r: &[f64]) -> Vec<Matrix2> {
        let (ga, gb) = self.grad(r);
        (0..self.dim())
            .map(|i| Matrix2::from_pauli(ga[i], gb[i]))
            .collect()
    }
}

/// Born–Oppenheimer data at a single nuclear geometry.
#[derive(Debug, Clone, Copy)]
pub struct BoSurfaces {
    pub e_lower: f64,
    pub e_upper: f64,
    pub v_lower: [Complex64; 2],
    pub v_upper: [Complex64; 2],
    /// Set when |b| = 0 exactly; the eigenvectors are then the flagged
    /// canonical ±z basis and the gauge is meaningless.
    pub degenerate: bool,
}

/// Adiabatic surfaces E± = a ± |b| and eigenvectors of a·1 + b·σ.
///
/// The eigenvector branch is selected by the sign of b_z so the formula never
/// degenerates: for the lower band, (b_z−|b|, b_x+ib_y) when b_z ≤ 0 and
/// (−(b_x−ib_y), b_z+|b|) when b_z > 0 (each manifestly nonzero on its
/// half-space); the upper band mirrors this. The arbitrary overall phase is
/// fixed by making the largest-magnitude component real positive, which is
/// the deterministic gauge used by the Wilson-loop phase.
pub fn bo_surfaces(a: f64, b: [f64; 3]) -> BoSurfaces {
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if nb == 0.0 {
        return BoSurfaces {
            e_lower: a,
            e_upper: a,
            v_lower: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            v_upper: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            degenerate: true,
        };
    }
    let bp = Complex64::new(b[0], b[1]); // b_x + i b_y
    let v_lower = if b[2] <= 0.0 {
        [Complex64::new(b[2] - nb, 0.0), bp]
    } else {
        [-bp.conj(), Complex64::new(b[2] + nb, 0.0)]
    };
    let v_upper = if b[2] >= 0.0 {
        [Complex64::new(b[2] + nb, 0.0), bp]
    } else {
        [bp.conj(), Complex64::new(nb - b[2], 0.0)]
    };
    BoSurfaces {
        e_lower: a - nb,
        e_upper: a + nb,
        v_lower: canonical_gauge(normalize2(v_lower)),
        v_upper: canonical_gauge(normalize2(v_upper)),
        degenerate: false,
    }
}

fn normalize2(v: [Complex64; 2]) -> [Complex64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Rotate the overall phase so the largest-magnitude component is real
/// positive (ties broken toward the first component).
pub fn canonical_gauge(v: [Complex64; 2]) -> [Complex64; 2] {
    let idx = if v[1].norm_sqr() > v[0].norm_sqr() { 1 } else { 0 };
    let mag = v[idx].norm();
    if mag == 0.0 {
        return v;
    }
    let phase = v[idx].conj() / mag;
    [v[0] * phase, v[1] * phase]
}

/// Bloch vector of a positive-trace Hermitian 2×2 matrix:
/// n_i = tr(ρσ_i)/tr(ρ).
pub fn bloch_from_rho(rho: &Matrix2) -> Result<[f64; 3]> {
    let herm = rho.hermiticity_residual();
    let scale = rho.max_norm().max(1e-300);
    if herm > 1e-12 * scale {
        return Err(Error::NotHermitian { residual: herm });
    }
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::Config(format!("density matrix trace must be positive (got {tr})")));
    }
    let paulis = Matrix2::paulis();
    let mut n = [0.0; 3];
    for (i, s) in paulis.iter().enumerate() {
        n[i] = rho.re_tr_mul(s) / tr;
    }
    Ok(n)
}

/// Hermitian matrix (trace/2)(1 + n·σ) with the given trace.
pub fn rho_from_bloch(n: [f64; 3], trace: f64) -> Matrix2 {
    Matrix2::from_pauli(1.0, n).scale_re(0.5 * trace)
}

/// Unit spinor whose pure-state density matrix has Bloch vector n (|n| = 1):
/// ψ = (cos(θ/2), sin(θ/2)e^{iφ}) in spherical coordinates of n.
pub fn spinor_from_bloch(n: [f64; 3]) -> Result<[Complex64; 2]> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::MixedState { norm });
    }
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi = n[1].atan2(n[0]);
    Ok([
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::new(0.0, phi).exp() * (theta / 2.0).sin(),
    ])
}

/// Purity tr(ρ²)/tr(ρ)² — equals 1 exactly on pure states, ½ at the
/// maximally mixed state.
pub fn purity(rho: &Matrix2) -> f64 {
    let tr = rho.trace().re;
    rho.re_tr_mul(rho) / (tr * tr)
}
