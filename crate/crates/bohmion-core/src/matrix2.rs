//! Dense complex 2×2 matrices, the Pauli basis, and the closed-form unitary
//! exponential exp(−i·dt·H/ħ) for Hermitian H.

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex 2×2 matrix, row-major entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2 {
    pub e: [[Complex64; 2]; 2],
}

impl Matrix2 {
    pub fn zero() -> Self {
        Matrix2 {
            e: [[Complex64::new(0.0, 0.0); 2]; 2],
        }
    }

    pub fn identity() -> Self {
        let mut m = Matrix2::zero();
        m.e[0][0] = Complex64::new(1.0, 0.0);
        m.e[1][1] = Complex64::new(1.0, 0.0);
        m
    }

    /// Pauli matrices (σ_x, σ_y, σ_z).
    pub fn paulis() -> [Matrix2; 3] {
        let o = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        [
            Matrix2 { e: [[o, one], [one, o]] },
            Matrix2 { e: [[o, -I], [I, o]] },
            Matrix2 { e: [[one, o], [o, -one]] },
        ]
    }

    /// Hermitian matrix a·1 + b·σ from its Pauli coefficients.
    pub fn from_pauli(a: f64, b: [f64; 3]) -> Self {
        Matrix2 {
            e: [
                [
                    Complex64::new(a + b[2], 0.0),
                    Complex64::new(b[0], -b[1]),
                ],
                [
                    Complex64::new(b[0], b[1]),
                    Complex64::new(a - b[2], 0.0),
                ],
            ],
        }
    }

    /// Pauli coefficients (a, b) of the Hermitian part: a = Re tr/2,
    /// b_k = Re tr(σ_k·M)/2. Exact for Hermitian input.
    pub fn pauli_decompose(&self) -> (f64, [f64; 3]) {
        let a = 0.5 * (self.e[0][0].re + self.e[1][1].re);
        let bx = 0.5 * (self.e[0][1].re + self.e[1][0].re);
        let by = 0.5 * (self.e[1][0].im - self.e[0][1].im);
        let bz = 0.5 * (self.e[0][0].re - self.e[1][1].re);
        (a, [bx, by, bz])
    }

    pub fn adjoint(&self) -> Self {
        Matrix2 {
            e: [
                [self.e[0][0].conj(), self.e[1][0].conj()],
                [self.e[0][1].conj(), self.e[1][1].conj()],
            ],
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.e[0][0] + self.e[1][1]
    }

    pub fn mul(&self, rhs: &Matrix2) -> Matrix2 {
        let mut out = Matrix2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = self.e[i][0] * rhs.e[0][j] + self.e[i][1] * rhs.e[1][j];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix2) -> Matrix2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] += rhs.e[i][j];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Matrix2) -> Matrix2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] -= rhs.e[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Matrix2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] *= s;
            }
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Matrix2 {
        self.scale(Complex64::new(s, 0.0))
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, rhs: &Matrix2) -> Matrix2 {
        self.mul(rhs).sub(&rhs.mul(self))
    }

    /// {A, B} = AB + BA.
    pub fn anticommutator(&self, rhs: &Matrix2) -> Matrix2 {
        self.mul(rhs).add(&rhs.mul(self))
    }

    /// Re tr(A·B) — the Frobenius pairing used for the coupling coefficients.
    pub fn re_tr_mul(&self, rhs: &Matrix2) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                s += (self.e[i][k] * rhs.e[k][i]).re;
            }
        }
        s
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.e[0][0] * v[0] + self.e[0][1] * v[1],
            self.e[1][0] * v[0] + self.e[1][1] * v[1],
        ]
    }

    /// Largest absolute deviation from Hermiticity, max |M_ij − conj(M_ji)|.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                r = r.max((self.e[i][j] - self.e[j][i].conj()).norm());
            }
        }
        r
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max(self.e[i][j].norm());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// U M U† (conjugation, used for unitary updates of density matrices).
    pub fn conjugate_by(&self, u: &Matrix2) -> Matrix2 {
        u.mul(self).mul(&u.adjoint())
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn eigenvalues_hermitian(&self) -> [f64; 2] {
        let (a, b) = self.pauli_decompose();
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        [a - nb, a + nb]
    }
}

/// Closed-form unitary exp(−i·dt·H/ħ) for Hermitian H = a·1 + b·σ:
///
///   U = e^{−i a dt/ħ}(cos(|b| dt/ħ)·1 − i sin(|b| dt/ħ)·b̂·σ).
///
/// The decomposition is exact in the Pauli basis; the result is unitary to
/// rounding. Non-Hermitian input (residual > 1e-12·‖H‖) is rejected.
pub fn expm_two_level(h: &Matrix2, dt: f64, hbar: f64) -> Result<Matrix2> {
    if !h.is_finite() || !dt.is_finite() {
        return Err(Error::NonFinite("expm_two_level input".into()));
    }
    let scale = h.max_norm().max(1.0);
    let herm = h.hermiticity_residual();
    if herm > 1e-12 * scale {
        return Err(Error::NotHermitian { residual: herm });
    }
    let (a, b) = h.pauli_decompose();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let phase = (-I * (a * dt / hbar)).exp();
    if nb == 0.0 {
        return Ok(Matrix2::identity().scale(phase));
    }
    let beta = nb * dt / hbar;
    let bhat = [b[0] / nb, b[1] / nb, b[2] / nb];
    let cos_part = Matrix2::identity().scale_re(beta.cos());
    let sin_part = Matrix2::from_pauli(0.0, bhat).scale(-I * beta.sin());
    Ok(cos_part.add(&sin_part).scale(phase))
}
