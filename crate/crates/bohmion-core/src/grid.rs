//! Uniform periodic rectangular grids, midpoint quadrature, and spectral
//! derivatives.
//!
//! All fields in this crate live on periodic boxes `[lo_i, hi_i)` sampled at
//! the nodes `x_i = lo + j·h_i`, `j = 0..n_i`, with `h_i = (hi_i − lo_i)/n_i`
//! (the upper edge is identified with the lower one). Quadrature is the
//! midpoint rule `∑ f · ∏ h_i`, which is spectrally accurate for smooth
//! periodic integrands. Derivatives are computed in Fourier space with the
//! standard wavenumber layout (non-negative frequencies first, then negative
//! ones; for even `n` the Nyquist bin carries the negative frequency).

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic rectangular grid in `d ∈ {1,2,3}` dimensions.
///
/// Flat storage is row-major with the **last** axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        let d = n.len();
        if d == 0 || d > 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2, or 3 (got {d})"
            )));
        }
        if lo.len() != d || hi.len() != d {
            return Err(Error::InvalidGrid(format!(
                "bounds length mismatch: lo {}, hi {}, n {}",
                lo.len(),
                hi.len(),
                d
            )));
        }
        for i in 0..d {
            if !(lo[i].is_finite() && hi[i].is_finite()) || hi[i] <= lo[i] {
                return Err(Error::InvalidGrid(format!(
                    "axis {i}: need finite lo < hi (got [{}, {}])",
                    lo[i], hi[i]
                )));
            }
            if n[i] < 8 {
                return Err(Error::GridTooCoarse { n: n[i], min: 8 });
            }
        }
        Ok(Grid { lo, hi, n })
    }

    pub fn new_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Grid::new(vec![lo], vec![hi], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Number of grid nodes (product over axes).
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n[axis] as f64
    }

    /// Box length along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Volume element ∏ h_i of the midpoint rule.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.h(i)).product()
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let h = self.h(axis);
        (0..self.n[axis]).map(|j| self.lo[axis] + j as f64 * h).collect()
    }

    /// Stride of `axis` in the flat index (last axis fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n[axis + 1..].iter().product()
    }

    /// Coordinates of the node with flat index `flat`, written into `out`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let d = self.dim();
        let mut rem = flat;
        for ax in (0..d).rev() {
            let idx = rem % self.n[ax];
            rem /= self.n[ax];
            out[ax] = self.lo[ax] + idx as f64 * self.h(ax);
        }
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (ax, &i) in idx.iter().enumerate() {
            flat = flat * self.n[ax] + i;
        }
        flat
    }

    /// Angular wavenumbers `2π·freq/L` along `axis` in FFT bin order
    /// (freq = 0, 1, …, n/2−1, −n/2, …, −1 for even n).
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let l = self.extent(axis);
        let scale = 2.0 * std::f64::consts::PI / l;
        (0..n)
            .map(|j| {
                let freq = if j <= (n - 1) / 2 {
                    j as isize
                } else {
                    j as isize - n as isize
                };
                scale * freq as f64
            })
            .collect()
    }
}

/// Midpoint-rule quadrature of real samples over the grid.
///
/// Errors with "NaN in integrand" on any non-finite sample.
pub fn quadrature(grid: &Grid, samples: &[f64]) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "sample count {} does not match grid size {}",
            samples.len(),
            grid.len()
        )));
    }
    let mut sum = 0.0;
    for &v in samples {
        if !v.is_finite() {
            return Err(Error::NanInIntegrand);
        }
        sum += v;
    }
    Ok(sum * grid.cell_volume())
}

/// Complex field sampled on a [`Grid`] with `c ∈ {1,2}` components.
///
/// Storage is component-major: each component is one contiguous flat array.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Grid,
    comps: Vec<Vec<Complex64>>,
}

impl GridField {
    pub fn zeros(grid: Grid, ncomp: usize) -> Result<Self> {
        if ncomp == 0 || ncomp > 2 {
            return Err(Error::InvalidGrid(format!(
                "component count must be 1 or 2 (got {ncomp})"
            )));
        }
        let len = grid.len();
        Ok(GridField {
            grid,
            comps: vec![vec![Complex64::new(0.0, 0.0); len]; ncomp],
        })
    }

    /// Scalar field from a function of the node coordinates.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let mut field = GridField::zeros(grid, 1)?;
        let d = field.grid.dim();
        let mut x = vec![0.0; d];
        for flat in 0..field.grid.len() {
            field.grid.point(flat, &mut x);
            field.comps[0][flat] = f(&x);
        }
        Ok(field)
    }

    /// Two-component field from a function of the node coordinates.
    pub fn from_fn2(grid: Grid, mut f: impl FnMut(&[f64]) -> [Complex64; 2]) -> Result<Self> {
        let mut field = GridField::zeros(grid, 2)?;
        let d = field.grid.dim();
        let mut x = vec![0.0; d];
        for flat in 0..field.grid.len() {
            field.grid.point(flat, &mut x);
            let v = f(&x);
            field.comps[0][flat] = v[0];
            field.comps[1][flat] = v[1];
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn validate_finite(&self, context: &str) -> Result<()> {
        for comp in &self.comps {
            for v in comp {
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite(context.to_string()));
                }
            }
        }
        Ok(())
    }

    /// Pointwise squared norm ‖ψ(x)‖² summed over components.
    pub fn density(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut d = vec![0.0; len];
        for comp in &self.comps {
            for (di, v) in d.iter_mut().zip(comp.iter()) {
                *di += v.norm_sqr();
            }
        }
        d
    }

    /// ∫ ‖ψ‖² over the box.
    pub fn norm_sq(&self) -> f64 {
        let sum: f64 = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        sum * self.grid.cell_volume()
    }

    /// Quadrature of the real part (for real-valued fields).
    pub fn quadrature_re(&self) -> Result<f64> {
        if self.ncomp() != 1 {
            return Err(Error::InvalidGrid(
                "quadrature expects a single-component field".into(),
            ));
        }
        let re: Vec<f64> = self.comps[0].iter().map(|v| v.re).collect();
        quadrature(&self.grid, &re)
    }

    /// Scale all components in place.
    pub fn scale(&mut self, s: f64) {
        for comp in &mut self.comps {
            for v in comp.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Normalize to ∫‖ψ‖² = 1.
    pub fn normalize(&mut self) {
        let n2 = self.norm_sq();
        if n2 > 0.0 {
            self.scale(1.0 / n2.sqrt());
        }
    }

    /// Spectral derivative ∂/∂x_axis applied to every component.
    pub fn spectral_derivative(&self, axis: usize) -> Result<GridField> {
        let mut out = self.clone();
        for c in 0..self.ncomp() {
            out.comps[c] = spectral_derivative(&self.grid, &self.comps[c], axis)?;
        }
        Ok(out)
    }
}

/// Apply an FFT-diagonal multiplier along `axis`: values are transformed line
/// by line, multiplied by `multiplier[j]` per wavenumber bin, and transformed
/// back (normalized).
fn apply_fourier_multiplier(
    grid: &Grid,
    values: &[Complex64],
    axis: usize,
    multiplier: &[Complex64],
) -> Result<Vec<Complex64>> {
    let d = grid.dim();
    if axis >= d {
        return Err(Error::AxisOutOfRange { axis, dim: d });
    }
    let n_axis = grid.shape()[axis];
    let stride = grid.stride(axis);
    let len = grid.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_axis);
    let inv = planner.plan_fft_inverse(n_axis);

    let mut out = values.to_vec();
    let mut line = vec![Complex64::new(0.0, 0.0); n_axis];
    let norm = 1.0 / n_axis as f64;

    // Enumerate all lines along `axis`: flat = base + j*stride where base
    // runs over indices with the axis coordinate equal to zero.
    let outer = len / (n_axis * stride);
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * n_axis * stride + inner;
            for j in 0..n_axis {
                line[j] = out[base + j * stride];
            }
            fwd.process(&mut line);
            for j in 0..n_axis {
                line[j] *= multiplier[j];
            }
            inv.process(&mut line);
            for j in 0..n_axis {
                out[base + j * stride] = line[j] * norm;
            }
        }
    }
    Ok(out)
}

/// Spectral first derivative of a complex field along `axis` (multiply by ik).
///
/// For even n the unpaired Nyquist mode is dropped from the derivative: its
/// sign of k is ambiguous and the symmetric choice keeps derivatives of real
/// fields exactly real.
pub fn spectral_derivative(grid: &Grid, values: &[Complex64], axis: usize) -> Result<Vec<Complex64>> {
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: grid.dim() });
    }
    if values.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "value count {} does not match grid size {}",
            values.len(),
            grid.len()
        )));
    }
    let n = grid.shape()[axis];
    let mut ik: Vec<Complex64> = grid
        .wavenumbers(axis)
        .iter()
        .map(|&k| Complex64::new(0.0, k))
        .collect();
    if n % 2 == 0 {
        ik[n / 2] = Complex64::new(0.0, 0.0);
    }
    apply_fourier_multiplier(grid, values, axis, &ik)
}

/// Spectral second derivative along `axis` (multiply by −k²).
pub fn spectral_second_derivative(
    grid: &Grid,
    values: &[Complex64],
    axis: usize,
) -> Result<Vec<Complex64>> {
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: grid.dim() });
    }
    if values.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "value count {} does not match grid size {}",
            values.len(),
            grid.len()
        )));
    }
    let mk2: Vec<Complex64> = grid
        .wavenumbers(axis)
        .iter()
        .map(|&k| Complex64::new(-k * k, 0.0))
        .collect();
    apply_fourier_multiplier(grid, values, axis, &mk2)
}

/// Spectral Laplacian Σ_axis ∂²/∂x_axis².
pub fn spectral_laplacian(grid: &Grid, values: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut acc = spectral_second_derivative(grid, values, 0)?;
    for axis in 1..grid.dim() {
        let d2 = spectral_second_derivative(grid, values, axis)?;
        for (a, b) in acc.iter_mut().zip(d2.iter()) {
            *a += b;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadrature_constant_is_exact() {
        let grid = Grid::new_1d(0.0, 1.0, 64).unwrap();
        let ones = vec![1.0; 64];
        assert_eq!(quadrature(&grid, &ones).unwrap(), 1.0);
    }

    #[test]
    fn quadrature_gaussian_matches_sqrt_pi() {
        let grid = Grid::new_1d(-8.0, 8.0, 256).unwrap();
        let samples: Vec<f64> = grid.axis_coords(0).iter().map(|x| (-x * x).exp()).collect();
        let v = quadrature(&grid, &samples).unwrap();
        assert!(
            (v - PI.sqrt()).abs() < 1e-12,
            "gaussian quadrature error {:.3e}",
            (v - PI.sqrt()).abs()
        );
    }

    #[test]
    fn quadrature_odd_function_vanishes() {
        let grid = Grid::new_1d(-6.0, 6.0, 128).unwrap();
        let samples: Vec<f64> = grid
            .axis_coords(0)
            .iter()
            .map(|x| x * (-x * x).exp())
            .collect();
        // The node set is symmetric except for the unpaired lower edge, whose
        // integrand value is ~e^{-36}; cancellation is exact to rounding.
        let v = quadrature(&grid, &samples).unwrap();
        assert!(v.abs() < 1e-14, "odd integrand gave {v:.3e}");
    }

    #[test]
    fn quadrature_rejects_nan() {
        let grid = Grid::new_1d(0.0, 1.0, 8).unwrap();
        let mut samples = vec![0.0; 8];
        samples[3] = f64::NAN;
        assert!(matches!(
            quadrature(&grid, &samples),
            Err(Error::NanInIntegrand)
        ));
    }

    #[test]
    fn quadrature_is_linear() {
        let grid = Grid::new_1d(-3.0, 5.0, 64).unwrap();
        let xs = grid.axis_coords(0);
        let f: Vec<f64> = xs.iter().map(|x| (x * 0.7).sin()).collect();
        let g: Vec<f64> = xs.iter().map(|x| (x * 0.3).cos() * x).collect();
        let (alpha, beta) = (1.7, -0.4);
        let combo: Vec<f64> = f
            .iter()
            .zip(g.iter())
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = quadrature(&grid, &combo).unwrap();
        let rhs = alpha * quadrature(&grid, &f).unwrap() + beta * quadrature(&grid, &g).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let n = 128;
        let l = 5.0;
        let grid = Grid::new_1d(0.0, l, n).unwrap();
        let k = 2.0 * PI / l;
        let field: Vec<Complex64> = grid
            .axis_coords(0)
            .iter()
            .map(|x| Complex64::new((k * x).sin(), 0.0))
            .collect();
        let d = spectral_derivative(&grid, &field, 0).unwrap();
        let xs = grid.axis_coords(0);
        let mut worst: f64 = 0.0;
        for (v, x) in d.iter().zip(xs.iter()) {
            worst = worst.max((v.re - k * (k * x).cos()).abs().max(v.im.abs()));
        }
        assert!(worst < 1e-10, "sine derivative error {worst:.3e}");
    }

    #[test]
    fn spectral_derivative_annihilates_constants() {
        let grid = Grid::new_1d(-1.0, 1.0, 64).unwrap();
        let field = vec![Complex64::new(3.25, -0.5); 64];
        let d = spectral_derivative(&grid, &field, 0).unwrap();
        let worst = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-13, "constant derivative {worst:.3e}");
    }

    #[test]
    fn spectral_derivative_plane_wave_eigenfunction() {
        let n = 64;
        let l = 2.0 * PI;
        let grid = Grid::new_1d(0.0, l, n).unwrap();
        let k = 3.0; // a grid wavenumber for L = 2π
        let field: Vec<Complex64> = grid
            .axis_coords(0)
            .iter()
            .map(|x| Complex64::new(0.0, k * x).exp())
            .collect();
        let d = spectral_derivative(&grid, &field, 0).unwrap();
        let mut worst: f64 = 0.0;
        for (dv, fv) in d.iter().zip(field.iter()) {
            worst = worst.max((dv - Complex64::new(0.0, k) * fv).norm());
        }
        assert!(worst < 1e-10, "plane-wave derivative error {worst:.3e}");
    }

    #[test]
    fn spectral_derivative_axis_out_of_range() {
        let grid = Grid::new_1d(0.0, 1.0, 16).unwrap();
        let field = vec![Complex64::new(0.0, 0.0); 16];
        assert!(matches!(
            spectral_derivative(&grid, &field, 1),
            Err(Error::AxisOutOfRange { axis: 1, dim: 1 })
        ));
    }

    #[test]
    fn spectral_derivative_anti_self_adjoint() {
        let grid = Grid::new_1d(0.0, 2.0 * PI, 128).unwrap();
        let xs = grid.axis_coords(0);
        let f: Vec<Complex64> = xs
            .iter()
            .map(|x| Complex64::new((2.0 * x).sin() + 0.3 * (x).cos(), 0.0))
            .collect();
        let g: Vec<Complex64> = xs
            .iter()
            .map(|x| Complex64::new((3.0 * x).cos(), 0.0))
            .collect();
        let df = spectral_derivative(&grid, &f, 0).unwrap();
        let dg = spectral_derivative(&grid, &g, 0).unwrap();
        let fdg: Vec<f64> = f.iter().zip(dg.iter()).map(|(a, b)| (a * b).re).collect();
        let dfg: Vec<f64> = df.iter().zip(g.iter()).map(|(a, b)| (a * b).re).collect();
        let total =
            quadrature(&grid, &fdg).unwrap() + quadrature(&grid, &dfg).unwrap();
        assert!(total.abs() < 1e-10, "integration by parts residual {total:.3e}");
    }

    #[test]
    fn second_derivative_matches_two_first_derivatives() {
        // On band-limited content (all energy strictly below the Nyquist
        // mode) the second derivative equals two applications of the first.
        let grid = Grid::new_1d(-4.0, 4.0, 128).unwrap();
        let k0 = PI / 4.0; // fundamental of the 8-wide box
        let field: Vec<Complex64> = grid
            .axis_coords(0)
            .iter()
            .map(|x| {
                Complex64::new(
                    (3.0 * k0 * x).sin() + 0.5 * (7.0 * k0 * x).cos(),
                    0.25 * (11.0 * k0 * x).sin(),
                )
            })
            .collect();
        let d2 = spectral_second_derivative(&grid, &field, 0).unwrap();
        let d1 = spectral_derivative(&grid, &field, 0).unwrap();
        let d11 = spectral_derivative(&grid, &d1, 0).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in d2.iter().zip(d11.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-10, "second-derivative mismatch {worst:.3e}");
    }

    #[test]
    fn nyquist_mode_drops_from_first_but_not_second_derivative() {
        // The unpaired Nyquist mode has an ambiguous wavenumber sign, so the
        // first derivative resolves it symmetrically to zero; the second
        // derivative keeps the well-defined -k^2 factor.
        let n = 64;
        let grid = Grid::new_1d(0.0, 2.0 * PI, n).unwrap();
        let k_nyq = n as f64 / 2.0;
        let field: Vec<Complex64> = grid
            .axis_coords(0)
            .iter()
            .map(|x| Complex64::new((k_nyq * x).cos(), 0.0))
            .collect();
        let d1 = spectral_derivative(&grid, &field, 0).unwrap();
        let d2 = spectral_second_derivative(&grid, &field, 0).unwrap();
        let mut worst1: f64 = 0.0;
        let mut worst2: f64 = 0.0;
        for (i, (a, b)) in d1.iter().zip(d2.iter()).enumerate() {
            worst1 = worst1.max(a.norm());
            worst2 = worst2.max((b + k_nyq * k_nyq * field[i]).norm());
        }
        assert!(worst1 < 1e-10, "first derivative kept Nyquist {worst1:.3e}");
        assert!(worst2 < 1e-9, "second derivative lost Nyquist {worst2:.3e}");
    }

    #[test]
    fn derivative_along_second_axis() {
        let grid = Grid::new(
            vec![0.0, 0.0],
            vec![2.0 * PI, 2.0 * PI],
            vec![16, 32],
        )
        .unwrap();
        let mut x = [0.0; 2];
        let mut field = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (flat, v) in field.iter_mut().enumerate() {
            grid.point(flat, &mut x);
            *v = Complex64::new((2.0 * x[1]).sin() * (x[0]).cos(), 0.0);
        }
        let d = spectral_derivative(&grid, &field, 1).unwrap();
        let mut worst: f64 = 0.0;
        for (flat, v) in d.iter().enumerate() {
            grid.point(flat, &mut x);
            let exact = 2.0 * (2.0 * x[1]).cos() * (x[0]).cos();
            worst = worst.max((v.re - exact).abs().max(v.im.abs()));
        }
        assert!(worst < 1e-10, "axis-1 derivative error {worst:.3e}");
    }

    #[test]
    fn grid_field_norm_and_normalize() {
        let grid = Grid::new_1d(-8.0, 8.0, 128).unwrap();
        let mut psi = GridField::from_fn(grid, |x| {
            Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)
        })
        .unwrap();
        psi.normalize();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new_1d(0.0, 1.0, 4).is_err());
        assert!(Grid::new_1d(1.0, 0.0, 64).is_err());
        assert!(Grid::new(vec![0.0; 4], vec![1.0; 4], vec![8; 4]).is_err());
    }
}
