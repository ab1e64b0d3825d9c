//! Uniform periodic grids on the unit torus `[0,1)^N` and their discrete
//! Fourier transforms.
//!
//! Wavenumbers per axis run over the symmetric lattice `{-M/2, ..., M/2-1}`;
//! the eigenfunction attached to a lattice vector `k` is `exp(i 2 pi k.x)` with
//! Laplacian eigenvalue `lambda_k = sum_i (2 pi k_i)^2`. Stored coefficients
//! are modal amplitudes: `f(x) = sum_k c_k exp(i 2 pi k.x)`, i.e. the forward
//! transform is the DFT divided by the number of grid points and the inverse
//! is the plain unnormalized inverse DFT. A constant field therefore has
//! coefficient exactly 1 on the zero mode.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

pub struct TorusGrid {
    dim: usize,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    n: usize,
    /// signed wavenumber for each per-axis index
    waves: [Vec<i64>; MAX_DIM],
    /// Laplacian eigenvalue per flat spectral index
    lambda: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid")
            .field("shape", &self.shape())
            .finish()
    }
}

impl TorusGrid {
    /// Grid with the given per-axis resolutions (1 to 3 axes, each even and >= 8).
    pub fn new(shape: &[usize]) -> Result<Arc<TorusGrid>> {
        let dim = shape.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::config(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        for &m in shape {
            if m < 8 || m % 2 != 0 {
                return Err(Error::config(format!(
                    "per-axis resolution must be even and >= 8, got {m}"
                )));
            }
        }
        let mut sh = [1usize; MAX_DIM];
        sh[..dim].copy_from_slice(shape);
        let n: usize = sh.iter().product();

        let mut strides = [1usize; MAX_DIM];
        for d in (0..dim).rev() {
            strides[d] = if d + 1 < dim {
                strides[d + 1] * sh[d + 1]
            } else {
                1
            };
        }

        let mut waves: [Vec<i64>; MAX_DIM] = [Vec::new(), Vec::new(), Vec::new()];
        for d in 0..MAX_DIM {
            let m = sh[d];
            waves[d] = (0..m)
                .map(|i| if i < m / 2 { i as i64 } else { i as i64 - m as i64 })
                .collect();
        }

        let mut planner = FftPlanner::<f64>::new();
        let mut forward = Vec::with_capacity(dim);
        let mut inverse = Vec::with_capacity(dim);
        for d in 0..dim {
            forward.push(planner.plan_fft(sh[d], FftDirection::Forward));
            inverse.push(planner.plan_fft(sh[d], FftDirection::Inverse));
        }

        let mut grid = TorusGrid {
            dim,
            shape: sh,
            strides,
            n,
            waves,
            lambda: Vec::new(),
            forward,
            inverse,
        };
        let mut lambda = vec![0.0; n];
        for (flat, l) in lambda.iter_mut().enumerate() {
            *l = laplacian_eigenvalue(&grid.wave_at(flat)[..dim]);
        }
        grid.lambda = lambda;
        Ok(Arc::new(grid))
    }

    pub fn square(dim: usize, m: usize) -> Result<Arc<TorusGrid>> {
        TorusGrid::new(&vec![m; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    /// Total number of grid points (= number of retained modes).
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest grid spacing over the axes.
    pub fn h_min(&self) -> f64 {
        1.0 / self.shape()[..self.dim]
            .iter()
            .map(|&m| m as f64)
            .fold(0.0, f64::max)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn lambda_at(&self, flat: usize) -> f64 {
        self.lambda[flat]
    }

    /// Decompose a flat index into per-axis indices.
    #[inline]
    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for d in 0..self.dim {
            idx[d] = rem / self.strides[d];
            rem %= self.strides[d];
        }
        idx
    }

    #[inline]
    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for d in 0..self.dim {
            flat += (idx[d] % self.shape[d]) * self.strides[d];
        }
        flat
    }

    /// Signed wavenumber vector of a flat spectral index.
    #[inline]
    pub fn wave_at(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut k = [0i64; MAX_DIM];
        for d in 0..self.dim {
            k[d] = self.waves[d][idx[d]];
        }
        k
    }

    /// Wavenumber used in odd-order derivative multipliers: the unpaired
    /// Nyquist mode -M/2 is mapped to zero so that real fields stay real.
    #[inline]
    pub fn deriv_wave(&self, axis: usize, axis_idx: usize) -> i64 {
        if axis_idx == self.shape[axis] / 2 {
            0
        } else {
            self.waves[axis][axis_idx]
        }
    }

    /// Derivative wavenumber vector of a flat spectral index (Nyquist zeroed).
    #[inline]
    pub fn deriv_wave_at(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut k = [0i64; MAX_DIM];
        for d in 0..self.dim {
            k[d] = self.deriv_wave(d, idx[d]);
        }
        k
    }

    /// Physical coordinates of a flat grid index.
    #[inline]
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for d in 0..self.dim {
            x[d] = idx[d] as f64 / self.shape[d] as f64;
        }
        x
    }

    /// Flat index of the spectral conjugate mode (-k).
    #[inline]
    pub fn conj_index(&self, flat: usize) -> usize {
        let idx = self.unravel(flat);
        let mut out = 0;
        for d in 0..self.dim {
            let m = self.shape[d];
            out += ((m - idx[d]) % m) * self.strides[d];
        }
        out
    }

    /// Forward transform: values -> modal amplitudes.
    pub fn to_coeffs(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse transform: modal amplitudes -> real values (imaginary part dropped).
    pub fn to_values(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n);
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        for d in 0..self.dim {
            let len = self.shape[d];
            if len == 1 {
                continue;
            }
            let stride = self.strides[d];
            let fft = if forward {
                &self.forward[d]
            } else {
                &self.inverse[d]
            };
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let blocks = self.n / (len * stride);
            for b in 0..blocks {
                for inner in 0..stride {
                    let base = b * len * stride + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, slot) in line.iter().enumerate() {
                        buf[base + j * stride] = *slot;
                    }
                }
            }
        }
    }

    /// Enforce the Hermitian symmetry `c_{-k} = conj(c_k)` of a real field's
    /// spectrum, averaging conjugate pairs.
    pub fn hermitian_symmetrize(&self, coeffs: &mut [Complex64]) {
        assert_eq!(coeffs.len(), self.n);
        for flat in 0..self.n {
            let other = self.conj_index(flat);
            if other < flat {
                continue;
            }
            if other == flat {
                coeffs[flat] = Complex64::new(coeffs[flat].re, 0.0);
            } else {
                let avg = 0.5 * (coeffs[flat] + coeffs[other].conj());
                coeffs[flat] = avg;
                coeffs[other] = avg.conj();
            }
        }
    }

    /// Largest deviation from Hermitian symmetry, for diagnostics.
    pub fn hermitian_residual(&self, coeffs: &[Complex64]) -> f64 {
        let mut worst: f64 = 0.0;
        for flat in 0..self.n {
            let other = self.conj_index(flat);
            worst = worst.max((coeffs[flat] - coeffs[other].conj()).norm());
        }
        worst
    }
}

/// `lambda_k = sum_i (2 pi k_i)^2` for a signed lattice vector.
pub fn laplacian_eigenvalue(k: &[i64]) -> f64 {
    k.iter()
        .map(|&ki| {
            let w = 2.0 * PI * ki as f64;
            w * w
        })
        .sum()
}

pub fn same_grid(a: &Arc<TorusGrid>, b: &Arc<TorusGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.shape() == b.shape()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(&[]).is_err());
        assert!(TorusGrid::new(&[7]).is_err());
        assert!(TorusGrid::new(&[8, 6]).is_err());
        assert!(TorusGrid::new(&[8, 8, 8, 8]).is_err());
        assert!(TorusGrid::new(&[8, 16, 32]).is_ok());
    }

    #[test]
    fn eigenvalue_table() {
        assert!((laplacian_eigenvalue(&[1, 0]) - 4.0 * PI * PI).abs() < 1e-10);
        assert!((laplacian_eigenvalue(&[1, 2, 2]) - 36.0 * PI * PI).abs() < 1e-9);
        assert_eq!(laplacian_eigenvalue(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn constant_field_has_unit_zero_mode() {
        let g = TorusGrid::new(&[16, 8]).unwrap();
        let c = g.to_coeffs(&vec![1.0; g.len()]);
        assert!((c[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for v in &c[1..] {
            assert!(v.norm() < 1e-13);
        }
    }

    #[test]
    fn sine_has_two_modes() {
        let g = TorusGrid::new(&[32]).unwrap();
        let vals: Vec<f64> = (0..32).map(|j| (2.0 * PI * j as f64 / 32.0).sin()).collect();
        let c = g.to_coeffs(&vals);
        // sin(2 pi x) = (e^{i2pix} - e^{-i2pix}) / (2i): c_1 = -i/2, c_-1 = +i/2
        assert!((c[1] - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((c[31] - Complex64::new(0.0, 0.5)).norm() < 1e-12);
        let leak: f64 = (0..32)
            .filter(|&i| i != 1 && i != 31)
            .map(|i| c[i].norm())
            .fold(0.0, f64::max);
        assert!(leak < 1e-13);
    }

    #[test]
    fn roundtrip_and_parseval() {
        use rand::{Rng, SeedableRng};
        let g = TorusGrid::new(&[16, 8, 12]).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coeffs = g.to_coeffs(&vals);
        let back = g.to_values(&coeffs);
        let scale: f64 = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = vals
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale.max(1.0), "roundtrip err {err}");

        let l2_sq: f64 = vals.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        let spec_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        assert!((l2_sq - spec_sq).abs() < 1e-10 * l2_sq.max(1.0));

        assert!(g.hermitian_residual(&coeffs) < 1e-12);
    }

    #[test]
    fn conjugate_index_is_involution() {
        let g = TorusGrid::new(&[8, 10]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.conj_index(g.conj_index(flat)), flat);
        }
    }
}
