//! Immutable scalar and vector fields holding both grid values and modal
//! amplitudes, synchronized lazily.
//!
//! Norm conventions: integrals over the unit torus are grid averages, so
//! `|f|_p = (mean |f|^p)^{1/p}` and Parseval reads `|f|_2^2 = sum_k |c_k|^2`.
//! Sobolev norms are spectral: `||f||_s^2 = sum_k (1+lambda_k)^s |c_k|^2`.

use num_complex::Complex64;
use std::sync::{Arc, OnceLock};

use crate::grid::{same_grid, TorusGrid, MAX_DIM};
use crate::spectral;

#[derive(Debug)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        let f = ScalarField {
            grid: self.grid.clone(),
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        if let Some(v) = self.values.get() {
            let _ = f.values.set(v.clone());
        }
        if let Some(c) = self.coeffs.get() {
            let _ = f.coeffs.set(c.clone());
        }
        f
    }
}

impl ScalarField {
    pub fn from_values(grid: Arc<TorusGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        let f = ScalarField {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        f.values.set(values).unwrap();
        f
    }

    /// Build from modal amplitudes; Hermitian symmetry is enforced so the
    /// field is real.
    pub fn from_coeffs(grid: Arc<TorusGrid>, mut coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        grid.hermitian_symmetrize(&mut coeffs);
        Self::from_coeffs_unchecked(grid, coeffs)
    }

    /// Internal: caller guarantees Hermitian symmetry (multiplier operators
    /// preserve it).
    pub(crate) fn from_coeffs_unchecked(grid: Arc<TorusGrid>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        let f = ScalarField {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        f.coeffs.set(coeffs).unwrap();
        f
    }

    pub fn from_fn(grid: Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        Self::from_values(grid, vals)
    }

    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        let n = grid.len();
        Self::from_values(grid, vec![0.0; n])
    }

    pub fn constant(grid: Arc<TorusGrid>, v: f64) -> Self {
        let n = grid.len();
        Self::from_values(grid, vec![v; n])
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values
            .get_or_init(|| self.grid.to_values(self.coeffs.get().expect("empty field")))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs
            .get_or_init(|| self.grid.to_coeffs(self.values.get().expect("empty field")))
    }

    /// Drop the cached spectral side (storage diet for long trajectories).
    pub fn compact(&self) -> ScalarField {
        ScalarField::from_values(self.grid.clone(), self.values().to_vec())
    }

    pub fn mean(&self) -> f64 {
        if let Some(c) = self.coeffs.get() {
            c[0].re
        } else {
            let v = self.values();
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        if let Some(c) = self.coeffs.get() {
            c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        } else {
            let v = self.values();
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        }
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0);
        let v = self.values();
        (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / v.len() as f64).powf(1.0 / p)
    }

    /// `sum_k (1+lambda_k)^s |c_k|^2`
    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        let c = self.coeffs();
        let lam = self.grid.lambda();
        c.iter()
            .zip(lam)
            .map(|(z, &l)| (1.0 + l).powf(s) * z.norm_sqr())
            .sum()
    }

    /// `sum_k lambda_k^m |c_k|^2`, the squared L2 norm of the m-th gradient.
    pub fn seminorm_sq(&self, m: u32) -> f64 {
        let c = self.coeffs();
        let lam = self.grid.lambda();
        c.iter()
            .zip(lam)
            .map(|(z, &l)| l.powi(m as i32) * z.norm_sqr())
            .sum()
    }

    /// `|f|_p + |grad f|_p + |hess f|_p` with pointwise Euclidean/Frobenius
    /// magnitudes.
    pub fn w2p_norm(&self, p: f64) -> f64 {
        let grad = spectral::gradient(self);
        let hess_sq = spectral::hessian_frobenius_sq(self);
        let n = self.grid.len() as f64;
        let grad_p = {
            let mut acc = 0.0;
            for i in 0..self.grid.len() {
                let mut s = 0.0;
                for comp in grad.components() {
                    let v = comp.values()[i];
                    s += v * v;
                }
                acc += s.sqrt().powf(p);
            }
            (acc / n).powf(1.0 / p)
        };
        let hess_p = (hess_sq.values().iter().map(|&s| s.max(0.0).sqrt().powf(p)).sum::<f64>()
            / n)
            .powf(1.0 / p);
        self.lp_norm(p) + grad_p + hess_p
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_values(self.grid.clone(), self.values().iter().map(|&v| f(v)).collect())
    }

    pub fn binary(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(same_grid(&self.grid, &other.grid));
        let vals = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_values(self.grid.clone(), vals)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.linear_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.linear_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        if let Some(c) = self.coeffs.get() {
            ScalarField::from_coeffs_unchecked(self.grid.clone(), c.iter().map(|z| z * s).collect())
        } else {
            self.map_values(|v| v * s)
        }
    }

    /// `a*self + b*other`, staying in whichever representation both sides have.
    pub fn linear_comb(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        assert!(same_grid(&self.grid, &other.grid));
        match (self.coeffs.get(), other.coeffs.get()) {
            (Some(ca), Some(cb)) => ScalarField::from_coeffs_unchecked(
                self.grid.clone(),
                ca.iter().zip(cb).map(|(x, y)| x * a + y * b).collect(),
            ),
            _ => self.binary(other, |x, y| a * x + b * y),
        }
    }

    pub fn mul_pointwise(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, |a, b| a * b)
    }

    /// L2 inner product (grid average).
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert!(same_grid(&self.grid, &other.grid));
        let n = self.grid.len() as f64;
        self.values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n
    }
}

#[derive(Debug, Clone)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Self {
        assert!(!comps.is_empty());
        assert_eq!(comps.len(), comps[0].grid().dim());
        VectorField { comps }
    }

    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        let comps = (0..grid.dim()).map(|_| ScalarField::zeros(grid.clone())).collect();
        VectorField { comps }
    }

    #[allow(clippy::type_complexity)]
    pub fn from_fns(grid: Arc<TorusGrid>, fns: &[&dyn Fn(&[f64]) -> f64]) -> Self {
        assert_eq!(fns.len(), grid.dim());
        VectorField {
            comps: fns.iter().map(|f| ScalarField::from_fn(grid.clone(), f)).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn compact(&self) -> VectorField {
        VectorField::new(self.comps.iter().map(|c| c.compact()).collect())
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> VectorField {
        VectorField::new(self.comps.iter().map(f).collect())
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> VectorField {
        self.map(|c| c.scale(s))
    }

    pub fn linear_comb(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        self.zip(other, |x, y| x.linear_comb(a, y, b))
    }

    pub fn zip(
        &self,
        other: &VectorField,
        f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
    ) -> VectorField {
        assert_eq!(self.dim(), other.dim());
        VectorField::new(
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| f(a, b))
                .collect(),
        )
    }

    /// Pointwise Euclidean magnitude squared.
    pub fn magnitude_sq(&self) -> ScalarField {
        let n = self.grid().len();
        let mut vals = vec![0.0; n];
        for comp in &self.comps {
            for (acc, &v) in vals.iter_mut().zip(comp.values()) {
                *acc += v * v;
            }
        }
        ScalarField::from_values(self.grid().clone(), vals)
    }

    pub fn sup_norm(&self) -> f64 {
        self.magnitude_sq()
            .values()
            .iter()
            .map(|&s| s.sqrt())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| {
                let v = c.l2_norm();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `(mean |u(x)|^p)^{1/p}` with pointwise Euclidean magnitude.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mag = self.magnitude_sq();
        let n = self.grid().len() as f64;
        (mag.values().iter().map(|&s| s.max(0.0).sqrt().powf(p)).sum::<f64>() / n).powf(1.0 / p)
    }

    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        self.comps.iter().map(|c| c.sobolev_norm_sq(s)).sum()
    }

    pub fn seminorm_sq(&self, m: u32) -> f64 {
        self.comps.iter().map(|c| c.seminorm_sq(m)).sum()
    }

    /// `|u|_p + |grad u|_p + |hess u|_p`, Frobenius over components and axes.
    pub fn w2p_norm(&self, p: f64) -> f64 {
        let grid = self.grid();
        let n = grid.len() as f64;
        let mut grad_sq = vec![0.0; grid.len()];
        let mut hess_sq = vec![0.0; grid.len()];
        for comp in &self.comps {
            let g = spectral::gradient(comp);
            for gc in g.components() {
                for (acc, &v) in grad_sq.iter_mut().zip(gc.values()) {
                    *acc += v * v;
                }
            }
            let h = spectral::hessian_frobenius_sq(comp);
            for (acc, &v) in hess_sq.iter_mut().zip(h.values()) {
                *acc += v;
            }
        }
        let lp = |sq: &[f64]| {
            (sq.iter().map(|&s| s.max(0.0).sqrt().powf(p)).sum::<f64>() / n).powf(1.0 / p)
        };
        self.lp_norm(p) + lp(&grad_sq) + lp(&hess_sq)
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    /// Max |div u| over the grid.
    pub fn divergence_residual(&self) -> f64 {
        spectral::divergence(self).sup_norm()
    }
}

/// Convenience for building positions arrays in transport code.
pub fn flat_coords(grid: &TorusGrid) -> Vec<[f64; MAX_DIM]> {
    (0..grid.len()).map(|i| grid.coords(i)).collect()
}
