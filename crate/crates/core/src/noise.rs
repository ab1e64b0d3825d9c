//! Truncated cylindrical Wiener forcing `sum_k Phi_k dW_k` with smooth,
//! divergence-free mode shapes, and the associated stochastic convolution
//! `z(t) = int_0^t S(t-s) Phi dW(s)` driven by the variable-coefficient heat
//! propagator (exponential Euler: `z_{j+1} = S(dt)(z_j + sum_k Phi_k dW_{k,j})`).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::rng::{self, TAG_CHECKS, TAG_WIENER};
use crate::semigroup::Propagator;
use crate::spectral;
use crate::stats;

/// Wavevectors for the smooth divergence-free preset, lowest frequencies
/// first; amplitude of mode k is `amp * (1 + lambda_k)^{-1}` with alternating
/// cosine/sine profiles and unit direction perpendicular to k.
const SMOOTH_MODES_2D: [[i64; 2]; 16] = [
    [1, 0], [0, 1], [1, 1], [1, -1], [2, 0], [0, 2], [2, 1], [1, 2],
    [2, 2], [2, -1], [1, -2], [3, 0], [0, 3], [3, 1], [1, 3], [2, -2],
];

const SMOOTH_MODES_3D: [[i64; 3]; 16] = [
    [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1],
    [1, 1, 1], [2, 0, 0], [0, 2, 0], [0, 0, 2], [2, 1, 0], [1, 2, 0],
    [1, 0, 2], [0, 1, 2], [2, 1, 1], [1, 2, 1],
];

pub struct NoiseModel {
    grid: Arc<TorusGrid>,
    modes: Vec<VectorField>,
    l2_sq: Vec<f64>,
}

impl NoiseModel {
    fn from_modes(grid: Arc<TorusGrid>, modes: Vec<VectorField>) -> Self {
        let l2_sq = modes
            .iter()
            .map(|m| {
                // cache both representations up front
                for c in m.components() {
                    c.coeffs();
                    c.values();
                }
                let n = m.l2_norm();
                n * n
            })
            .collect();
        NoiseModel { grid, modes, l2_sq }
    }

    pub fn off(grid: Arc<TorusGrid>) -> Self {
        NoiseModel {
            grid,
            modes: Vec::new(),
            l2_sq: Vec::new(),
        }
    }

    /// The worked single-mode shape `(sin 2 pi x_1, 0, ...)`; not divergence
    /// free, kept for the forcing-regularity constant.
    pub fn single_mode(grid: Arc<TorusGrid>) -> Result<Self> {
        if grid.dim() < 2 {
            return Err(Error::input("single_mode preset needs at least two components"));
        }
        let mut comps = vec![ScalarField::from_fn(grid.clone(), |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin()
        })];
        for _ in 1..grid.dim() {
            comps.push(ScalarField::zeros(grid.clone()));
        }
        Ok(NoiseModel::from_modes(grid, vec![VectorField::new(comps)]))
    }

    /// One divergence-free shear mode `amp (sin 2 pi x_2, 0, ...)`.
    pub fn shear(grid: Arc<TorusGrid>, amp: f64) -> Result<Self> {
        if grid.dim() < 2 {
            return Err(Error::input("shear preset needs at least two components"));
        }
        let mut comps = vec![ScalarField::from_fn(grid.clone(), move |x| {
            amp * (2.0 * std::f64::consts::PI * x[1]).sin()
        })];
        for _ in 1..grid.dim() {
            comps.push(ScalarField::zeros(grid.clone()));
        }
        Ok(NoiseModel::from_modes(grid, vec![VectorField::new(comps)]))
    }

    /// `count` smooth divergence-free modes with `(1 + lambda)^{-1}` amplitude
    /// decay, alternating cosine/sine profiles.
    pub fn smooth(grid: Arc<TorusGrid>, amp: f64, count: usize) -> Result<Self> {
        let dim = grid.dim();
        if dim < 2 {
            return Err(Error::input(
                "divergence-free forcing needs at least two components",
            ));
        }
        let max = 16;
        if count > max {
            return Err(Error::input(format!(
                "smooth preset provides at most {max} modes, asked for {count}"
            )));
        }
        let mut modes = Vec::with_capacity(count);
        for idx in 0..count {
            let (k, dir) = match dim {
                2 => {
                    let k2 = SMOOTH_MODES_2D[idx];
                    let norm = ((k2[0] * k2[0] + k2[1] * k2[1]) as f64).sqrt();
                    (
                        [k2[0], k2[1], 0],
                        [-(k2[1] as f64) / norm, k2[0] as f64 / norm, 0.0],
                    )
                }
                _ => {
                    let k3 = SMOOTH_MODES_3D[idx];
                    let e = if k3[1] == 0 && k3[2] == 0 {
                        [0.0, 1.0, 0.0]
                    } else {
                        [1.0, 0.0, 0.0]
                    };
                    let kf = [k3[0] as f64, k3[1] as f64, k3[2] as f64];
                    let cross = [
                        kf[1] * e[2] - kf[2] * e[1],
                        kf[2] * e[0] - kf[0] * e[2],
                        kf[0] * e[1] - kf[1] * e[0],
                    ];
                    let norm =
                        (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                    (
                        k3,
                        [cross[0] / norm, cross[1] / norm, cross[2] / norm],
                    )
                }
            };
            let lambda = crate::grid::laplacian_eigenvalue(&k[..dim]);
            let a = amp / (1.0 + lambda);
            let use_cos = idx % 2 == 0;
            let mut comps = Vec::with_capacity(dim);
            for d in 0..dim {
                let coef = a * dir[d];
                comps.push(ScalarField::from_fn(grid.clone(), move |x| {
                    let phase = 2.0
                        * std::f64::consts::PI
                        * (0..dim).map(|i| k[i] as f64 * x[i]).sum::<f64>();
                    coef * if use_cos { phase.cos() } else { phase.sin() }
                }));
            }
            modes.push(VectorField::new(comps));
        }
        Ok(NoiseModel::from_modes(grid, modes))
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn modes(&self) -> &[VectorField] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Per-mode squared L2 norms.
    pub fn l2_sq(&self) -> &[f64] {
        &self.l2_sq
    }

    /// `sum_k ||Phi_k||_2^2`, the Ito isometry rate.
    pub fn l2_sq_sum(&self) -> f64 {
        self.l2_sq.iter().sum()
    }

    /// Pointwise `sum_k |Phi_k(x)|^2` as a field (energy-injection density).
    pub fn pointwise_sq_sum(&self) -> ScalarField {
        let n = self.grid.len();
        let mut acc = vec![0.0; n];
        for m in &self.modes {
            for c in m.components() {
                for (a, &v) in acc.iter_mut().zip(c.values()) {
                    *a += v * v;
                }
            }
        }
        ScalarField::from_values(self.grid.clone(), acc)
    }

    pub fn max_divergence_residual(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.divergence_residual())
            .fold(0.0, f64::max)
    }
}

/// Pointwise Frobenius sup of the Jacobian `max_x |(d_i u_j)(x)|_F`.
fn jacobian_sup(u: &VectorField) -> f64 {
    let grid = u.grid();
    let mut acc = vec![0.0f64; grid.len()];
    for comp in u.components() {
        for d in 0..grid.dim() {
            let der = spectral::derivative(comp, d);
            for (a, &v) in acc.iter_mut().zip(der.values()) {
                *a += v * v;
            }
        }
    }
    acc.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ForcingRegularity {
    pub sup_sq_sum: f64,
    pub grad_sup_sq_sum: f64,
    pub lap_sup_sq_sum: f64,
    pub grad_lap_sup_sq_sum: f64,
    pub c_phi: f64,
}

/// The forcing-regularity constant: the largest of the summed squared sup
/// norms of the modes and of their first three derivative layers.
pub fn compute_c_phi(model: &NoiseModel) -> ForcingRegularity {
    let mut sums = [0.0f64; 4];
    for m in model.modes() {
        let lap = spectral::vector_laplacian(m);
        let s = [
            m.sup_norm(),
            jacobian_sup(m),
            lap.sup_norm(),
            jacobian_sup(&lap),
        ];
        for (acc, v) in sums.iter_mut().zip(s) {
            *acc += v * v;
        }
    }
    ForcingRegularity {
        sup_sq_sum: sums[0],
        grad_sup_sq_sum: sums[1],
        lap_sup_sq_sum: sums[2],
        grad_lap_sup_sq_sum: sums[3],
        c_phi: sums.iter().fold(0.0f64, |m, &v| m.max(v)),
    }
}

/// Brownian increments for one sample path: `increments[j][k] ~ N(0, dt)`.
#[derive(Clone, Debug)]
pub struct WienerPath {
    pub dt: f64,
    pub increments: Vec<Vec<f64>>,
}

impl WienerPath {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }
}

/// Deterministic per-(seed, sample) path: step-major, mode-minor draw order.
pub fn sample_wiener_path(
    seed: u64,
    sample: u64,
    dt: f64,
    steps: usize,
    modes: usize,
) -> WienerPath {
    let mut rng = rng::stream(seed, TAG_WIENER, sample);
    let sqrt_dt = dt.sqrt();
    let increments = (0..steps)
        .map(|_| {
            (0..modes)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    g * sqrt_dt
                })
                .collect()
        })
        .collect();
    WienerPath { dt, increments }
}

fn zero_coeff_vector(grid: &Arc<TorusGrid>) -> VectorField {
    let comps = (0..grid.dim())
        .map(|_| {
            ScalarField::from_coeffs_unchecked(grid.clone(), vec![Complex64::ZERO; grid.len()])
        })
        .collect();
    VectorField::new(comps)
}

/// `sum_k Phi_k dws[k]`, assembled in coefficient space.
pub fn kick(model: &NoiseModel, dws: &[f64]) -> VectorField {
    let grid = model.grid();
    let dim = grid.dim();
    let n = grid.len();
    let mut comps = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut acc = vec![Complex64::ZERO; n];
        for (m, &w) in model.modes().iter().zip(dws) {
            for (a, &c) in acc.iter_mut().zip(m.component(d).coeffs()) {
                *a += c * w;
            }
        }
        comps.push(ScalarField::from_coeffs_unchecked(grid.clone(), acc));
    }
    VectorField::new(comps)
}

/// One exponential Euler update `z -> S(dt)(z + sum_k Phi_k dws[k])`.
pub fn convolution_step(
    prop: &Propagator,
    model: &NoiseModel,
    z: &VectorField,
    dws: &[f64],
    dt: f64,
    project: bool,
) -> Result<VectorField> {
    let kicked = z.add(&kick(model, dws));
    let moved = prop.apply_vector(&kicked, dt)?;
    Ok(if project {
        spectral::leray_project(&moved)
    } else {
        moved
    })
}

/// Runs the convolution from `z(0) = 0` through the whole path, calling
/// `visit(j, z(t_j))` after each step (j = 1..=steps); returns the endpoint.
pub fn convolution_scan(
    prop: &Propagator,
    model: &NoiseModel,
    path: &WienerPath,
    project: bool,
    mut visit: impl FnMut(usize, &VectorField),
) -> Result<VectorField> {
    let mut z = zero_coeff_vector(model.grid());
    for (j, dws) in path.increments.iter().enumerate() {
        z = convolution_step(prop, model, &z, dws, path.dt, project)?;
        visit(j + 1, &z);
    }
    Ok(z)
}

pub fn convolution_endpoint(
    prop: &Propagator,
    model: &NoiseModel,
    path: &WienerPath,
    project: bool,
) -> Result<VectorField> {
    convolution_scan(prop, model, path, project, |_, _| {})
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StatCheck {
    pub estimate: f64,
    pub exact_or_bound: f64,
    pub rel_error: f64,
    pub ci_95: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Monte Carlo check of `E ||sum_k Phi_k W_k(t)||_2^2 = t sum_k ||Phi_k||_2^2`
/// using the mode Gram matrix (exact in space, sampled in the W_k only).
pub fn ito_isometry_check(
    model: &NoiseModel,
    t: f64,
    samples: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<StatCheck> {
    let k = model.len();
    if k == 0 {
        return Err(Error::input("isometry check needs at least one mode"));
    }
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = model.modes()[i].inner(&model.modes()[j]);
            gram[i * k + j] = v;
            gram[j * k + i] = v;
        }
    }
    let exact = t * model.l2_sq_sum();
    let sqrt_t = t.sqrt();
    let vals: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, TAG_CHECKS, s);
            let w: Vec<f64> = (0..k)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    g * sqrt_t
                })
                .collect();
            let mut q = 0.0;
            for i in 0..k {
                for j in 0..k {
                    q += w[i] * w[j] * gram[i * k + j];
                }
            }
            q
        })
        .collect();
    let summary = stats::summarize(&vals);
    let rel_error = (summary.mean - exact).abs() / exact;
    Ok(StatCheck {
        estimate: summary.mean,
        exact_or_bound: exact,
        rel_error,
        ci_95: summary.ci95,
        samples,
        seed,
        pass: rel_error <= rel_tol,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub times: Vec<f64>,
    pub mean_h3_sq: Vec<f64>,
    pub p95_h3_sq: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub c5: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Monte Carlo envelope of `E ||z(t)||_{H^3}^2`: near-linear growth while the
/// slowest excited mode is far from saturation. `c5` is the fitted envelope
/// rate `1.25 max_t mean/t`, kept a little above the mean curve.
pub fn envelope_check(
    prop: &Propagator,
    model: &NoiseModel,
    t_max: f64,
    steps: usize,
    checkpoints: usize,
    samples: usize,
    seed: u64,
) -> Result<EnvelopeReport> {
    if model.is_empty() {
        return Err(Error::input("envelope check needs active forcing"));
    }
    if steps == 0 || checkpoints == 0 || !steps.is_multiple_of(checkpoints) {
        return Err(Error::input(
            "checkpoint count must divide the step count",
        ));
    }
    let dt = t_max / steps as f64;
    let every = steps / checkpoints;
    let per_sample: Result<Vec<Vec<f64>>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let path = sample_wiener_path(seed, s, dt, steps, model.len());
            let mut h3 = Vec::with_capacity(checkpoints);
            convolution_scan(prop, model, &path, false, |j, z| {
                if j % every == 0 {
                    h3.push(z.sobolev_norm_sq(3.0));
                }
            })?;
            Ok(h3)
        })
        .collect();
    let per_sample = per_sample?;
    let times: Vec<f64> = (1..=checkpoints).map(|i| (i * every) as f64 * dt).collect();
    let mut mean_h3_sq = Vec::with_capacity(checkpoints);
    let mut p95_h3_sq = Vec::with_capacity(checkpoints);
    for i in 0..checkpoints {
        let col: Vec<f64> = per_sample.iter().map(|row| row[i]).collect();
        mean_h3_sq.push(stats::summarize(&col).mean);
        p95_h3_sq.push(stats::percentile(&col, 95.0));
    }
    let fit = stats::linear_fit(&times, &mean_h3_sq);
    let c5 = 1.25
        * times
            .iter()
            .zip(&mean_h3_sq)
            .map(|(&t, &m)| m / t)
            .fold(0.0f64, f64::max);
    Ok(EnvelopeReport {
        times,
        mean_h3_sq,
        p95_h3_sq,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        c5,
        samples,
        seed,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaximalBoundReport {
    pub e_sup_sq: f64,
    pub e_quadratic_variation: f64,
    pub ratio: f64,
    pub constant: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Doob/Burkholder bound at the square level: `E sup_j M_j^2 <= 4 E <M>_t`
/// for the scalar martingale `M = sum_k amp_k W_k`.
pub fn maximal_inequality_check(
    amps: &[f64],
    t: f64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> MaximalBoundReport {
    let dt = t / steps as f64;
    let sqrt_dt = dt.sqrt();
    let qv: f64 = amps.iter().map(|a| a * a).sum::<f64>() * t;
    let sups: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, TAG_CHECKS, s);
            let mut m = 0.0f64;
            let mut sup = 0.0f64;
            for _ in 0..steps {
                let mut dm = 0.0;
                for &a in amps {
                    let g: f64 = rng.sample(StandardNormal);
                    dm += a * g * sqrt_dt;
                }
                m += dm;
                sup = sup.max(m * m);
            }
            sup
        })
        .collect();
    let e_sup = stats::summarize(&sups).mean;
    let constant = 4.0;
    MaximalBoundReport {
        e_sup_sq: e_sup,
        e_quadratic_variation: qv,
        ratio: e_sup / qv,
        constant,
        samples,
        seed,
        pass: e_sup <= constant * qv,
    }
}

pub fn maximal_inequality_default(seed: u64) -> MaximalBoundReport {
    let amps: Vec<f64> = (0..8).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    maximal_inequality_check(&amps, 0.5, 200, 4000, seed)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub r: u32,
    pub c_hat: f64,
    pub threshold: f64,
    pub empirical_tail: f64,
    pub bound: f64,
    pub true_tail: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// Markov/Chebyshev tail calibration on a synthetic two-point mixture whose
/// exact tail is half the claimed bound: with `C_hat = 2^{r-1} mean`, the
/// event `X > 2 C_hat` must have frequency at most `2^{-r}`.
pub fn tail_bound_check(r: u32, samples: usize, seed: u64) -> TailBoundReport {
    let q = 0.5f64.powi(r as i32 + 1);
    let spike = 3.7;
    let mut rng = rng::stream(seed, TAG_CHECKS, r as u64);
    let xs: Vec<f64> = (0..samples)
        .map(|_| if rng.gen::<f64>() < q { spike } else { 0.0 })
        .collect();
    let mean = xs.iter().sum::<f64>() / samples as f64;
    let c_hat = 2.0f64.powi(r as i32 - 1) * mean;
    let threshold = 2.0 * c_hat;
    let hits = xs.iter().filter(|&&x| x > threshold).count();
    let empirical = hits as f64 / samples as f64;
    let bound = 0.5f64.powi(r as i32);
    TailBoundReport {
        r,
        c_hat,
        threshold,
        empirical_tail: empirical,
        bound,
        true_tail: q,
        samples,
        seed,
        pass: empirical <= bound,
    }
}
