//! Canonical initial data and probe fields used by tests, the verification
//! suite and the CLI.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::rng::{stream, TAG_FIELDS};
use crate::spectral;

/// Decaying vortex pair on the 2-D unit torus:
/// `u = A e^{-8 pi^2 nu t} (cos 2 pi x sin 2 pi y, -sin 2 pi x cos 2 pi y)`.
/// Its nonlinear term is an exact gradient, so it solves the full equations
/// with constant density; kinetic energy decays like `exp(-16 pi^2 nu t)`.
pub fn taylor_green(grid: &Arc<TorusGrid>, amplitude: f64) -> Result<VectorField> {
    taylor_green_at(grid, amplitude, 0.0, 0.0)
}

pub fn taylor_green_at(
    grid: &Arc<TorusGrid>,
    amplitude: f64,
    nu: f64,
    t: f64,
) -> Result<VectorField> {
    if grid.dim() != 2 {
        return Err(Error::input("the decaying vortex preset is 2-D only"));
    }
    let a = amplitude * (-8.0 * PI * PI * nu * t).exp();
    Ok(VectorField::new(vec![
        ScalarField::from_fn(grid.clone(), move |x| {
            a * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()
        }),
        ScalarField::from_fn(grid.clone(), move |x| {
            -a * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        }),
    ]))
}

/// Analytic pressure gradient of the decaying vortex (the field that balances
/// its quadratic term): `grad Q = pi A(t)^2 (sin 4 pi x, sin 4 pi y)` where
/// `Q = -(A(t)^2/4)(cos 4 pi x + cos 4 pi y)`.
pub fn taylor_green_pressure_gradient(
    grid: &Arc<TorusGrid>,
    amplitude: f64,
    nu: f64,
    t: f64,
) -> Result<VectorField> {
    if grid.dim() != 2 {
        return Err(Error::input("the decaying vortex preset is 2-D only"));
    }
    let a = amplitude * (-8.0 * PI * PI * nu * t).exp();
    let coef = PI * a * a;
    Ok(VectorField::new(vec![
        ScalarField::from_fn(grid.clone(), move |x| coef * (4.0 * PI * x[0]).sin()),
        ScalarField::from_fn(grid.clone(), move |x| coef * (4.0 * PI * x[1]).sin()),
    ]))
}

/// Borderline-L2 "rough" probe: real positive modal amplitudes `1/|k|`
/// (zero mean). Realizes the `C/t` operator decay rate of `Delta S(t)`.
pub fn rough_field(grid: &Arc<TorusGrid>) -> ScalarField {
    let n = grid.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (flat, c) in coeffs.iter_mut().enumerate().skip(1) {
        let k = grid.wave_at(flat);
        let ksq: f64 = k.iter().map(|&ki| (ki * ki) as f64).sum();
        if ksq > 0.0 {
            *c = Complex64::new(1.0 / ksq.sqrt(), 0.0);
        }
    }
    ScalarField::from_coeffs(grid.clone(), coeffs)
}

/// Self-similar singular probe `(,|x-x0|^2 + h^2)^{-N/(2p)}` centred at the
/// torus midpoint; borderline member of L^p realizing the L^p -> L^q heat
/// decay rate.
pub fn singular_field(grid: &Arc<TorusGrid>, p: f64) -> ScalarField {
    let dim = grid.dim();
    let h = grid.h_min();
    let expo = -(dim as f64) / (2.0 * p);
    ScalarField::from_fn(grid.clone(), move |x| {
        let mut d2 = h * h;
        for &xi in x.iter().take(dim) {
            let mut d = (xi - 0.5).abs();
            if d > 0.5 {
                d = 1.0 - d;
            }
            d2 += d * d;
        }
        d2.powf(expo)
    })
}

/// White-noise probe (flat spectrum, unit-variance values), seeded.
pub fn white_noise_field(grid: &Arc<TorusGrid>, seed: u64, index: u64) -> ScalarField {
    let mut rng = stream(seed, TAG_FIELDS, index);
    let vals: Vec<f64> = (0..grid.len())
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect();
    ScalarField::from_values(grid.clone(), vals)
}

/// Random band-limited scalar with spectral decay `(1+lambda)^{-s/2}`,
/// zero mean, normalized to the requested sup norm.
pub fn random_smooth_scalar(
    grid: &Arc<TorusGrid>,
    seed: u64,
    index: u64,
    band: usize,
    decay: f64,
    sup: f64,
) -> ScalarField {
    let mut rng = stream(seed, TAG_FIELDS, index);
    let n = grid.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (flat, c) in coeffs.iter_mut().enumerate().skip(1) {
        let k = grid.wave_at(flat);
        if k.iter().any(|&ki| ki.unsigned_abs() as usize > band) {
            continue;
        }
        let lam = grid.lambda_at(flat);
        let amp = (1.0 + lam).powf(-decay / 2.0);
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        *c = Complex64::new(re, im) * amp;
    }
    let f = ScalarField::from_coeffs(grid.clone(), coeffs);
    let s = f.sup_norm();
    if s > 0.0 {
        f.scale(sup / s)
    } else {
        f
    }
}

/// Random band-limited divergence-free velocity, zero mean, normalized sup.
pub fn random_divfree(
    grid: &Arc<TorusGrid>,
    seed: u64,
    index: u64,
    band: usize,
    decay: f64,
    sup: f64,
) -> VectorField {
    let dim = grid.dim();
    let comps: Vec<ScalarField> = (0..dim)
        .map(|d| {
            random_smooth_scalar(
                grid,
                seed,
                index.wrapping_mul(31).wrapping_add(d as u64),
                band,
                decay,
                1.0,
            )
        })
        .collect();
    let u = spectral::leray_project(&VectorField::new(comps));
    let s = u.sup_norm();
    if s > 0.0 {
        u.scale(sup / s)
    } else {
        u
    }
}

/// Product-cosine density bump `amp * prod_d cos(2 pi x_d)`; sup norm = |amp|.
pub fn cosine_density(grid: &Arc<TorusGrid>, amp: f64) -> ScalarField {
    let dim = grid.dim();
    ScalarField::from_fn(grid.clone(), move |x| {
        let mut v = amp;
        for &xi in x.iter().take(dim) {
            v *= (2.0 * PI * xi).cos();
        }
        v
    })
}
