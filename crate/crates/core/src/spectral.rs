//! Fourier-multiplier operators: Laplacian and inverses, gradient, divergence,
//! Leray projection, and the 2/3-rule dealiasing mask.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};

pub use crate::grid::laplacian_eigenvalue;

/// Relative zero-mode tolerance for the inverse operators.
const MEAN_ZERO_TOL: f64 = 1e-12;

/// `Delta f`: coefficient at k multiplied by -lambda_k.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let lam = grid.lambda();
    let coeffs = f
        .coeffs()
        .iter()
        .zip(lam)
        .map(|(c, &l)| c * (-l))
        .collect();
    ScalarField::from_coeffs_unchecked(grid, coeffs)
}

pub fn vector_laplacian(u: &VectorField) -> VectorField {
    u.map(laplacian)
}

fn require_mean_zero(f: &ScalarField, op: &str) -> Result<()> {
    let c0 = f.coeffs()[0].norm();
    let scale = f.l2_norm();
    if c0 > MEAN_ZERO_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::domain(format!(
            "{op} requires a mean-zero field: |zero mode| = {c0:.3e} vs 1e-12 * ||f||_2 = {:.3e}",
            MEAN_ZERO_TOL * scale
        )));
    }
    Ok(())
}

/// True inverse of the Laplacian on mean-zero fields: coefficient divided by
/// -lambda_k; the zero mode of the result is zero.
pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    require_mean_zero(f, "inverse Laplacian")?;
    let grid = f.grid().clone();
    let lam = grid.lambda();
    let coeffs = f
        .coeffs()
        .iter()
        .zip(lam)
        .map(|(c, &l)| if l > 0.0 { c / (-l) } else { Complex64::new(0.0, 0.0) })
        .collect();
    Ok(ScalarField::from_coeffs_unchecked(grid, coeffs))
}

/// `(-Delta)^{-1/2}`: coefficient divided by lambda_k^{1/2} on mean-zero
/// fields. Applying it twice gives `(-Delta)^{-1}`, the negated
/// `inverse_laplacian`.
pub fn inverse_sqrt_laplacian(f: &ScalarField) -> Result<ScalarField> {
    require_mean_zero(f, "inverse sqrt Laplacian")?;
    let grid = f.grid().clone();
    let lam = grid.lambda();
    let coeffs = f
        .coeffs()
        .iter()
        .zip(lam)
        .map(|(c, &l)| if l > 0.0 { c / l.sqrt() } else { Complex64::new(0.0, 0.0) })
        .collect();
    Ok(ScalarField::from_coeffs_unchecked(grid, coeffs))
}

/// Partial derivative along one axis (multiplier `i 2 pi k_axis`, Nyquist
/// zeroed so real fields stay real).
pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let grid = f.grid().clone();
    assert!(axis < grid.dim());
    let mut coeffs = f.coeffs().to_vec();
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let k = grid.deriv_wave_at(flat)[axis] as f64;
        *c *= Complex64::new(0.0, 2.0 * PI * k);
    }
    ScalarField::from_coeffs_unchecked(grid, coeffs)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let dim = f.grid().dim();
    VectorField::new((0..dim).map(|d| derivative(f, d)).collect())
}

pub fn divergence(u: &VectorField) -> ScalarField {
    let mut acc = derivative(u.component(0), 0);
    for d in 1..u.dim() {
        acc = acc.add(&derivative(u.component(d), d));
    }
    acc
}

/// Pointwise squared Frobenius norm of the Hessian.
pub fn hessian_frobenius_sq(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let dim = grid.dim();
    let mut vals = vec![0.0; grid.len()];
    for i in 0..dim {
        let di = derivative(f, i);
        for j in 0..dim {
            let dij = derivative(&di, j);
            for (acc, &v) in vals.iter_mut().zip(dij.values()) {
                *acc += v * v;
            }
        }
    }
    ScalarField::from_values(grid, vals)
}

/// Leray projection onto divergence-free fields. Uses the same effective
/// wavenumbers as `derivative`, so `divergence(leray_project(u))` vanishes
/// identically; the zero mode (constant part) is untouched.
pub fn leray_project(u: &VectorField) -> VectorField {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let n = grid.len();
    let comp_coeffs: Vec<&[Complex64]> = u.components().iter().map(|c| c.coeffs()).collect();
    let mut out: Vec<Vec<Complex64>> = comp_coeffs.iter().map(|c| c.to_vec()).collect();
    for flat in 0..n {
        let kv = grid.deriv_wave_at(flat);
        let ksq: f64 = (0..dim).map(|d| (kv[d] * kv[d]) as f64).sum();
        if ksq == 0.0 {
            continue;
        }
        let mut kdotu = Complex64::new(0.0, 0.0);
        for d in 0..dim {
            kdotu += comp_coeffs[d][flat] * kv[d] as f64;
        }
        let factor = kdotu / ksq;
        for d in 0..dim {
            out[d][flat] -= factor * kv[d] as f64;
        }
    }
    VectorField::new(
        out.into_iter()
            .map(|c| ScalarField::from_coeffs_unchecked(grid.clone(), c))
            .collect(),
    )
}

/// Whether a mode survives the 2/3-rule mask (`|k_d| <= M_d/3` per axis).
#[inline]
fn keep_mode(grid: &crate::grid::TorusGrid, flat: usize) -> bool {
    let k = grid.wave_at(flat);
    let shape = grid.shape();
    for d in 0..grid.dim() {
        if k[d].unsigned_abs() as usize > shape[d] / 3 {
            return false;
        }
    }
    true
}

/// Zero all modes outside the 2/3 band.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(flat, c)| if keep_mode(&grid, flat) { *c } else { Complex64::new(0.0, 0.0) })
        .collect();
    ScalarField::from_coeffs_unchecked(grid, coeffs)
}

pub fn dealias_vector(u: &VectorField) -> VectorField {
    u.map(dealias)
}

/// Pointwise product followed by the 2/3 mask; the standard quadratic-term
/// treatment.
pub fn dealiased_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    dealias(&a.mul_pointwise(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    fn sin_x(grid: &std::sync::Arc<TorusGrid>) -> ScalarField {
        ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin())
    }

    #[test]
    fn laplacian_of_eigenfunction() {
        let g = TorusGrid::new(&[32, 16]).unwrap();
        let f = sin_x(&g);
        let lf = laplacian(&f);
        let err = lf
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a + 4.0 * PI * PI * b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = TorusGrid::new(&[16]).unwrap();
        let f = ScalarField::constant(g, 3.5);
        assert!(laplacian(&f).sup_norm() < 1e-13);
    }

    #[test]
    fn inverse_laplacian_eigenfunction_and_mean_error() {
        let g = TorusGrid::new(&[32]).unwrap();
        let f = sin_x(&g);
        let inv = inverse_laplacian(&f).unwrap();
        let err = inv
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a + b / (4.0 * PI * PI)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        // roundtrip
        let back = laplacian(&inv);
        let rt = back
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(rt < 1e-12);

        let bad = ScalarField::constant(f.grid().clone(), 1.0);
        assert!(inverse_laplacian(&bad).is_err());
    }

    #[test]
    fn inverse_sqrt_laplacian_sign_and_composition() {
        let g = TorusGrid::new(&[32]).unwrap();
        let f = sin_x(&g);
        let half = inverse_sqrt_laplacian(&f).unwrap();
        // sin(2 pi x) -> sin(2 pi x) / (2 pi), positive operator
        let err = half
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b / (2.0 * PI)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);

        // applying twice equals (-Delta)^{-1} = -inverse_laplacian
        let twice = inverse_sqrt_laplacian(&half).unwrap();
        let inv = inverse_laplacian(&f).unwrap();
        let comp_err = twice
            .values()
            .iter()
            .zip(inv.values())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        assert!(comp_err < 1e-10, "composition err {comp_err}");
    }

    #[test]
    fn div_grad_equals_laplacian_on_bandlimited() {
        use rand::{Rng, SeedableRng};
        let g = TorusGrid::new(&[16, 16]).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let raw = ScalarField::from_values(
            g.clone(),
            (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let f = dealias(&raw); // kill Nyquist content
        let lhs = divergence(&gradient(&f));
        let rhs = laplacian(&f);
        let scale = rhs.sup_norm().max(1.0);
        let err = lhs
            .values()
            .iter()
            .zip(rhs.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10 * scale, "err {err}");
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = TorusGrid::new(&[8, 8, 8]).unwrap();
        let f = ScalarField::constant(g, -2.0);
        for c in gradient(&f).components() {
            assert!(c.sup_norm() < 1e-14);
        }
    }

    #[test]
    fn leray_annihilates_gradients_and_fixes_divfree() {
        let g = TorusGrid::new(&[24, 24]).unwrap();
        let phi = ScalarField::from_fn(g.clone(), |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()
        });
        let gradphi = gradient(&phi);
        let proj = leray_project(&gradphi);
        assert!(proj.sup_norm() < 1e-10 * gradphi.sup_norm().max(1.0));

        // u = (sin(2 pi y), 0) is divergence-free
        let u = VectorField::new(vec![
            ScalarField::from_fn(g.clone(), |x| (2.0 * PI * x[1]).sin()),
            ScalarField::zeros(g.clone()),
        ]);
        let pu = leray_project(&u);
        let err = pu
            .component(0)
            .values()
            .iter()
            .zip(u.component(0).values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(pu.divergence_residual() < 1e-10);
    }

    #[test]
    fn leray_idempotent_and_helmholtz() {
        use rand::{Rng, SeedableRng};
        let g = TorusGrid::new(&[16, 16]).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let u = VectorField::new(
            (0..2)
                .map(|_| {
                    ScalarField::from_values(
                        g.clone(),
                        (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    )
                })
                .collect(),
        );
        let pu = leray_project(&u);
        let ppu = leray_project(&pu);
        let idem = ppu
            .components()
            .iter()
            .zip(pu.components())
            .map(|(a, b)| a.sub(b).sup_norm())
            .fold(0.0, f64::max);
        assert!(idem < 1e-12, "idempotency {idem}");
        assert!(pu.divergence_residual() < 1e-10 * u.sup_norm());

        // Helmholtz: u = P u + grad(Delta^{-1} div u) on band-limited fields
        // (odd-derivative multipliers zero the Nyquist row, so the identity
        // is stated below the dealias band)
        let ub = dealias_vector(&u);
        let div_u = divergence(&ub);
        let potential = inverse_laplacian(&div_u).unwrap();
        let grad_part = gradient(&potential);
        let recon = leray_project(&ub).add(&grad_part);
        let err = recon
            .components()
            .iter()
            .zip(ub.components())
            .map(|(a, b)| a.sub(b).sup_norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10 * u.sup_norm().max(1.0), "helmholtz {err}");
    }

    #[test]
    fn dealias_idempotent_and_preserves_low_modes() {
        let g = TorusGrid::new(&[12]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| {
            1.0 + (2.0 * PI * x[0]).cos() + 0.25 * (2.0 * PI * 5.0 * x[0]).cos()
        });
        let d = dealias(&f);
        // |k| <= 4 kept on M=12, mode 5 killed
        assert!((d.coeffs()[1].re - 0.5).abs() < 1e-13);
        assert!(d.coeffs()[5].norm() < 1e-14);
        let dd = dealias(&d);
        let err = dd
            .values()
            .iter()
            .zip(d.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }
}
