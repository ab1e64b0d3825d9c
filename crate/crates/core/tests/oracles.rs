//! Cross-checks of the spectral operators against independent references:
//! finite-difference stencils, pointwise heat-kernel formulas, and the
//! decaying-vortex identity. None of these go through the code under test
//! except for the single call being checked.

use mildns_core::field::{ScalarField, VectorField};
use mildns_core::fixed_point::bilinear_term;
use mildns_core::grid::TorusGrid;
use mildns_core::presets;
use mildns_core::semigroup::{DiffusionGenerator, Propagator, PropagatorScheme};
use mildns_core::spectral;
use std::f64::consts::PI;

fn probe(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.5 * (2.0 * PI * (x[0] + x[1])).cos()
}

/// Laplacian of `probe`, worked out by hand.
fn probe_lap(x: &[f64]) -> f64 {
    let a = -(4.0 * PI * PI + 16.0 * PI * PI) * (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos();
    let b = -0.5 * 2.0 * 4.0 * PI * PI * (2.0 * PI * (x[0] + x[1])).cos();
    a + b
}

/// Second-order centred five-point Laplacian of grid values, periodic wrap.
fn fd_laplacian(vals: &[f64], m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let mut out = vec![0.0; vals.len()];
    for i in 0..m {
        for j in 0..m {
            let c = vals[i * m + j];
            let xp = vals[((i + 1) % m) * m + j];
            let xm = vals[((i + m - 1) % m) * m + j];
            let yp = vals[i * m + (j + 1) % m];
            let ym = vals[i * m + (j + m - 1) % m];
            out[i * m + j] = (xp + xm + yp + ym - 4.0 * c) / (h * h);
        }
    }
    out
}

#[test]
fn spectral_laplacian_agrees_with_stencil_and_closed_form() {
    let mut gaps = Vec::new();
    for &m in &[16usize, 32, 64] {
        let grid = TorusGrid::square(2, m).unwrap();
        let f = ScalarField::from_fn(grid.clone(), probe);
        let lap = spectral::laplacian(&f);

        // against the hand-derived closed form: exact up to roundoff,
        // since every mode of `probe` sits far inside the band
        let exact = ScalarField::from_fn(grid.clone(), probe_lap);
        let closed_gap = lap.sub(&exact).sup_norm() / exact.sup_norm();
        assert!(closed_gap < 1e-11, "closed-form gap {closed_gap:.3e} at m={m}");

        // against the finite-difference stencil: should shrink like h^2
        let fd = fd_laplacian(f.values(), m);
        let sup = lap
            .values()
            .iter()
            .zip(fd.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        gaps.push(sup);
    }
    let order1 = (gaps[0] / gaps[1]).log2();
    let order2 = (gaps[1] / gaps[2]).log2();
    assert!(
        order1 > 1.9 && order2 > 1.9,
        "stencil gap not second order: {gaps:?} (orders {order1:.2}, {order2:.2})"
    );
}

#[test]
fn constant_coefficient_propagator_matches_heat_kernel() {
    let grid = TorusGrid::square(2, 32).unwrap();
    let mu = 0.7;
    let rho_bar = 2.0;
    let prop = Propagator::new(
        DiffusionGenerator::constant(grid.clone(), mu, rho_bar).unwrap(),
        PropagatorScheme::Auto,
    )
    .unwrap();

    // mixture of two modes; each decays with its own rate nu (2 pi)^2 |k|^2
    let f = ScalarField::from_fn(grid.clone(), |x| {
        1.5 * (2.0 * PI * (x[0] + 2.0 * x[1])).sin() + 0.25 * (2.0 * PI * 3.0 * x[0]).cos()
    });
    let nu = mu / rho_bar;
    for &t in &[0.001, 0.01, 0.05] {
        let evolved = prop.apply(&f, t).unwrap();
        let d1 = (-nu * 4.0 * PI * PI * 5.0 * t).exp();
        let d2 = (-nu * 4.0 * PI * PI * 9.0 * t).exp();
        let expected = ScalarField::from_fn(grid.clone(), move |x| {
            1.5 * d1 * (2.0 * PI * (x[0] + 2.0 * x[1])).sin()
                + 0.25 * d2 * (2.0 * PI * 3.0 * x[0]).cos()
        });
        let gap = evolved.sub(&expected).sup_norm();
        assert!(gap < 1e-12, "heat kernel gap {gap:.3e} at t={t}");
    }
}

#[test]
fn crank_nicolson_limits_to_the_exact_kernel() {
    // variable-coefficient path, checked on a constant coefficient where the
    // answer is known in closed form; CN is second order in the step
    let grid = TorusGrid::square(2, 32).unwrap();
    let gen = DiffusionGenerator::constant(grid.clone(), 0.4, 1.0).unwrap();
    let cn = Propagator::new(gen, PropagatorScheme::CrankNicolson).unwrap();
    let f = ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin());
    let t = 0.02;
    let decay = (-0.4 * 4.0 * PI * PI * t).exp();
    let expected = ScalarField::from_fn(grid.clone(), move |x| decay * (2.0 * PI * x[0]).sin());

    let mut errs = Vec::new();
    for &steps in &[1usize, 2, 4] {
        let dt = t / steps as f64;
        let mut w = f.clone();
        for _ in 0..steps {
            w = cn.apply(&w, dt).unwrap();
        }
        errs.push(w.sub(&expected).sup_norm());
    }
    let order1 = (errs[0] / errs[1]).log2();
    let order2 = (errs[1] / errs[2]).log2();
    assert!(
        order1 > 1.9 && order2 > 1.9,
        "CN not second order: {errs:?} (orders {order1:.2}, {order2:.2})"
    );
}

#[test]
fn vortex_quadratic_term_is_a_pure_gradient() {
    let grid = TorusGrid::square(2, 32).unwrap();
    let amp = 1.3;
    let u = presets::taylor_green(&grid, amp).unwrap();
    let b = bilinear_term(&u);

    // -div(u tensor u) for this field equals pi A^2 (sin 4 pi x, sin 4 pi y)
    let expected = presets::taylor_green_pressure_gradient(&grid, amp, 0.0, 0.0).unwrap();
    let gap = sup_vec(&b.sub(&expected)) / sup_vec(&expected);
    assert!(gap < 1e-12, "vortex quadratic identity violated: {gap:.3e}");

    // a pure gradient dies under the divergence-free projection
    let projected = spectral::leray_project(&b);
    let residual = sup_vec(&projected) / sup_vec(&b);
    assert!(residual < 1e-12, "projection left {residual:.3e} of a gradient");
}

fn sup_vec(u: &VectorField) -> f64 {
    u.components()
        .iter()
        .map(|c| c.sup_norm())
        .fold(0.0, f64::max)
}
