//! Energy bookkeeping for density-weighted kinetic energy
//! `E = 1/2 int rho |u|^2`, with the dissipation `mu ||grad u||_2^2` and the
//! Ito injection `1/2 int rho sum_k |Phi_k|^2` integrated by the trapezoid
//! rule along a trajectory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::fixed_point::{self, PicardConfig};
use crate::noise::{self, NoiseModel};
use crate::spectral;
use crate::stats;

/// `1/2 (1/n) sum rho_bar (1 + a) |u|^2`.
pub fn kinetic_energy(u: &VectorField, a: &ScalarField, rho_bar: f64) -> f64 {
    let n = u.grid().len() as f64;
    let mag = u.magnitude_sq();
    0.5 * rho_bar
        * mag
            .values()
            .iter()
            .zip(a.values())
            .map(|(&m, &av)| (1.0 + av) * m)
            .sum::<f64>()
        / n
}

/// `mu ||grad u||_2^2` (spectral first seminorm).
pub fn dissipation_rate(u: &VectorField, mu: f64) -> f64 {
    mu * u.seminorm_sq(1)
}

/// `1/2 int rho sum_k |Phi_k|^2`, the Ito energy input per unit time.
pub fn injection_rate(model: &NoiseModel, a: &ScalarField, rho_bar: f64) -> f64 {
    if model.is_empty() {
        return 0.0;
    }
    let n = a.grid().len() as f64;
    let sq = model.pointwise_sq_sum();
    0.5 * rho_bar
        * sq.values()
            .iter()
            .zip(a.values())
            .map(|(&s, &av)| (1.0 + av) * s)
            .sum::<f64>()
        / n
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub injection: Vec<f64>,
    /// cumulative trapezoid integrals of the two rates
    pub dissipated: Vec<f64>,
    pub injected: Vec<f64>,
}

impl EnergyLedger {
    pub fn from_trajectory(
        times: &[f64],
        u: &[VectorField],
        a: &[ScalarField],
        model: &NoiseModel,
        mu: f64,
        rho_bar: f64,
    ) -> Result<Self> {
        if times.len() != u.len() || times.len() != a.len() || times.is_empty() {
            return Err(Error::input("trajectory arrays must share a nonzero length"));
        }
        let kinetic: Vec<f64> = u
            .iter()
            .zip(a)
            .map(|(uj, aj)| kinetic_energy(uj, aj, rho_bar))
            .collect();
        let dissipation: Vec<f64> = u.iter().map(|uj| dissipation_rate(uj, mu)).collect();
        let injection: Vec<f64> = a
            .iter()
            .map(|aj| injection_rate(model, aj, rho_bar))
            .collect();
        let trapezoid = |rates: &[f64]| -> Vec<f64> {
            let mut acc = Vec::with_capacity(rates.len());
            let mut total = 0.0;
            acc.push(0.0);
            for i in 1..rates.len() {
                total += 0.5 * (rates[i] + rates[i - 1]) * (times[i] - times[i - 1]);
                acc.push(total);
            }
            acc
        };
        let dissipated = trapezoid(&dissipation);
        let injected = trapezoid(&injection);
        Ok(EnergyLedger {
            times: times.to_vec(),
            kinetic,
            dissipation,
            injection,
            dissipated,
            injected,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// `E(T) - E(0) + dissipated - injected`; zero for the exact balance.
    pub fn defect(&self) -> f64 {
        let last = self.kinetic.len() - 1;
        self.kinetic[last] - self.kinetic[0] + self.dissipated[last] - self.injected[last]
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub e_start: f64,
    pub e_end: f64,
    pub dissipated: f64,
    pub injected: f64,
    pub defect: f64,
    /// |defect| per unit time, relative to E(0)
    pub rel_defect_rate: f64,
    pub pass: bool,
}

/// Deterministic balance audit: the defect rate must stay within
/// `tol * E(0)` per unit time.
pub fn audit_deterministic(ledger: &EnergyLedger, tol: f64) -> EnergyAudit {
    let last = ledger.kinetic.len() - 1;
    let defect = ledger.defect();
    let rate = defect.abs() / ledger.horizon().max(f64::MIN_POSITIVE);
    let rel = rate / ledger.kinetic[0].max(f64::MIN_POSITIVE);
    EnergyAudit {
        e_start: ledger.kinetic[0],
        e_end: ledger.kinetic[last],
        dissipated: ledger.dissipated[last],
        injected: ledger.injected[last],
        defect,
        rel_defect_rate: rel,
        pass: rel <= tol,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StochasticAudit {
    pub mean_defect: f64,
    pub ci_95: f64,
    pub samples: usize,
    pub seed: u64,
    pub e_start: f64,
    pub mean_dissipated: f64,
    pub mean_injected: f64,
    pub pass: bool,
}

/// Monte Carlo Ito balance: across sample paths the endpoint defect
/// `E(T) - E(0) + int diss - int inj` is a martingale average, so its mean
/// must vanish within the 95 percent confidence band.
#[allow(clippy::too_many_arguments)]
pub fn audit_stochastic(
    u0: &VectorField,
    a0: &ScalarField,
    model: &NoiseModel,
    cfg: &PicardConfig,
    dt: f64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<StochasticAudit> {
    let consts = fixed_point::compute_constants(u0, a0, cfg)?;
    let defects: Result<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let path = noise::sample_wiener_path(seed, s, dt, steps, model.len());
            let run = fixed_point::run_local(u0, a0, model, cfg, &path, consts.k0)?;
            let times: Vec<f64> = (0..=steps).map(|j| dt * j as f64).collect();
            let ledger =
                EnergyLedger::from_trajectory(&times, &run.u, &run.a, model, cfg.mu, cfg.rho_bar)?;
            Ok(ledger.defect())
        })
        .collect();
    let defects = defects?;
    let summary = stats::summarize(&defects);

    // one representative ledger for the report body
    let path = noise::sample_wiener_path(seed, 0, dt, steps, model.len());
    let run = fixed_point::run_local(u0, a0, model, cfg, &path, consts.k0)?;
    let times: Vec<f64> = (0..=steps).map(|j| dt * j as f64).collect();
    let ledger = EnergyLedger::from_trajectory(&times, &run.u, &run.a, model, cfg.mu, cfg.rho_bar)?;
    let last = ledger.kinetic.len() - 1;

    Ok(StochasticAudit {
        mean_defect: summary.mean,
        ci_95: summary.ci95,
        samples,
        seed,
        e_start: ledger.kinetic[0],
        mean_dissipated: ledger.dissipated[last],
        mean_injected: ledger.injected[last],
        pass: summary.mean.abs() <= summary.ci95,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HighOrderEnvelope {
    pub order: u32,
    pub sup_seminorm: f64,
    pub integrated_next_seminorm_sq: f64,
    pub finite: bool,
}

/// `sup_t ||grad^k u||_2` and the trapezoid integral of
/// `||grad^{k+1} u||_2^2` for k = 1..=max_order.
pub fn high_order_envelopes(
    times: &[f64],
    u: &[VectorField],
    max_order: u32,
) -> Vec<HighOrderEnvelope> {
    (1..=max_order)
        .map(|k| {
            let sup = u
                .iter()
                .map(|uj| uj.seminorm_sq(k).sqrt())
                .fold(0.0f64, f64::max);
            let rates: Vec<f64> = u.iter().map(|uj| uj.seminorm_sq(k + 1)).collect();
            let mut integral = 0.0;
            for i in 1..rates.len() {
                integral += 0.5 * (rates[i] + rates[i - 1]) * (times[i] - times[i - 1]);
            }
            HighOrderEnvelope {
                order: k,
                sup_seminorm: sup,
                integrated_next_seminorm_sq: integral,
                finite: sup.is_finite() && integral.is_finite(),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub bilinear: f64,
    pub pressure: f64,
}

/// Relative inner products `<B(u), u>` and `<grad Q, u>` for band-limited
/// divergence-free `u`; both vanish to rounding.
pub fn orthogonality_check(
    u: &VectorField,
    a: &ScalarField,
    cfg: &PicardConfig,
) -> Result<OrthogonalityReport> {
    let ud = spectral::leray_project(&spectral::dealias_vector(u));
    let b = fixed_point::bilinear_term(&ud);
    let q = fixed_point::pressure_gradient(&ud, &ud, a, cfg)?;
    let un = ud.l2_norm().max(f64::MIN_POSITIVE);
    let rel = |w: &VectorField| {
        let wn = w.l2_norm();
        if wn < 1e-300 {
            0.0
        } else {
            w.inner(&ud).abs() / (wn * un)
        }
    };
    Ok(OrthogonalityReport {
        bilinear: rel(&b),
        pressure: rel(&q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::presets;
    use crate::semigroup::{DiffusionGenerator, Propagator, PropagatorScheme};

    #[test]
    fn kinetic_energy_of_vortex() {
        let g = TorusGrid::square(2, 32).unwrap();
        let amp = 0.8;
        let u = presets::taylor_green(&g, amp).unwrap();
        let a = ScalarField::zeros(g);
        // mean of cos^2 sin^2 + sin^2 cos^2 = 1/2 => E = amp^2 / 4
        let e = kinetic_energy(&u, &a, 1.0);
        assert!((e - amp * amp / 4.0).abs() < 1e-12);
    }

    #[test]
    fn heat_decay_balance_closes_at_second_order() {
        // pure diffusion of the vortex: E' = -diss exactly, trapezoid error only
        let g = TorusGrid::square(2, 32).unwrap();
        let mu = 0.02;
        let u0 = presets::taylor_green(&g, 1.0).unwrap();
        let a0 = ScalarField::zeros(g.clone());
        let gen = DiffusionGenerator::constant(g.clone(), mu, 1.0).unwrap();
        let prop = Propagator::new(gen, PropagatorScheme::Auto).unwrap();
        let model = NoiseModel::off(g);
        let mut defects = Vec::new();
        for steps in [64usize, 128, 256] {
            let t_end = 0.25;
            let dt = t_end / steps as f64;
            let mut u = vec![u0.clone()];
            for j in 0..steps {
                u.push(prop.apply_vector(&u[j], dt).unwrap());
            }
            let times: Vec<f64> = (0..=steps).map(|j| dt * j as f64).collect();
            let a = vec![a0.clone(); steps + 1];
            let ledger =
                EnergyLedger::from_trajectory(&times, &u, &a, &model, mu, 1.0).unwrap();
            defects.push(ledger.defect().abs());
        }
        for pair in defects.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order > 1.8, "order {order} defects {defects:?}");
        }
    }

    #[test]
    fn deterministic_audit_passes_on_fine_vortex_run() {
        let g = TorusGrid::square(2, 32).unwrap();
        let mu = 0.02;
        let u0 = presets::taylor_green(&g, 1.0).unwrap();
        let a0 = ScalarField::zeros(g.clone());
        let model = NoiseModel::off(g.clone());
        let cfg = PicardConfig {
            mu,
            ..PicardConfig::default()
        };
        let steps = 512;
        let dt = 0.25 / steps as f64;
        let path = noise::WienerPath {
            dt,
            increments: vec![Vec::new(); steps],
        };
        let run = fixed_point::run_local(&u0, &a0, &model, &cfg, &path, 2.0).unwrap();
        let times: Vec<f64> = (0..=steps).map(|j| dt * j as f64).collect();
        let ledger =
            EnergyLedger::from_trajectory(&times, &run.u, &run.a, &model, mu, 1.0).unwrap();
        let audit = audit_deterministic(&ledger, 1e-6);
        assert!(audit.pass, "rel defect rate {}", audit.rel_defect_rate);
    }

    #[test]
    fn envelopes_decay_monotonically_under_diffusion() {
        let g = TorusGrid::square(2, 32).unwrap();
        let u0 = presets::taylor_green(&g, 1.0).unwrap();
        let gen = DiffusionGenerator::constant(g, 0.05, 1.0).unwrap();
        let prop = Propagator::new(gen, PropagatorScheme::Auto).unwrap();
        let steps = 20;
        let dt = 0.01;
        let mut u = vec![u0.clone()];
        for j in 0..steps {
            u.push(prop.apply_vector(&u[j], dt).unwrap());
        }
        let times: Vec<f64> = (0..=steps).map(|j| dt * j as f64).collect();
        let envs = high_order_envelopes(&times, &u, 3);
        assert_eq!(envs.len(), 3);
        for env in &envs {
            assert!(env.finite);
            // sup is attained at t = 0 for pure decay
            let init = u0.seminorm_sq(env.order).sqrt();
            assert!((env.sup_seminorm - init).abs() < 1e-10 * init);
        }
    }

    #[test]
    fn nonlinear_terms_are_energy_neutral() {
        let g = TorusGrid::square(2, 32).unwrap();
        let u = presets::random_divfree(&g, 13, 2, 5, 1.5, 1.0);
        let a = presets::cosine_density(&g, 0.2);
        let cfg = PicardConfig::default();
        let rep = orthogonality_check(&u, &a, &cfg).unwrap();
        assert!(rep.bilinear < 1e-12, "bilinear {}", rep.bilinear);
        assert!(rep.pressure < 1e-12, "pressure {}", rep.pressure);
    }
}
