//! Executes one resolved configuration end to end and renders its artifacts.
//! Everything returned here is deterministic; wall-clock timings live apart
//! so the written reports stay byte-reproducible.

use crate::config::RunConfig;
use crate::manifest::{write_atomic, Manifest};
use mildns_core::energy::{audit_deterministic, EnergyAudit, EnergyLedger};
use mildns_core::fixed_point::{global_march, Constants, ContractionReport, SeamCheck};
use mildns_core::{report, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const DETERMINISTIC_ENERGY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinalNorms {
    pub lp: f64,
    pub l2p: f64,
    pub h1: f64,
    pub h3: f64,
    pub density_l2p: f64,
    pub div_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub t_final: f64,
    pub windows: usize,
    pub steps: usize,
    pub grid: Vec<usize>,
    pub final_norms: FinalNorms,
    pub seams: Vec<SeamCheck>,
    /// Window constants; empty when the window was fixed by config.
    pub constants: Vec<Constants>,
    pub contraction: Vec<ContractionReport>,
    /// Deterministic balance audit; absent for forced runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyAudit>,
}

pub struct RunArtifacts {
    pub series_csv: String,
    pub report_json: String,
    pub snapshots: Vec<(String, Vec<u8>)>,
    pub seed: u64,
    pub grid: Vec<usize>,
    pub timings_s: BTreeMap<String, f64>,
}

pub fn execute(cfg: &RunConfig) -> Result<RunArtifacts> {
    let t_setup = Instant::now();
    let grid = cfg.build_grid()?;
    let (u0, a0) = cfg.build_initial(&grid)?;
    let model = cfg.build_noise(&grid)?;
    let pcfg = cfg.picard_config();
    pcfg.validate(grid.dim())?;

    let (windows, steps_per_window, window_override) = match cfg.picard.window.as_str() {
        "fixed" => {
            let len = cfg.time.t / cfg.picard.windows as f64;
            let steps = (len / cfg.time.dt).round().max(1.0) as usize;
            (cfg.picard.windows, steps, Some(len))
        }
        _ => (cfg.picard.windows, cfg.picard.steps_per_window, None),
    };
    let setup_s = t_setup.elapsed().as_secs_f64();

    let t_march = Instant::now();
    let run = global_march(
        &u0,
        &a0,
        &model,
        &pcfg,
        windows,
        steps_per_window,
        cfg.noise.seed,
        0,
        window_override,
    )?;
    let march_s = t_march.elapsed().as_secs_f64();

    let t_report = Instant::now();
    let series_csv = report::run_series_csv(&run.times, &run.u, &run.a, pcfg.p);

    let energy = if cfg.noise.preset == "off" {
        let ledger = EnergyLedger::from_trajectory(
            &run.times,
            &run.u,
            &run.a,
            &model,
            pcfg.mu,
            pcfg.rho_bar,
        )?;
        Some(audit_deterministic(&ledger, DETERMINISTIC_ENERGY_TOL))
    } else {
        None
    };

    let last = run.times.len() - 1;
    let uf = &run.u[last];
    let af = &run.a[last];
    let body = RunReport {
        t_final: run.times[last],
        windows,
        steps: last,
        grid: grid.shape().to_vec(),
        final_norms: FinalNorms {
            lp: uf.lp_norm(pcfg.p),
            l2p: uf.lp_norm(2.0 * pcfg.p),
            h1: uf.sobolev_norm_sq(1.0).sqrt(),
            h3: uf.sobolev_norm_sq(3.0).sqrt(),
            density_l2p: af.lp_norm(2.0 * pcfg.p),
            div_residual: uf.divergence_residual(),
        },
        seams: run.seams.clone(),
        constants: run.constants.clone(),
        contraction: run.reports.clone(),
        energy,
    };
    let mut report_json = serde_json::to_string_pretty(&body)?;
    report_json.push('\n');

    let mut u_snap = Vec::new();
    report::write_vector_snapshot(&mut u_snap, uf)?;
    let mut a_snap = Vec::new();
    report::write_scalar_snapshot(&mut a_snap, af)?;
    let report_s = t_report.elapsed().as_secs_f64();

    let mut timings_s = BTreeMap::new();
    timings_s.insert("setup".into(), setup_s);
    timings_s.insert("march".into(), march_s);
    timings_s.insert("reports".into(), report_s);
    timings_s.insert("total".into(), setup_s + march_s + report_s);

    Ok(RunArtifacts {
        series_csv,
        report_json,
        snapshots: vec![
            ("u_final.snap".into(), u_snap),
            ("a_final.snap".into(), a_snap),
        ],
        seed: cfg.noise.seed,
        grid: grid.shape().to_vec(),
        timings_s,
    })
}

/// Write every artifact plus the manifest under `dir`; the manifest lists
/// each emitted file.
pub fn write_outputs(dir: &Path, art: &RunArtifacts, config_toml: String) -> Result<Manifest> {
    let mut manifest = Manifest::new(config_toml, art.seed, art.grid.clone());
    write_atomic(&dir.join("series.csv"), art.series_csv.as_bytes())?;
    manifest.outputs.push("series.csv".into());
    write_atomic(&dir.join("report.json"), art.report_json.as_bytes())?;
    manifest.outputs.push("report.json".into());
    for (name, bytes) in &art.snapshots {
        write_atomic(&dir.join(name), bytes)?;
        manifest.outputs.push(name.clone());
    }
    manifest.timings_s = art.timings_s.clone();
    manifest.outputs.push("manifest.json".into());
    write_atomic(&dir.join("manifest.json"), manifest.to_json()?.as_bytes())?;
    Ok(manifest)
}
