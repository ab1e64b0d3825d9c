//! Sectioned run configuration. Parsing is strict: unknown keys are errors,
//! and the integrability hypothesis is checked before anything runs.

use mildns_core::fixed_point::PicardConfig;
use mildns_core::noise::NoiseModel;
use mildns_core::{presets, report, Error, Result, ScalarField, TorusGrid, VectorField};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub lp: LpSection,
    pub time: TimeSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub picard: PicardSection,
    /// Parameter grids for the sweep command; ignored by single runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<toml::value::Table>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub mu: f64,
    #[serde(default = "one")]
    pub rho_bar: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpSection {
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(rename = "K", default = "default_modes")]
    pub k: usize,
    /// off | single_mode | shear | smooth
    #[serde(default = "off_str")]
    pub preset: String,
    #[serde(default = "default_noise_amp")]
    pub amplitude: f64,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            k: default_modes(),
            preset: off_str(),
            amplitude: default_noise_amp(),
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// taylor_green | random_divfree | rest | file
    pub preset: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// random_divfree band and spectral decay
    #[serde(default = "default_band")]
    pub band: usize,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "one_u64")]
    pub seed: u64,
    /// cosine bump amplitude for the initial density deviation
    #[serde(default)]
    pub density_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_file: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_levels")]
    pub max_levels: usize,
    /// auto: window from the contraction constants, [time] ignored;
    /// fixed: T split into `windows` equal windows stepped at dt.
    #[serde(default = "fixed_str")]
    pub window: String,
    #[serde(default = "one_usize")]
    pub windows: usize,
    /// steps per window in auto mode (fixed mode derives it from dt)
    #[serde(default = "default_spw")]
    pub steps_per_window: usize,
    #[serde(default = "default_big_m")]
    pub big_m: f64,
    #[serde(default = "default_pressure_power")]
    pub pressure_power: u32,
    #[serde(default = "default_duhamel")]
    pub duhamel_tol: f64,
    #[serde(default)]
    pub c5: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6: Option<f64>,
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            tol: default_tol(),
            max_levels: default_levels(),
            window: fixed_str(),
            windows: 1,
            steps_per_window: default_spw(),
            big_m: default_big_m(),
            pressure_power: default_pressure_power(),
            duhamel_tol: default_duhamel(),
            c5: 0.0,
            c6: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn off_str() -> String {
    "off".into()
}
fn fixed_str() -> String {
    "fixed".into()
}
fn default_modes() -> usize {
    8
}
fn default_noise_amp() -> f64 {
    0.1
}
fn default_band() -> usize {
    4
}
fn default_decay() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    1e-8
}
fn default_levels() -> usize {
    12
}
fn default_spw() -> usize {
    16
}
fn default_big_m() -> f64 {
    2.0
}
fn default_pressure_power() -> u32 {
    2
}
fn default_duhamel() -> f64 {
    1e-7
}

impl RunConfig {
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// Resolved canonical text; its hash identifies the run.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("config serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.grid.shape.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::config(format!(
                "grid must have 1 to 3 axes, got {dim}"
            )));
        }
        let p = self.lp.p;
        if !(p > dim as f64 && p <= 6.0) {
            return Err(Error::config(format!(
                "integrability hypothesis requires N < p <= 6; got p = {p} at N = {dim}"
            )));
        }
        if !(self.physics.mu > 0.0) || !(self.physics.rho_bar > 0.0) {
            return Err(Error::config(
                "[physics] mu and rho_bar must be positive",
            ));
        }
        if !(self.time.t > 0.0) || !(self.time.dt > 0.0) {
            return Err(Error::config("[time] T and dt must be positive"));
        }
        match self.picard.window.as_str() {
            "auto" | "fixed" => {}
            other => {
                return Err(Error::config(format!(
                    "[picard] window must be \"auto\" or \"fixed\", got {other:?}"
                )))
            }
        }
        if self.picard.windows == 0 || self.picard.steps_per_window == 0 {
            return Err(Error::config(
                "[picard] windows and steps_per_window must be at least 1",
            ));
        }
        match self.noise.preset.as_str() {
            "off" | "single_mode" | "shear" | "smooth" => {}
            other => {
                return Err(Error::config(format!(
                    "[noise] preset must be one of off, single_mode, shear, smooth; got {other:?}"
                )))
            }
        }
        match self.initial.preset.as_str() {
            "taylor_green" | "random_divfree" | "rest" => {}
            "file" => {
                if self.initial.velocity_file.is_none() {
                    return Err(Error::config(
                        "[initial] preset \"file\" needs velocity_file",
                    ));
                }
            }
            other => {
                return Err(Error::config(format!(
                    "[initial] preset must be one of taylor_green, random_divfree, rest, file; got {other:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::new(&self.grid.shape)
    }

    pub fn picard_config(&self) -> PicardConfig {
        PicardConfig {
            p: self.lp.p,
            big_m: self.picard.big_m,
            mu: self.physics.mu,
            rho_bar: self.physics.rho_bar,
            pressure_power: self.picard.pressure_power,
            max_levels: self.picard.max_levels,
            tol: self.picard.tol,
            duhamel_tol: self.picard.duhamel_tol,
            c5: self.picard.c5,
            c6: self.picard.c6,
            ..PicardConfig::default()
        }
    }

    pub fn build_noise(&self, grid: &Arc<TorusGrid>) -> Result<NoiseModel> {
        match self.noise.preset.as_str() {
            "off" => Ok(NoiseModel::off(grid.clone())),
            "single_mode" => NoiseModel::single_mode(grid.clone()),
            "shear" => NoiseModel::shear(grid.clone(), self.noise.amplitude),
            "smooth" => NoiseModel::smooth(grid.clone(), self.noise.amplitude, self.noise.k),
            other => Err(Error::config(format!("unknown noise preset {other:?}"))),
        }
    }

    pub fn build_initial(&self, grid: &Arc<TorusGrid>) -> Result<(VectorField, ScalarField)> {
        let u0 = match self.initial.preset.as_str() {
            "taylor_green" => presets::taylor_green(grid, self.initial.amplitude)?,
            "random_divfree" => presets::random_divfree(
                grid,
                self.initial.seed,
                0,
                self.initial.band,
                self.initial.decay,
                self.initial.amplitude,
            ),
            "rest" => VectorField::zeros(grid.clone()),
            "file" => {
                let path = self.initial.velocity_file.as_ref().unwrap();
                match read_snapshot_file(path)? {
                    report::FieldSnapshot::Vector(u) => u,
                    report::FieldSnapshot::Scalar(_) => {
                        return Err(Error::config(format!(
                            "{path} holds a scalar snapshot, expected vector"
                        )))
                    }
                }
            }
            other => return Err(Error::config(format!("unknown initial preset {other:?}"))),
        };
        if u0.grid().shape() != grid.shape() {
            return Err(Error::config(
                "initial velocity grid does not match [grid] shape",
            ));
        }
        let a0 = match &self.initial.density_file {
            Some(path) => match read_snapshot_file(path)? {
                report::FieldSnapshot::Scalar(a) => a,
                report::FieldSnapshot::Vector(_) => {
                    return Err(Error::config(format!(
                        "{path} holds a vector snapshot, expected scalar"
                    )))
                }
            },
            None => {
                if self.initial.density_amplitude == 0.0 {
                    ScalarField::zeros(grid.clone())
                } else {
                    presets::cosine_density(grid, self.initial.density_amplitude)
                }
            }
        };
        if a0.grid().shape() != grid.shape() {
            return Err(Error::config(
                "initial density grid does not match [grid] shape",
            ));
        }
        if a0.min() <= -0.5 {
            return Err(Error::config(format!(
                "initial density deviation leaves the band: min 1+a = {}",
                1.0 + a0.min()
            )));
        }
        Ok((u0, a0))
    }
}

fn read_snapshot_file(path: &str) -> Result<report::FieldSnapshot> {
    let mut f = fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open snapshot {path}: {e}")))?;
    report::read_snapshot(&mut f)
}

/// Apply one `section.key=value` override to raw TOML. Values parse as TOML
/// literals, falling back to strings.
pub fn apply_override(table: &mut toml::value::Table, dotted: &str, raw: &str) -> Result<()> {
    let (path, key) = match dotted.rsplit_once('.') {
        Some(split) => split,
        None => {
            return Err(Error::config(format!(
                "override {dotted:?} must use section.key form"
            )))
        }
    };
    let value = parse_literal(raw);
    let mut cur = table;
    for part in path.split('.') {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(Error::config(format!(
                    "override {dotted:?} descends through a non-table key {part:?}"
                )))
            }
        };
    }
    cur.insert(key.to_string(), value);
    Ok(())
}

pub fn parse_literal(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Parse config text after applying `KEY=VALUE` single-key overrides.
pub fn resolve(text: &str, sets: &[String]) -> Result<RunConfig> {
    if sets.is_empty() {
        return RunConfig::from_str(text);
    }
    let mut table: toml::value::Table = toml::from_str(text)
        .map_err(|e| Error::config(format!("config parse error: {e}")))?;
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {s:?} must be KEY=VALUE")))?;
        apply_override(&mut table, key.trim(), value.trim())?;
    }
    let text = toml::to_string(&toml::Value::Table(table))
        .map_err(|e| Error::config(format!("config serialize: {e}")))?;
    RunConfig::from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
shape = [32, 32]

[physics]
mu = 0.05

[lp]
p = 6.0

[time]
T = 0.25
dt = 0.01

[initial]
preset = "taylor_green"
amplitude = 1.0
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.grid.shape, vec![32, 32]);
        assert_eq!(cfg.noise.preset, "off");
        assert_eq!(cfg.picard.window, "fixed");
        assert_eq!(cfg.picard.tol, 1e-8);
        assert_eq!(cfg.physics.rho_bar, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_p() {
        let bad = BASE.replace("mu = 0.05", "mu = 0.05\nviscosity = 2.0");
        let err = RunConfig::from_str(&bad).unwrap_err().to_string();
        assert!(err.contains("viscosity"), "{err}");

        let bad_p = BASE.replace("p = 6.0", "p = 2.0");
        let err = RunConfig::from_str(&bad_p).unwrap_err().to_string();
        assert!(err.contains("N < p <= 6"), "{err}");

        let big_p = BASE.replace("p = 6.0", "p = 7.0");
        assert!(RunConfig::from_str(&big_p).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut table: toml::value::Table = BASE.parse().unwrap();
        apply_override(&mut table, "lp.p", "4.5").unwrap();
        apply_override(&mut table, "noise.preset", "smooth").unwrap();
        let cfg =
            RunConfig::from_str(&toml::to_string(&toml::Value::Table(table)).unwrap()).unwrap();
        assert_eq!(cfg.lp.p, 4.5);
        assert_eq!(cfg.noise.preset, "smooth");
    }

    #[test]
    fn canonical_text_is_stable() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        assert_eq!(
            cfg.canonical_toml().unwrap(),
            cfg.canonical_toml().unwrap()
        );
    }
}
