//! Serialization surfaces: binary field snapshots, run/envelope CSV tables,
//! and the JSON shape shared by the statistical checks.
//!
//! All text output uses `{:e}` float formatting so identical runs produce
//! byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::noise::EnvelopeReport;

pub const SNAPSHOT_MAGIC: &str = "mildns-field v1";
pub const RUN_SERIES_HEADER: &str = "t,|u|_p,|u|_{2p},H1,H3,|a|_{2p},div_residual";
pub const ENVELOPE_HEADER: &str = "t,mean_H3_sq,p95_H3_sq";

fn snapshot_header(grid: &TorusGrid, kind: &str) -> String {
    let shape = grid
        .shape()
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join("x");
    format!("{SNAPSHOT_MAGIC}; {}; {}; {}\n", grid.dim(), shape, kind)
}

fn write_component(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Header line, then each component as row-major little-endian f64.
pub fn write_scalar_snapshot(w: &mut impl Write, f: &ScalarField) -> Result<()> {
    w.write_all(snapshot_header(f.grid(), "scalar").as_bytes())?;
    write_component(w, f.values())
}

pub fn write_vector_snapshot(w: &mut impl Write, u: &VectorField) -> Result<()> {
    w.write_all(snapshot_header(u.grid(), "vector").as_bytes())?;
    for c in u.components() {
        write_component(w, c.values())?;
    }
    Ok(())
}

pub enum FieldSnapshot {
    Scalar(ScalarField),
    Vector(VectorField),
}

fn read_line(r: &mut impl Read) -> Result<String> {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        buf.push(byte[0]);
        if buf.len() > 256 {
            return Err(Error::input("snapshot header too long"));
        }
    }
    String::from_utf8(buf).map_err(|_| Error::input("snapshot header is not utf-8"))
}

fn read_component(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<FieldSnapshot> {
    let header = read_line(r)?;
    let parts: Vec<&str> = header.split("; ").collect();
    if parts.len() != 4 || parts[0] != SNAPSHOT_MAGIC {
        return Err(Error::input(format!("unrecognized snapshot header: {header:?}")));
    }
    let dim: usize = parts[1]
        .parse()
        .map_err(|_| Error::input("bad dimension field in snapshot header"))?;
    let shape: Vec<usize> = parts[2]
        .split('x')
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::input("bad shape field in snapshot header"))?;
    if shape.len() != dim {
        return Err(Error::input("snapshot shape does not match its dimension"));
    }
    let grid = TorusGrid::new(&shape)?;
    match parts[3] {
        "scalar" => {
            let vals = read_component(r, grid.len())?;
            Ok(FieldSnapshot::Scalar(ScalarField::from_values(grid, vals)))
        }
        "vector" => {
            let mut comps = Vec::with_capacity(dim);
            for _ in 0..dim {
                let vals = read_component(r, grid.len())?;
                comps.push(ScalarField::from_values(grid.clone(), vals));
            }
            Ok(FieldSnapshot::Vector(VectorField::new(comps)))
        }
        other => Err(Error::input(format!("unknown snapshot kind {other:?}"))),
    }
}

/// One row per stored time: integrability norms, Sobolev levels, density
/// norm, and the divergence residual of the velocity.
pub fn run_series_csv(
    times: &[f64],
    u: &[VectorField],
    a: &[ScalarField],
    p: f64,
) -> String {
    let mut out = String::from(RUN_SERIES_HEADER);
    out.push('\n');
    for ((t, uj), aj) in times.iter().zip(u).zip(a) {
        let h1 = uj.sobolev_norm_sq(1.0).sqrt();
        let h3 = uj.sobolev_norm_sq(3.0).sqrt();
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            t,
            uj.lp_norm(p),
            uj.lp_norm(2.0 * p),
            h1,
            h3,
            aj.lp_norm(2.0 * p),
            uj.divergence_residual(),
        ));
    }
    out
}

pub fn envelope_csv(report: &EnvelopeReport) -> String {
    let mut out = String::from(ENVELOPE_HEADER);
    out.push('\n');
    for ((t, m), p95) in report
        .times
        .iter()
        .zip(&report.mean_h3_sq)
        .zip(&report.p95_h3_sq)
    {
        out.push_str(&format!("{:e},{:e},{:e}\n", t, m, p95));
    }
    out
}

/// Common JSON shape of every sampled check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StatReport {
    pub estimate: f64,
    pub exact_or_bound: f64,
    pub rel_error: f64,
    pub ci_95: f64,
    pub samples: usize,
    pub seed: u64,
}

impl From<crate::noise::StatCheck> for StatReport {
    fn from(c: crate::noise::StatCheck) -> Self {
        StatReport {
            estimate: c.estimate,
            exact_or_bound: c.exact_or_bound,
            rel_error: c.rel_error,
            ci_95: c.ci_95,
            samples: c.samples,
            seed: c.seed,
        }
    }
}

pub fn stat_report_json(report: &StatReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}
