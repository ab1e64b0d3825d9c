//! Parameter sweeps: the `[sweep]` table maps dotted config keys to value
//! lists; the cartesian product becomes a cell grid. Cells run on a bounded
//! worker pool, each writing an isolated run bundle; invalid cells are
//! recorded and skipped without stopping the rest.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mildns_core::error::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::write_atomic;

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub index: usize,
    pub label: String,
    /// "ok", "rejected" (invalid cell config), or "failed" (run error)
    pub status: String,
    pub detail: String,
    pub dir: Option<PathBuf>,
}

fn flatten_axes(
    prefix: &str,
    table: &toml::value::Table,
    out: &mut Vec<(String, Vec<toml::Value>)>,
) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten_axes(&key, t, out),
            toml::Value::Array(a) => out.push((key, a.clone())),
            other => out.push((key, vec![other.clone()])),
        }
    }
}

fn set_path(table: &mut toml::value::Table, dotted: &str, value: toml::Value) -> Result<()> {
    match dotted.split_once('.') {
        None => {
            table.insert(dotted.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::value::Table::new()));
            match entry.as_table_mut() {
                Some(t) => set_path(t, rest, value),
                None => Err(Error::config(format!(
                    "sweep key {dotted:?} descends into the non-table entry {head:?}"
                ))),
            }
        }
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run_cell(idx: usize, label: &str, text: &str, out_dir: &Path) -> CellOutcome {
    let make = |status: &str, detail: String, dir: Option<PathBuf>| CellOutcome {
        index: idx,
        label: label.to_string(),
        status: status.to_string(),
        detail,
        dir,
    };
    let cfg = match RunConfig::from_str(text) {
        Ok(c) => c,
        Err(e) => return make("rejected", e.to_string(), None),
    };
    let dir = out_dir.join(format!("cell-{idx:03}"));
    let run = crate::runner::execute(&cfg).and_then(|art| {
        crate::runner::write_outputs(&dir, &art, cfg.canonical_toml()?)
    });
    match run {
        Ok(_) => make("ok", format!("wrote cell-{idx:03}"), Some(dir)),
        Err(e) => make("failed", e.to_string(), None),
    }
}

/// Expands the sweep grid and runs every cell with at most `jobs` workers.
/// Returns the outcomes in cell order together with the summary text that
/// was written to `sweep_summary.csv`.
pub fn run_sweep(
    base_text: &str,
    out_dir: &Path,
    jobs: usize,
) -> Result<(Vec<CellOutcome>, String)> {
    let base_cfg = RunConfig::from_str(base_text)?;
    let sweep_table = base_cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::config("the configuration has no [sweep] table"))?;
    let mut base_table: toml::value::Table = toml::from_str(base_text)
        .map_err(|e| Error::config(format!("unreadable configuration: {e}")))?;
    base_table.remove("sweep");

    let mut axes = Vec::new();
    flatten_axes("", &sweep_table, &mut axes);
    if axes.is_empty() {
        return Err(Error::config("the [sweep] table lists no axes"));
    }
    axes.sort_by(|a, b| a.0.cmp(&b.0));
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();

    // all cell configs are prepared up front so the grid is deterministic
    // regardless of worker scheduling
    let mut specs = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut table = base_table.clone();
        let mut parts = Vec::with_capacity(axes.len());
        for (key, vals) in axes.iter().rev() {
            let v = &vals[rem % vals.len()];
            rem /= vals.len();
            set_path(&mut table, key, v.clone())?;
            parts.push(format!("{key}={v}"));
        }
        parts.reverse();
        let text = toml::to_string(&toml::Value::Table(table))
            .map_err(|e| Error::config(format!("cell {idx} serialization failed: {e}")))?;
        specs.push((idx, parts.join(","), text));
    }

    std::fs::create_dir_all(out_dir)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; total]);
    let workers = jobs.max(1).min(total);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= total {
                    break;
                }
                let (idx, label, text) = &specs[i];
                let outcome = run_cell(*idx, label, text, out_dir);
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    let cells: Vec<CellOutcome> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|c| c.expect("every cell index was claimed by a worker"))
        .collect();

    let mut summary = String::from("cell,label,status,detail\n");
    for c in &cells {
        summary.push_str(&format!(
            "{},{},{},{}\n",
            c.index,
            csv_quote(&c.label),
            c.status,
            csv_quote(&c.detail)
        ));
    }
    write_atomic(&out_dir.join("sweep_summary.csv"), summary.as_bytes())?;
    Ok((cells, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_flatten_and_sort() {
        let text = "[sweep]\n\"time.dt\" = [0.1, 0.2]\n[sweep.lp]\np = [4.0]\n";
        let table: toml::value::Table = toml::from_str(text).unwrap();
        let sweep = table["sweep"].as_table().unwrap();
        let mut axes = Vec::new();
        flatten_axes("", sweep, &mut axes);
        axes.sort_by(|a, b| a.0.cmp(&b.0));
        let keys: Vec<&str> = axes.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["lp.p", "time.dt"]);
        assert_eq!(axes[1].1.len(), 2);
    }

    #[test]
    fn set_path_builds_nested_tables() {
        let mut table = toml::value::Table::new();
        set_path(&mut table, "picard.tol", toml::Value::Float(1e-6)).unwrap();
        assert_eq!(
            table["picard"]["tol"].as_float(),
            Some(1e-6)
        );
    }
}
