//! `diana sweep`: cross product over `p`, block size and `α`.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use diana_core::{PNorm, Schedule};

use crate::config::{resolve, Loaded, Setting, SweepSpec};
use crate::output::{write_atomic, write_json};
use crate::run::{execute, mean_final, write_outputs, FinalMetrics, SeedRun};
use crate::{Failure, VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub p: PNorm,
    pub block_size: Option<usize>,
    pub alpha: Setting,
}

pub fn cells(loaded: &Loaded) -> Result<Vec<Cell>, Failure> {
    let spec: &SweepSpec = loaded
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config("sweep: section is required".into()))?;
    let m = &loaded.config.method;
    let ps = spec.p.clone().unwrap_or_else(|| vec![m.p]);
    let blocks: Vec<Option<usize>> = match &spec.block_size {
        Some(b) => b.iter().copied().map(Some).collect(),
        None => vec![m.block_size],
    };
    let alphas = spec.alpha.clone().unwrap_or_else(|| vec![m.alpha]);
    for (name, empty) in [
        ("sweep.p", ps.is_empty()),
        ("sweep.block_size", blocks.is_empty()),
        ("sweep.alpha", alphas.is_empty()),
    ] {
        if empty {
            return Err(Failure::Config(format!("{name}: must not be empty")));
        }
    }
    if spec.block_size.is_some() && m.blocks.is_some() {
        return Err(Failure::Config(
            "sweep.block_size: conflicts with method.blocks".into(),
        ));
    }
    let mut out = Vec::new();
    for &p in &ps {
        for &block_size in &blocks {
            for &alpha in &alphas {
                out.push(Cell {
                    p,
                    block_size,
                    alpha,
                });
            }
        }
    }
    Ok(out)
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct CellRow {
    pub cell: usize,
    pub p: String,
    pub block_size: String,
    pub alpha: String,
    pub alpha_value: Option<f64>,
    pub gamma: Option<f64>,
    pub status: String,
    pub iterations_to_target: Option<usize>,
    pub final_objective: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub bits_uplink: Option<f64>,
    pub message: String,
}

/// First recorded `k` at which every seed has `V^k ≤ target` (`‖∇f‖²` when
/// `V` is unavailable) and stays there for the rest of its records.
pub fn iterations_to_target(runs: &[SeedRun], target: f64) -> Option<usize> {
    let mut worst = 0;
    for r in runs {
        let metric = |x: &diana_core::RunRecord| x.lyapunov.unwrap_or(x.grad_norm * x.grad_norm);
        let last_above = r.records.iter().rposition(|x| !(metric(x) <= target));
        let first_ok = match last_above {
            None => r.records.first()?.k,
            Some(i) => r.records.get(i + 1)?.k,
        };
        if r.diverged {
            return None;
        }
        worst = worst.max(first_ok);
    }
    Some(worst)
}

pub struct SweepOutcome {
    pub rows: Vec<CellRow>,
    pub failed: usize,
    pub diverged: usize,
}

fn run_cell(
    loaded: &Loaded,
    cell: &Cell,
    index: usize,
    dir: &Path,
    seed_offset: u64,
    strict: bool,
    target: f64,
) -> CellRow {
    let mut cfg = loaded.config.clone();
    cfg.method.p = cell.p;
    if cell.block_size.is_some() {
        cfg.method.block_size = cell.block_size;
    }
    cfg.method.alpha = cell.alpha;
    let mut row = CellRow {
        cell: index,
        p: cell.p.to_string(),
        block_size: match (cell.block_size, &cfg.method.blocks) {
            (Some(b), _) => b.to_string(),
            (None, Some(_)) => "explicit".into(),
            (None, None) => "full".into(),
        },
        alpha: cell.alpha.to_string(),
        alpha_value: None,
        gamma: None,
        status: "failed".into(),
        iterations_to_target: None,
        final_objective: None,
        final_grad_norm: None,
        final_lyapunov: None,
        bits_uplink: None,
        message: String::new(),
    };
    let cell_loaded = Loaded {
        config: cfg,
        base_dir: loaded.base_dir.clone(),
    };
    let exp = match resolve(&cell_loaded, seed_offset) {
        Ok(e) => e,
        Err(e) => {
            row.message = e.to_string();
            return row;
        }
    };
    row.alpha_value = Some(exp.config.alpha);
    if let Schedule::Constant { gamma } = exp.config.schedule {
        row.gamma = Some(gamma);
    }
    if strict && !exp.validation.validated {
        row.message = exp.validation.failures().join("; ");
        return row;
    }
    let runs = match execute(&exp) {
        Ok(r) => r,
        Err(e) => {
            row.message = format!("{e:#}");
            return row;
        }
    };
    if let Err(e) = write_outputs(&dir.join(format!("cell-{index}")), &exp, &runs, seed_offset) {
        row.message = format!("{e:#}");
        return row;
    }
    let finals: Vec<FinalMetrics> = runs
        .iter()
        .map(|r| r.records.last().unwrap().into())
        .collect();
    let mean = mean_final(&finals);
    row.final_objective = Some(mean.objective);
    row.final_grad_norm = Some(mean.grad_norm);
    row.final_lyapunov = mean.lyapunov;
    row.bits_uplink = Some(mean.bits_uplink);
    row.iterations_to_target = iterations_to_target(&runs, target);
    let diverged = runs.iter().any(|r| r.diverged);
    row.status = match (diverged, exp.validation.validated) {
        (true, _) => "diverged",
        (false, true) => "ok",
        (false, false) => "ok-unvalidated",
    }
    .into();
    row
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    version: &'static str,
    seed_offset: u64,
    strict: bool,
    config: &'a crate::config::ExperimentConfig,
    cells: &'a [CellRow],
}

/// Runs every cell (in parallel), then writes `sweep.csv` and `sweep.json`.
/// Each cell writes its own records and summary under `cell-<i>/`.
pub fn sweep(loaded: &Loaded, dir: &Path, seed_offset: u64, strict: bool) -> Result<SweepOutcome> {
    let grid = cells(loaded)?;
    let target = loaded
        .config
        .sweep
        .as_ref()
        .map(|s| s.target)
        .unwrap_or(1e-6);
    let rows: Vec<CellRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, c)| run_cell(loaded, c, i, dir, seed_offset, strict, target))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    write_atomic(&dir.join("sweep.csv"), &w.into_inner()?)?;
    write_json(
        &dir.join("sweep.json"),
        &SweepSummary {
            version: VERSION,
            seed_offset,
            strict,
            config: &loaded.config,
            cells: &rows,
        },
    )?;
    Ok(SweepOutcome {
        failed: rows.iter().filter(|r| r.status == "failed").count(),
        diverged: rows.iter().filter(|r| r.status == "diverged").count(),
        rows,
    })
}
