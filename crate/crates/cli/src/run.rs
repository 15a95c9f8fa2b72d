//! `diana run`: execute every seed and write records, summary and logs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use diana_core::theory::{
    baseline_decreasing_bound, baseline_strongly_convex_bound, momentum_bound, nonconvex_bound,
    select_decreasing, strongly_convex_bound, MomentumVariant, StronglyConvex,
};
use diana_core::{Error, RunRecord, Runner, Schedule};

use crate::config::{Experiment, ExperimentConfig, Resolved, Validation};
use crate::output::{records_csv, write_atomic, write_json};
use crate::VERSION;

pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub diverged: bool,
    /// JSON-lines channel log, when requested.
    pub log: Option<Vec<u8>>,
}

fn run_seed(exp: &Experiment, seed: u64) -> Result<SeedRun, Error> {
    let every = exp.options.record_every.max(1);
    let mut runner = Runner::new(&exp.problem, &exp.config, &exp.reg, seed, &exp.options)?;
    let mut records = vec![runner.record()];
    let mut diverged = false;
    for k in 0..exp.iterations {
        match runner.step() {
            Ok(_) => {}
            Err(Error::Diverged { .. }) => {
                let mut last = runner.record();
                last.k = k + 1;
                last.diverged = true;
                records.push(last);
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if (k + 1) % every == 0 || k + 1 == exp.iterations {
            records.push(runner.record());
        }
    }
    let log = if exp.options.keep_log {
        let mut buf = Vec::new();
        runner.network.channel.write_jsonl(&mut buf)?;
        Some(buf)
    } else {
        None
    };
    Ok(SeedRun {
        seed,
        records,
        diverged,
        log,
    })
}

/// Runs all seeds on the thread pool; results keep the seed order.
pub fn execute(exp: &Experiment) -> Result<Vec<SeedRun>> {
    let runs: Result<Vec<SeedRun>, Error> =
        exp.seeds.par_iter().map(|&s| run_seed(exp, s)).collect();
    Ok(runs?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalMetrics {
    pub k: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub lyapunov: Option<f64>,
    pub lambda: Option<f64>,
    pub bits_uplink: u64,
}

impl From<&RunRecord> for FinalMetrics {
    fn from(r: &RunRecord) -> Self {
        FinalMetrics {
            k: r.k,
            objective: r.objective,
            grad_norm: r.grad_norm,
            lyapunov: r.lyapunov,
            lambda: r.lambda,
            bits_uplink: r.bits_uplink,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub objective: f64,
    pub grad_norm: f64,
    pub lyapunov: Option<f64>,
    pub lambda: Option<f64>,
    pub bits_uplink: f64,
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn mean_final(finals: &[FinalMetrics]) -> MeanMetrics {
    let n = finals.len().max(1) as f64;
    MeanMetrics {
        objective: finals.iter().map(|f| f.objective).sum::<f64>() / n,
        grad_norm: finals.iter().map(|f| f.grad_norm).sum::<f64>() / n,
        lyapunov: mean_opt(finals.iter().map(|f| f.lyapunov)),
        lambda: mean_opt(finals.iter().map(|f| f.lambda)),
        bits_uplink: finals.iter().map(|f| f.bits_uplink as f64).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub diverged: bool,
    #[serde(rename = "final")]
    pub last: FinalMetrics,
}

/// Bound values at selected iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    /// Which quantity is bounded.
    pub bounds: String,
    /// Initial value the bound starts from.
    pub start: f64,
    pub points: Vec<(u64, f64)>,
}

/// The convergence bound that applies to the resolved parameters, if any.
/// `v0` overrides the initial Lyapunov value computed from `x0`.
pub fn reference_curve(
    exp: &Experiment,
    ks: &[u64],
    v0: Option<f64>,
) -> Result<Option<Curve>, String> {
    if !exp.validation.validated {
        return Ok(None);
    }
    let Some(k) = exp.problem.constants() else {
        return Ok(None);
    };
    let cfg = &exp.config;
    let ap = exp.alpha_p;
    let opt = exp.problem.optimum();
    let x0 = exp.x0();
    let dist0 = opt.map(|o| {
        x0.iter()
            .zip(&o.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    });
    let sum_hstar2 = opt.map(|o| o.grads.iter().flatten().map(|g| g * g).sum::<f64>());
    let need =
        |v: Option<f64>| v.ok_or_else(|| "the optimum is unknown; set theory.v0".to_string());
    let s = |e: diana_core::Error| e.to_string();

    if cfg.beta > 0.0 {
        let gap0 = need(v0.or_else(|| opt.map(|o| exp.problem.value(&x0) - o.f)))?;
        let variant = if cfg.alpha > 0.0 {
            MomentumVariant::Diana { alpha: cfg.alpha }
        } else {
            MomentumVariant::Baseline
        };
        let gamma = cfg.schedule.gamma(0);
        let points = ks
            .iter()
            .filter(|&&i| i > 0)
            .map(|&i| {
                momentum_bound(k, ap, variant, cfg.beta, gamma, i, gap0)
                    .map(|b| (i, b))
                    .map_err(s)
            })
            .collect::<Result<_, _>>()?;
        return Ok(Some(Curve {
            bounds: "E‖∇f(x̄^k)‖², momentum".into(),
            start: gap0,
            points,
        }));
    }

    match cfg.schedule {
        Schedule::Decreasing { theta, .. } => {
            if cfg.alpha == 0.0 {
                let d0 = need(v0.or(dist0))?;
                let sh = need(sum_hstar2)?;
                let points = ks
                    .iter()
                    .map(|&i| {
                        baseline_decreasing_bound(k, ap, theta, d0, sh, i)
                            .map(|b| (i, b))
                            .map_err(s)
                    })
                    .collect::<Result<_, _>>()?;
                return Ok(Some(Curve {
                    bounds: "E‖x^k − x*‖², decreasing stepsize".into(),
                    start: d0,
                    points,
                }));
            }
            let mut d = select_decreasing(k, ap).map_err(s)?;
            if cfg.alpha != d.alpha || exp.lyapunov_c != d.c || theta < d.theta {
                return Ok(None);
            }
            d.theta = theta;
            d.eta = d.mu / theta;
            let v = need(v0.or_else(|| exp.initial_lyapunov()))?;
            let points = ks.iter().map(|&i| (i, d.bound(v, i))).collect();
            Ok(Some(Curve {
                bounds: "E V^k, decreasing stepsize".into(),
                start: v,
                points,
            }))
        }
        Schedule::Constant { gamma } if k.mu > 0.0 => {
            if cfg.alpha == 0.0 {
                let d0 = need(v0.or(dist0))?;
                let sh = need(sum_hstar2)?;
                let points = ks
                    .iter()
                    .map(|&i| {
                        baseline_strongly_convex_bound(k, ap, gamma, d0, sh, i)
                            .map(|b| (i, b))
                            .map_err(s)
                    })
                    .collect::<Result<_, _>>()?;
                return Ok(Some(Curve {
                    bounds: "E‖x^k − x*‖²".into(),
                    start: d0,
                    points,
                }));
            }
            let params = StronglyConvex {
                alpha_p: ap,
                alpha: cfg.alpha,
                c: exp.lyapunov_c,
                gamma,
                gamma_memory: cfg.alpha / k.mu,
                gamma_smoothness: 2.0 / ((k.l + k.mu) * (1.0 + exp.lyapunov_c * cfg.alpha)),
                leading_term: 1.0 / (gamma * k.mu),
            };
            let v = need(v0.or_else(|| exp.initial_lyapunov()))?;
            let points = ks
                .iter()
                .map(|&i| {
                    strongly_convex_bound(k, &params, v, i)
                        .map(|b| (i, b))
                        .map_err(s)
                })
                .collect::<Result<_, _>>()?;
            Ok(Some(Curve {
                bounds: "E V^k".into(),
                start: v,
                points,
            }))
        }
        Schedule::Constant { .. } => {
            if cfg.alpha == 0.0 || k.zeta2.is_none() {
                return Ok(None);
            }
            let lambda0 = need(v0.or_else(|| exp.initial_lambda()))?;
            let points = ks
                .iter()
                .filter(|&&i| i > 0)
                .map(|&i| {
                    nonconvex_bound(k, ap, i, lambda0)
                        .map(|b| (i, b))
                        .map_err(s)
                })
                .collect::<Result<_, _>>()?;
            Ok(Some(Curve {
                bounds: "E‖∇f(x̄^K)‖² with γ tuned to the horizon K".into(),
                start: lambda0,
                points,
            }))
        }
    }
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub version: &'static str,
    pub status: &'static str,
    pub validation: &'a Validation,
    pub seed_offset: u64,
    pub config: &'a ExperimentConfig,
    pub resolved: Resolved,
    pub provenance: &'a BTreeMap<String, String>,
    pub seeds: Vec<SeedSummary>,
    pub mean_final: MeanMetrics,
    pub diverged_seeds: Vec<u64>,
    /// Uncompressed uplink bits (`n·d·b` per round) over the measured total.
    pub compression_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_curve: Option<Curve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_curve_error: Option<String>,
}

pub fn summarize<'a>(exp: &'a Experiment, runs: &[SeedRun], seed_offset: u64) -> Summary<'a> {
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            diverged: r.diverged,
            last: r.records.last().unwrap().into(),
        })
        .collect();
    let finals: Vec<FinalMetrics> = seeds.iter().map(|s| s.last.clone()).collect();
    let diverged_seeds = runs.iter().filter(|r| r.diverged).map(|r| r.seed).collect();

    let per_round =
        (exp.config.n * exp.problem.dim()) as f64 * exp.config.float_width.bits() as f64;
    let bits: u64 = finals.iter().map(|f| f.bits_uplink).sum();
    let rounds: usize = finals.iter().map(|f| f.k).sum();
    let compression_ratio = (bits > 0).then(|| per_round * rounds as f64 / bits as f64);

    let mut ks: Vec<u64> = runs
        .first()
        .map(|r| r.records.iter().map(|x| x.k as u64).collect())
        .unwrap_or_default();
    ks.dedup();
    let v0 = exp.input.theory.as_ref().and_then(|t| t.v0);
    let (reference_curve, reference_curve_error) = match reference_curve(exp, &ks, v0) {
        Ok(c) => (c, None),
        Err(e) => (None, Some(e)),
    };
    Summary {
        version: VERSION,
        status: exp.validation.stamp(),
        validation: &exp.validation,
        seed_offset,
        config: &exp.input,
        resolved: exp.resolved(),
        provenance: &exp.provenance,
        mean_final: mean_final(&finals),
        seeds,
        diverged_seeds,
        compression_ratio,
        reference_curve,
        reference_curve_error,
    }
}

/// Writes `records.csv`, `summary.json` and the optional per-seed
/// `messages/seed-<s>.jsonl` logs under `dir`.
pub fn write_outputs(
    dir: &Path,
    exp: &Experiment,
    runs: &[SeedRun],
    seed_offset: u64,
) -> Result<()> {
    let records: Vec<RunRecord> = runs
        .iter()
        .flat_map(|r| r.records.iter().cloned())
        .collect();
    write_atomic(&dir.join("records.csv"), &records_csv(&records)?)?;
    for r in runs {
        if let Some(log) = &r.log {
            write_atomic(
                &dir.join("messages").join(format!("seed-{}.jsonl", r.seed)),
                log,
            )?;
        }
    }
    write_json(
        &dir.join("summary.json"),
        &summarize(exp, runs, seed_offset),
    )
}
