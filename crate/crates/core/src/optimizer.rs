//! DIANA and its memoryless special case.
//!
//! One round at iteration `k`:
//! 1. every worker draws `g_i`, forms `Δ_i = g_i − h_i`, quantizes it to
//!    `Δ̂_i` and updates `h_i ← h_i + αΔ̂_i`;
//! 2. the server averages `Δ̂ = (1/n) Σ Δ̂_i` in worker order, sets
//!    `ĝ = h + Δ̂`, `v ← βv + ĝ` (with `v^{−1} = 0`),
//!    `x ← prox_{γR}(x − γv)` and `h ← h + αΔ̂`.
//!
//! The memoryless method quantizes `g_i` directly and never touches `h`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problems::Problem;
use crate::prox::Regularizer;
use crate::quantize::{
    alpha_p, encoded_len, quantize, BlockLayout, FloatWidth, PNorm, QuantizedVector,
};
use crate::rng::{stream, Purpose};
use crate::simnet::{CostModel, Network};
use crate::theory::standard_c;

/// Iterates with `‖x‖` above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        gamma: f64,
    },
    /// `γ^k = 2/(μk + θ)`.
    Decreasing {
        mu: f64,
        theta: f64,
    },
}

impl Schedule {
    pub fn gamma(&self, k: usize) -> f64 {
        match *self {
            Schedule::Constant { gamma } => gamma,
            Schedule::Decreasing { mu, theta } => 2.0 / (mu * k as f64 + theta),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { gamma } => gamma > 0.0 && gamma.is_finite(),
            Schedule::Decreasing { mu, theta } => {
                mu >= 0.0 && mu.is_finite() && theta > 0.0 && theta.is_finite()
            }
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "schedule {self:?} does not give positive stepsizes"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Quantized gradient differences with memory.
    #[default]
    Diana,
    /// `α = 0`, `h ≡ 0`: quantized gradients (1-bit QSGD at `p = 2`,
    /// TernGrad at `p = ∞`).
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DianaConfig {
    #[serde(default)]
    pub method: Method,
    /// Memory learning rate `α ≥ 0`.
    pub alpha: f64,
    pub schedule: Schedule,
    /// Momentum `β ∈ [0, 1)`.
    #[serde(default)]
    pub beta: f64,
    pub p: PNorm,
    pub layout: BlockLayout,
    pub n: usize,
    /// Width of transmitted scales, for bit accounting.
    #[serde(default)]
    pub float_width: FloatWidth,
    /// Run the workers of a round on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

impl DianaConfig {
    /// DIANA with a constant stepsize, no momentum and a single block.
    pub fn new(n: usize, dim: usize, p: PNorm, alpha: f64, gamma: f64) -> Result<Self> {
        Ok(DianaConfig {
            method: Method::Diana,
            alpha,
            schedule: Schedule::Constant { gamma },
            beta: 0.0,
            p,
            layout: BlockLayout::single(dim)?,
            n,
            float_width: FloatWidth::F32,
            parallel: false,
        })
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.n == 0 || self.n != problem.workers() {
            return Err(Error::InvalidParameter(format!(
                "config has n = {} but the problem has {} workers",
                self.n,
                problem.workers()
            )));
        }
        check_dim(problem.dim(), self.layout.total_dim())?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be >= 0",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta = {} must lie in [0, 1)",
                self.beta
            )));
        }
        self.schedule.validate()
    }

    /// `α_p` at the largest block.
    pub fn alpha_p(&self) -> Result<f64> {
        alpha_p(self.layout.max_block(), self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub worker_id: usize,
    /// Run seed; draws come from [`crate::rng::stream`].
    pub seed: u64,
    /// Memory `h_i`.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    pub x: Vec<f64>,
    /// `h = (1/n) Σ h_i`, recomputed from `memories` after each round.
    pub h: Vec<f64>,
    /// Server-side copies of the worker memories, advanced with the
    /// received `Δ̂_i`. Averaging these instead of accumulating
    /// `α · mean Δ̂` keeps rounding errors from freezing into `h`.
    pub memories: Vec<Vec<f64>>,
    /// Momentum buffer; zero before the first step.
    pub v: Vec<f64>,
    pub k: usize,
}

/// Fresh states with `h_i = 0` and `v = 0`.
pub fn init_states(x0: Vec<f64>, n: usize, seed: u64) -> (ServerState, Vec<WorkerState>) {
    let d = x0.len();
    let workers = (0..n)
        .map(|i| WorkerState {
            worker_id: i,
            seed,
            h: vec![0.0; d],
        })
        .collect();
    let memories = vec![vec![0.0; d]; n];
    (
        ServerState {
            x: x0,
            h: vec![0.0; d],
            memories,
            v: vec![0.0; d],
            k: 0,
        },
        workers,
    )
}

/// Largest coordinate gap between `server.h` and the mean of worker memories.
pub fn memory_consistency_error(server: &ServerState, workers: &[WorkerState]) -> f64 {
    let n = workers.len() as f64;
    (0..server.h.len())
        .map(|j| {
            let mean = workers.iter().map(|w| w.h[j]).sum::<f64>() / n;
            (server.h[j] - mean).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTelemetry {
    pub k: usize,
    pub gamma: f64,
    /// `Δ̂_i` (or the quantized `g_i` for the memoryless method), per worker.
    pub payloads: Vec<QuantizedVector>,
    /// Encoded size of each payload.
    pub bits: Vec<u64>,
    /// `ĝ^k`.
    pub g_hat: Vec<f64>,
}

impl StepTelemetry {
    pub fn uplink_bits(&self) -> u64 {
        self.bits.iter().sum()
    }
}

fn check_states(
    server: &ServerState,
    workers: &[WorkerState],
    problem: &Problem,
    config: &DianaConfig,
) -> Result<()> {
    let d = problem.dim();
    check_dim(config.n, workers.len())?;
    check_dim(d, server.x.len())?;
    check_dim(d, server.h.len())?;
    check_dim(d, server.v.len())?;
    check_dim(config.n, server.memories.len())?;
    for m in &server.memories {
        check_dim(d, m.len())?;
    }
    for (i, w) in workers.iter().enumerate() {
        if w.worker_id != i {
            return Err(Error::InvalidParameter(format!(
                "worker {i} carries id {}",
                w.worker_id
            )));
        }
        check_dim(d, w.h.len())?;
    }
    Ok(())
}

fn check_divergence(x: &[f64], k: usize) -> Result<()> {
    let mut norm2 = 0.0;
    for v in x {
        if !v.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }
        norm2 += v * v;
    }
    if norm2.sqrt() > DIVERGENCE_NORM {
        return Err(Error::Diverged { iteration: k });
    }
    Ok(())
}

struct WorkerOutput {
    payload: QuantizedVector,
    decoded: Vec<f64>,
    bits: u64,
}

fn map_workers<F>(workers: &mut [WorkerState], parallel: bool, f: F) -> Result<Vec<WorkerOutput>>
where
    F: Fn(&mut WorkerState) -> Result<WorkerOutput> + Sync + Send,
{
    let wrap = |w: &mut WorkerState| {
        let id = w.worker_id;
        f(w).map_err(|e| Error::Worker {
            worker: id,
            source: Box::new(e),
        })
    };
    if parallel {
        workers.par_iter_mut().map(wrap).collect()
    } else {
        workers.iter_mut().map(wrap).collect()
    }
}

/// One DIANA round. States are updated in place.
pub fn diana_step(
    server: &mut ServerState,
    workers: &mut [WorkerState],
    problem: &Problem,
    config: &DianaConfig,
    reg: &Regularizer,
) -> Result<StepTelemetry> {
    check_states(server, workers, problem, config)?;
    let k = server.k;
    let d = problem.dim();
    let gamma = config.schedule.gamma(k);
    let alpha = config.alpha;
    let x = &server.x;

    let outputs = map_workers(workers, config.parallel, |w| {
        let mut g = vec![0.0; d];
        let mut oracle = stream(w.seed, w.worker_id, Purpose::Oracle, k);
        problem.stochastic_gradient(w.worker_id, x, &mut oracle, &mut g)?;
        let delta: Vec<f64> = g.iter().zip(&w.h).map(|(gi, hi)| gi - hi).collect();
        let mut coins = stream(w.seed, w.worker_id, Purpose::Quantizer, k);
        let payload = quantize(&delta, &config.layout, config.p, &mut coins)?;
        let decoded = payload.decode();
        for (hi, di) in w.h.iter_mut().zip(&decoded) {
            *hi += alpha * di;
        }
        let bits = encoded_len(&payload, config.float_width) as u64;
        Ok(WorkerOutput {
            payload,
            decoded,
            bits,
        })
    })?;

    let n = workers.len() as f64;
    let mut mean = vec![0.0; d];
    for out in &outputs {
        for (m, v) in mean.iter_mut().zip(&out.decoded) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let g_hat: Vec<f64> = server.h.iter().zip(&mean).map(|(h, m)| h + m).collect();
    for (v, g) in server.v.iter_mut().zip(&g_hat) {
        *v = config.beta * *v + g;
    }
    for (xi, v) in server.x.iter_mut().zip(&server.v) {
        *xi -= gamma * v;
    }
    reg.prox_in_place(gamma, &mut server.x);
    for (mirror, out) in server.memories.iter_mut().zip(&outputs) {
        for (h, v) in mirror.iter_mut().zip(&out.decoded) {
            *h += alpha * v;
        }
    }
    for (j, h) in server.h.iter_mut().enumerate() {
        *h = server.memories.iter().map(|m| m[j]).sum::<f64>() / n;
    }
    server.k += 1;
    check_divergence(&server.x, k)?;

    let mut payloads = Vec::with_capacity(outputs.len());
    let mut bits = Vec::with_capacity(outputs.len());
    for out in outputs {
        payloads.push(out.payload);
        bits.push(out.bits);
    }
    Ok(StepTelemetry {
        k,
        gamma,
        payloads,
        bits,
        g_hat,
    })
}

/// One round of the memoryless method: workers quantize `g_i` itself.
/// Memories are left untouched and ignored.
pub fn baseline_step(
    server: &mut ServerState,
    workers: &mut [WorkerState],
    problem: &Problem,
    config: &DianaConfig,
    reg: &Regularizer,
) -> Result<StepTelemetry> {
    check_states(server, workers, problem, config)?;
    let k = server.k;
    let d = problem.dim();
    let gamma = config.schedule.gamma(k);
    let x = &server.x;

    let outputs = map_workers(workers, config.parallel, |w| {
        let mut g = vec![0.0; d];
        let mut oracle = stream(w.seed, w.worker_id, Purpose::Oracle, k);
        problem.stochastic_gradient(w.worker_id, x, &mut oracle, &mut g)?;
        let mut coins = stream(w.seed, w.worker_id, Purpose::Quantizer, k);
        let payload = quantize(&g, &config.layout, config.p, &mut coins)?;
        let decoded = payload.decode();
        let bits = encoded_len(&payload, config.float_width) as u64;
        Ok(WorkerOutput {
            payload,
            decoded,
            bits,
        })
    })?;

    let n = workers.len() as f64;
    let mut g_hat = vec![0.0; d];
    for out in &outputs {
        for (m, v) in g_hat.iter_mut().zip(&out.decoded) {
            *m += v;
        }
    }
    for m in g_hat.iter_mut() {
        *m /= n;
    }
    for ((xi, v), g) in server.x.iter_mut().zip(server.v.iter_mut()).zip(&g_hat) {
        *v = config.beta * *v + g;
        *xi -= gamma * *v;
    }
    reg.prox_in_place(gamma, &mut server.x);
    server.k += 1;
    check_divergence(&server.x, k)?;

    let (payloads, bits) = outputs.into_iter().map(|o| (o.payload, o.bits)).unzip();
    Ok(StepTelemetry {
        k,
        gamma,
        payloads,
        bits,
        g_hat,
    })
}

fn sum_memory_error(workers: &[WorkerState], problem: &Problem) -> Result<f64> {
    let opt = problem.optimum().ok_or(Error::MissingOptimum)?;
    Ok(workers
        .iter()
        .zip(&opt.grads)
        .map(|(w, hs)| {
            w.h.iter()
                .zip(hs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum())
}

/// `V = ‖x − x*‖² + (cγ²/n) Σ ‖h_i − h_i*‖²`.
pub fn lyapunov(
    server: &ServerState,
    workers: &[WorkerState],
    problem: &Problem,
    c: f64,
    gamma: f64,
) -> Result<f64> {
    let opt = problem.optimum().ok_or(Error::MissingOptimum)?;
    let dist: f64 = server
        .x
        .iter()
        .zip(&opt.x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if c == 0.0 {
        return Ok(dist);
    }
    let n = workers.len() as f64;
    Ok(dist + c * gamma * gamma / n * sum_memory_error(workers, problem)?)
}

/// `Λ = f(x) − f* + c(Lγ²/2)(1/n) Σ ‖h_i − h_i*‖²`.
pub fn nonconvex_lyapunov(
    server: &ServerState,
    workers: &[WorkerState],
    problem: &Problem,
    c: f64,
    gamma: f64,
) -> Result<f64> {
    let opt = problem.optimum().ok_or(Error::MissingOptimum)?;
    let l = problem
        .constants()
        .map(|k| k.l)
        .ok_or_else(|| Error::InvalidParameter("smoothness constant unknown".into()))?;
    let gap = problem.value(&server.x) - opt.f;
    if c == 0.0 {
        return Ok(gap);
    }
    let n = workers.len() as f64;
    Ok(gap + c * l * gamma * gamma / 2.0 / n * sum_memory_error(workers, problem)?)
}

/// Metrics at iteration `k`, taken before step `k` is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub k: usize,
    /// `f(x^k) + R(x^k)`.
    pub objective: f64,
    /// `‖∇f(x^k)‖`.
    pub grad_norm: f64,
    /// `V^k`, when the optimum is known.
    pub lyapunov: Option<f64>,
    /// `Λ^k`, when the optimum and `L` are known.
    pub lambda: Option<f64>,
    /// Uplink bits sent before iteration `k`.
    pub bits_uplink: u64,
    /// Seconds since the run started. Not deterministic.
    pub wall_time: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
    /// `c` in the Lyapunov functions. Defaults to `4(1−α_p)/(nα_p²)` with
    /// memory and 0 without.
    pub lyapunov_c: Option<f64>,
    /// Emit a record every this many iterations (and always at `k = K`).
    /// 0 is treated as 1.
    pub record_every: usize,
    pub cost: CostModel,
    /// Keep the per-message channel log.
    pub keep_log: bool,
    /// Run seeds on the rayon pool. Output order is unchanged.
    pub parallel_seeds: bool,
}

/// A single-seed run that can be stepped manually.
pub struct Runner<'a> {
    problem: &'a Problem,
    config: &'a DianaConfig,
    reg: &'a Regularizer,
    seed: u64,
    c: f64,
    pub server: ServerState,
    pub workers: Vec<WorkerState>,
    pub network: Network,
    started: Instant,
    diverged: bool,
}

impl<'a> Runner<'a> {
    pub fn new(
        problem: &'a Problem,
        config: &'a DianaConfig,
        reg: &'a Regularizer,
        seed: u64,
        options: &RunOptions,
    ) -> Result<Self> {
        config.validate(problem)?;
        reg.validate(Some(problem.dim()))?;
        let x0 = options
            .x0
            .clone()
            .unwrap_or_else(|| vec![0.0; problem.dim()]);
        check_dim(problem.dim(), x0.len())?;
        let c = match options.lyapunov_c {
            Some(c) => c,
            None if config.method == Method::Diana && config.alpha > 0.0 => {
                standard_c(config.n, config.alpha_p()?)
            }
            None => 0.0,
        };
        let (server, workers) = init_states(x0, config.n, seed);
        Ok(Runner {
            problem,
            config,
            reg,
            seed,
            c,
            server,
            workers,
            network: Network::new(options.cost, options.keep_log),
            started: Instant::now(),
            diverged: false,
        })
    }

    pub fn lyapunov_c(&self) -> f64 {
        self.c
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn step(&mut self) -> Result<StepTelemetry> {
        let k = self.server.k;
        let result = match self.config.method {
            Method::Diana => diana_step(
                &mut self.server,
                &mut self.workers,
                self.problem,
                self.config,
                self.reg,
            ),
            Method::Baseline => baseline_step(
                &mut self.server,
                &mut self.workers,
                self.problem,
                self.config,
                self.reg,
            ),
        };
        match result {
            Ok(t) => {
                self.network
                    .round_trip(k, self.problem.dim(), &t.payloads)?;
                Ok(t)
            }
            Err(e) => {
                if matches!(e, Error::Diverged { .. }) {
                    self.diverged = true;
                }
                Err(e)
            }
        }
    }

    /// `V^k` at the current state, with `γ^k` from the schedule.
    pub fn lyapunov(&self) -> Result<f64> {
        lyapunov(
            &self.server,
            &self.workers,
            self.problem,
            self.c,
            self.config.schedule.gamma(self.server.k),
        )
    }

    pub fn record(&self) -> RunRecord {
        let x = &self.server.x;
        let gamma = self.config.schedule.gamma(self.server.k);
        let grad = self.problem.gradient(x);
        RunRecord {
            seed: self.seed,
            k: self.server.k,
            objective: self.problem.value(x) + self.reg.eval(x),
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            lyapunov: lyapunov(&self.server, &self.workers, self.problem, self.c, gamma).ok(),
            lambda: nonconvex_lyapunov(&self.server, &self.workers, self.problem, self.c, gamma)
                .ok(),
            bits_uplink: self.network.channel.uplink_bits(),
            wall_time: self.started.elapsed().as_secs_f64(),
            diverged: self.diverged,
        }
    }
}

fn run_seed(
    problem: &Problem,
    config: &DianaConfig,
    reg: &Regularizer,
    iterations: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<RunRecord>> {
    let every = options.record_every.max(1);
    let mut runner = Runner::new(problem, config, reg, seed, options)?;
    let mut records = vec![runner.record()];
    for k in 0..iterations {
        match runner.step() {
            Ok(_) => {}
            Err(Error::Diverged { .. }) => {
                let mut last = runner.record();
                last.k = k + 1;
                last.diverged = true;
                records.push(last);
                return Ok(records);
            }
            Err(e) => return Err(e),
        }
        if (k + 1) % every == 0 || k + 1 == iterations {
            records.push(runner.record());
        }
    }
    Ok(records)
}

/// `iterations` steps per seed, with records at `k = 0..=iterations`.
/// A diverged seed ends with a record flagged `diverged`.
pub fn run(
    problem: &Problem,
    config: &DianaConfig,
    reg: &Regularizer,
    iterations: usize,
    seeds: &[u64],
) -> Result<Vec<RunRecord>> {
    run_with(
        problem,
        config,
        reg,
        iterations,
        seeds,
        &RunOptions::default(),
    )
}

pub fn run_with(
    problem: &Problem,
    config: &DianaConfig,
    reg: &Regularizer,
    iterations: usize,
    seeds: &[u64],
    options: &RunOptions,
) -> Result<Vec<RunRecord>> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be >= 1".into()));
    }
    let per_seed: Vec<Result<Vec<RunRecord>>> = if options.parallel_seeds {
        seeds
            .par_iter()
            .map(|&s| run_seed(problem, config, reg, iterations, s, options))
            .collect()
    } else {
        seeds
            .iter()
            .map(|&s| run_seed(problem, config, reg, iterations, s, options))
            .collect()
    };
    let mut out = Vec::new();
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::quadratic_problem;

    #[test]
    fn lossless_scalar_step_is_prox_gradient() {
        let problem = quadratic_problem(1, 1, 1.0, 3).unwrap();
        let cfg = DianaConfig::new(1, 1, PNorm::INF, 0.0, 0.3).unwrap();
        let reg = Regularizer::L1 { lambda1: 0.1 };
        let (mut s, mut w) = init_states(vec![2.0], 1, 9);
        for _ in 0..5 {
            let x = s.x.clone();
            let g = problem.gradient(&x);
            let expected = reg.prox(0.3, &[x[0] - 0.3 * g[0]]);
            diana_step(&mut s, &mut w, &problem, &cfg, &reg).unwrap();
            assert_eq!(s.x, expected);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let problem = quadratic_problem(1, 2, 1.0, 0).unwrap();
        let cfg = DianaConfig::new(1, 2, PNorm::INF, 0.0, 10.0).unwrap();
        let records = run_with(
            &problem,
            &cfg,
            &Regularizer::Zero,
            400,
            &[1],
            &RunOptions {
                x0: Some(vec![1.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        let last = records.last().unwrap();
        assert!(last.diverged);
        assert!(last.k < 400);
    }

    #[test]
    fn rejects_mismatched_config() {
        let problem = quadratic_problem(2, 3, 2.0, 0).unwrap();
        let cfg = DianaConfig::new(3, 3, PNorm::TWO, 0.1, 0.1).unwrap();
        assert!(run(&problem, &cfg, &Regularizer::Zero, 1, &[0]).is_err());
        let cfg = DianaConfig::new(2, 4, PNorm::TWO, 0.1, 0.1).unwrap();
        assert!(run(&problem, &cfg, &Regularizer::Zero, 1, &[0]).is_err());
    }
}
