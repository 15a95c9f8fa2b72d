//! Experiment configuration: TOML schema and resolution into a runnable
//! [`Experiment`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use diana_core::optimizer::{init_states, nonconvex_lyapunov};
use diana_core::problems::{
    centered_quadratic_problem, logistic_problem, quadratic_problem, read_libsvm, rosenbrock_split,
    NoiseModel, Partition,
};
use diana_core::quantize::FloatWidth;
use diana_core::simnet::CostModel;
use diana_core::theory::{
    baseline_decreasing_theta, momentum, nonconvex, select_decreasing, standard_c, validate_params,
    Condition, MomentumVariant,
};
use diana_core::{
    lyapunov, BlockLayout, DianaConfig, Method, PNorm, Problem, ProblemConstants, Regularizer,
    RunOptions, Schedule,
};

use crate::Failure;

/// A parameter that is either given or derived from the problem constants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SettingRepr", into = "SettingRepr")]
pub enum Setting {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SettingRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<SettingRepr> for Setting {
    type Error = String;

    fn try_from(r: SettingRepr) -> Result<Self, String> {
        match r {
            SettingRepr::Number(v) => Ok(Setting::Value(v)),
            SettingRepr::Text(s) if s == "auto" => Ok(Setting::Auto),
            SettingRepr::Text(s) => Err(format!("expected a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<Setting> for SettingRepr {
    fn from(s: Setting) -> Self {
        match s {
            Setting::Auto => SettingRepr::Text("auto".into()),
            Setting::Value(v) => SettingRepr::Number(v),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub regularizer: Regularizer,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Random strongly convex quadratics with a shared minimizer offset.
    Quadratic {
        workers: usize,
        dim: usize,
        #[serde(default = "default_condition")]
        condition_number: f64,
        #[serde(default)]
        seed: u64,
        /// Gaussian gradient noise `E‖ε_i‖²` per worker.
        #[serde(default)]
        sigma2: f64,
    },
    /// As `quadratic`, with `x* = 0` and `h_i* = 0`.
    CenteredQuadratic {
        workers: usize,
        dim: usize,
        #[serde(default = "default_condition")]
        condition_number: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        sigma2: f64,
    },
    /// Two-worker split of the Rosenbrock function.
    Rosenbrock {
        #[serde(default)]
        sigma2: f64,
    },
    /// Logistic regression on a LIBSVM file.
    Logistic {
        path: PathBuf,
        workers: usize,
        #[serde(default)]
        lambda2: f64,
        #[serde(default)]
        partition: Partition,
        #[serde(default)]
        seed: u64,
        /// Mini-batch size; full local gradients when absent.
        #[serde(default)]
        batch: Option<usize>,
    },
}

fn default_condition() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    Decreasing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default)]
    pub kind: Method,
    #[serde(default = "default_p")]
    pub p: PNorm,
    /// Uniform blocks of this size; the last block takes the remainder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<usize>,
    /// Explicit block sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(default)]
    pub alpha: Setting,
    #[serde(default)]
    pub gamma: Setting,
    #[serde(default)]
    pub schedule: ScheduleKind,
    /// Offset of the decreasing schedule `γ^k = 2/(μk + θ)`.
    #[serde(default)]
    pub theta: Setting,
    #[serde(default)]
    pub beta: f64,
    /// `c` in the Lyapunov function and the admissibility checks.
    #[serde(default)]
    pub lyapunov_c: Setting,
    #[serde(default)]
    pub float_bits: FloatWidth,
    /// Run the workers of each round on the thread pool.
    #[serde(default)]
    pub parallel_workers: bool,
}

fn default_p() -> PNorm {
    PNorm::TWO
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec {
            kind: Method::Diana,
            p: default_p(),
            block_size: None,
            blocks: None,
            alpha: Setting::Auto,
            gamma: Setting::Auto,
            schedule: ScheduleKind::Constant,
            theta: Setting::Auto,
            beta: 0.0,
            lyapunov_c: Setting::Auto,
            float_bits: FloatWidth::F32,
            parallel_workers: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_every")]
    pub record_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Also count the broadcast of `x^k` in the bit totals.
    #[serde(default)]
    pub count_broadcast: bool,
    /// Write the per-message channel log of every seed.
    #[serde(default)]
    pub message_log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    /// Iterations at which the bound is reported.
    #[serde(default = "default_theory_k")]
    pub k: Vec<u64>,
    /// Initial Lyapunov value; computed from `x0` when the optimum is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodesSpec>,
}

impl Default for TheorySpec {
    fn default() -> Self {
        TheorySpec {
            k: default_theory_k(),
            v0: None,
            nodes: None,
        }
    }
}

fn default_theory_k() -> Vec<u64> {
    vec![0, 10, 100, 1000, 10000]
}

/// Dimension and block count for the optimal worker count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesSpec {
    pub d: u64,
    pub m: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<PNorm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Setting>>,
    /// Threshold for the iterations-to-target column.
    #[serde(default = "default_target")]
    pub target: f64,
}

fn default_target() -> f64 {
    1e-6
}

/// Config file contents plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir })
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
}

fn field(path: &str, msg: impl fmt::Display) -> Failure {
    Failure::Config(format!("{path}: {msg}"))
}

/// Outcome of one admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub condition: Condition,
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    /// All applicable conditions hold.
    pub validated: bool,
    pub checks: Vec<CheckResult>,
    /// Why no checks could be run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

impl Validation {
    pub fn failures(&self) -> Vec<String> {
        if let Some(reason) = &self.unavailable {
            return vec![format!("parameters cannot be validated: {reason}")];
        }
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match &c.detail {
                Some(d) => format!("{}: {d}", c.name),
                None => c.name.clone(),
            })
            .collect()
    }

    pub fn stamp(&self) -> &'static str {
        if self.validated {
            "validated"
        } else {
            "unvalidated"
        }
    }
}

/// A config with every automatic parameter filled in.
pub struct Experiment {
    pub input: ExperimentConfig,
    pub problem: Problem,
    pub reg: Regularizer,
    pub config: DianaConfig,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub options: RunOptions,
    pub alpha_p: f64,
    pub lyapunov_c: f64,
    /// Where each derived parameter came from.
    pub provenance: BTreeMap<String, String>,
    pub validation: Validation,
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub problem: String,
    pub workers: usize,
    pub dim: usize,
    pub constants: Option<ProblemConstants>,
    pub method: DianaConfig,
    pub alpha_p: f64,
    pub lyapunov_c: f64,
    pub regularizer: Regularizer,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub record_every: usize,
    pub x0: Vec<f64>,
    pub cost: CostModel,
}

impl Experiment {
    pub fn resolved(&self) -> Resolved {
        Resolved {
            problem: self.problem.name().to_string(),
            workers: self.problem.workers(),
            dim: self.problem.dim(),
            constants: self.problem.constants().copied(),
            method: self.config.clone(),
            alpha_p: self.alpha_p,
            lyapunov_c: self.lyapunov_c,
            regularizer: self.reg.clone(),
            iterations: self.iterations,
            seeds: self.seeds.clone(),
            record_every: self.options.record_every,
            x0: self.x0(),
            cost: self.options.cost,
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        self.options
            .x0
            .clone()
            .unwrap_or_else(|| vec![0.0; self.problem.dim()])
    }

    pub fn gamma0(&self) -> f64 {
        self.config.schedule.gamma(0)
    }

    /// `V⁰` at `x0` with zero memories.
    pub fn initial_lyapunov(&self) -> Option<f64> {
        let (s, w) = init_states(self.x0(), self.config.n, 0);
        lyapunov(&s, &w, &self.problem, self.lyapunov_c, self.gamma0()).ok()
    }

    /// `Λ⁰` at `x0` with zero memories.
    pub fn initial_lambda(&self) -> Option<f64> {
        let (s, w) = init_states(self.x0(), self.config.n, 0);
        nonconvex_lyapunov(&s, &w, &self.problem, self.lyapunov_c, self.gamma0()).ok()
    }
}

fn build_problem(spec: &ProblemSpec, base_dir: &Path) -> Result<Problem, Failure> {
    let noisy = |p: Problem, sigma2: f64| -> Result<Problem, Failure> {
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(field("problem.sigma2", "must be finite and >= 0"));
        }
        if sigma2 == 0.0 {
            return Ok(p);
        }
        p.with_gaussian_noise(sigma2)
            .map_err(|e| field("problem.sigma2", e))
    };
    match spec {
        ProblemSpec::Quadratic {
            workers,
            dim,
            condition_number,
            seed,
            sigma2,
        } => {
            let p = quadratic_problem(*workers, *dim, *condition_number, *seed)
                .map_err(|e| field("problem", e))?;
            noisy(p, *sigma2)
        }
        ProblemSpec::CenteredQuadratic {
            workers,
            dim,
            condition_number,
            seed,
            sigma2,
        } => {
            let p = centered_quadratic_problem(*workers, *dim, *condition_number, *seed)
                .map_err(|e| field("problem", e))?;
            noisy(p, *sigma2)
        }
        ProblemSpec::Rosenbrock { sigma2 } => noisy(rosenbrock_split(), *sigma2),
        ProblemSpec::Logistic {
            path,
            workers,
            lambda2,
            partition,
            seed,
            batch,
        } => {
            let path = base_dir.join(path);
            let data = read_libsvm(&path)
                .map_err(|e| field("problem.path", format!("{}: {e}", path.display())))?;
            let p = logistic_problem(data, *workers, *lambda2, *partition, *seed)
                .map_err(|e| field("problem", e))?;
            match batch {
                Some(b) => p
                    .with_noise(NoiseModel::MiniBatch { batch: *b })
                    .map_err(|e| field("problem.batch", e)),
                None => Ok(p),
            }
        }
    }
}

fn build_layout(method: &MethodSpec, dim: usize) -> Result<BlockLayout, Failure> {
    let layout = match (&method.block_size, &method.blocks) {
        (Some(_), Some(_)) => {
            return Err(field("method", "set at most one of block_size and blocks"))
        }
        (Some(b), None) => {
            BlockLayout::uniform(dim, *b).map_err(|e| field("method.block_size", e))?
        }
        (None, Some(sizes)) => {
            BlockLayout::new(sizes.clone()).map_err(|e| field("method.blocks", e))?
        }
        (None, None) => BlockLayout::single(dim).map_err(|e| field("problem", e))?,
    };
    if layout.total_dim() != dim {
        return Err(field(
            "method.blocks",
            format!(
                "sizes sum to {} but the problem has d = {dim}",
                layout.total_dim()
            ),
        ));
    }
    Ok(layout)
}

fn need_constants<'a>(
    c: Option<&'a ProblemConstants>,
    path: &str,
) -> Result<&'a ProblemConstants, Failure> {
    c.ok_or_else(|| {
        field(
            path,
            "auto selection needs known problem constants; give a value",
        )
    })
}

/// Smallest `c` meeting the memory contraction at `α ∈ (0, α_p)`. Equals
/// `4(1−α_p)/(nα_p²)` at `α = α_p/2`.
fn minimal_c(n: usize, alpha: f64, alpha_p: f64) -> f64 {
    if alpha_p >= 1.0 {
        return 0.0;
    }
    if alpha == alpha_p / 2.0 || alpha <= 0.0 || alpha >= alpha_p {
        return standard_c(n, alpha_p);
    }
    (1.0 - alpha_p) / (n as f64 * alpha * (alpha_p - alpha))
}

pub fn resolve(loaded: &Loaded, seed_offset: u64) -> Result<Experiment, Failure> {
    let cfg = &loaded.config;
    let m = &cfg.method;
    let problem = build_problem(&cfg.problem, &loaded.base_dir)?;
    let (n, dim) = (problem.workers(), problem.dim());
    let constants = problem.constants().copied();
    cfg.regularizer
        .validate(Some(dim))
        .map_err(|e| field("regularizer", e))?;

    if cfg.run.iterations == 0 {
        return Err(field("run.iterations", "must be >= 1"));
    }
    if cfg.run.seeds.is_empty() {
        return Err(field("run.seeds", "must not be empty"));
    }
    if let Some(x0) = &cfg.run.x0 {
        if x0.len() != dim {
            return Err(field(
                "run.x0",
                format!("has {} entries but the problem has d = {dim}", x0.len()),
            ));
        }
    }
    if !(0.0..1.0).contains(&m.beta) {
        return Err(field("method.beta", "must lie in [0, 1)"));
    }

    let layout = build_layout(m, dim)?;
    let alpha_p =
        diana_core::quantize::alpha_p(layout.max_block(), m.p).map_err(|e| field("method.p", e))?;
    let mut provenance = BTreeMap::new();
    let mut note = |k: &str, v: String| {
        provenance.insert(k.to_string(), v);
    };

    let alpha = match (m.kind, m.alpha) {
        (Method::Baseline, Setting::Auto) | (Method::Baseline, Setting::Value(0.0)) => {
            note("alpha", "fixed: 0 without memory".into());
            0.0
        }
        (Method::Baseline, Setting::Value(_)) => {
            return Err(field(
                "method.alpha",
                "the baseline has no memory; use 0 or \"auto\"",
            ))
        }
        (Method::Diana, Setting::Value(a)) => {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(field("method.alpha", "must be finite and >= 0"));
            }
            note("alpha", "config".into());
            a
        }
        (Method::Diana, Setting::Auto) => {
            note("alpha", "auto: α_p/2".into());
            alpha_p / 2.0
        }
    };

    let c = match m.lyapunov_c {
        Setting::Value(c) => {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(field("method.lyapunov_c", "must be finite and >= 0"));
            }
            note("lyapunov_c", "config".into());
            c
        }
        Setting::Auto if alpha == 0.0 => {
            note("lyapunov_c", "fixed: 0 without memory".into());
            0.0
        }
        Setting::Auto => {
            note(
                "lyapunov_c",
                "auto: smallest c with (1+ncα²)/(1+ncα) ≤ α_p".into(),
            );
            minimal_c(n, alpha, alpha_p)
        }
    };

    let schedule = match m.schedule {
        ScheduleKind::Constant => {
            if m.theta != Setting::Auto {
                return Err(field(
                    "method.theta",
                    "only used with schedule = \"decreasing\"",
                ));
            }
            let gamma = match m.gamma {
                Setting::Value(g) => {
                    note("gamma", "config".into());
                    g
                }
                Setting::Auto => {
                    let k = need_constants(constants.as_ref(), "method.gamma")?;
                    if m.beta > 0.0 {
                        return Err(field(
                            "method.gamma",
                            "no automatic choice with beta > 0; give a value",
                        ));
                    }
                    auto_gamma(k, alpha, c, alpha_p, cfg.run.iterations, &mut note)?
                }
            };
            Schedule::Constant { gamma }
        }
        ScheduleKind::Decreasing => {
            if m.gamma != Setting::Auto {
                return Err(field(
                    "method.gamma",
                    "not used with schedule = \"decreasing\"; set theta instead",
                ));
            }
            let k = need_constants(constants.as_ref(), "method.schedule")?;
            if !(k.mu > 0.0) {
                return Err(field("method.schedule", "decreasing stepsizes need mu > 0"));
            }
            let theta = match m.theta {
                Setting::Value(t) => {
                    note("theta", "config".into());
                    t
                }
                Setting::Auto if alpha == 0.0 => {
                    note("theta", "auto: (μ+L)(2+(n−2)α_p)/(2nα_p)".into());
                    baseline_decreasing_theta(k, alpha_p).map_err(|e| field("method.theta", e))?
                }
                Setting::Auto => {
                    note(
                        "theta",
                        "auto: (μ/α_p)·max{4, 2(κ+1)/n + (κ+1)(n−2)α_p/n}".into(),
                    );
                    select_decreasing(k, alpha_p)
                        .map_err(|e| field("method.theta", e))?
                        .theta
                }
            };
            Schedule::Decreasing { mu: k.mu, theta }
        }
    };

    let config = DianaConfig {
        method: m.kind,
        alpha,
        schedule,
        beta: m.beta,
        p: m.p,
        layout,
        n,
        float_width: m.float_bits,
        parallel: m.parallel_workers,
    };
    config.validate(&problem).map_err(|e| field("method", e))?;

    let validation = match &constants {
        None => Validation {
            validated: false,
            checks: Vec::new(),
            unavailable: Some("problem constants are unknown".into()),
        },
        Some(k) => check(k, &config, c, alpha_p, cfg.run.iterations as u64),
    };

    let seeds = cfg
        .run
        .seeds
        .iter()
        .map(|s| s.wrapping_add(seed_offset))
        .collect();
    let options = RunOptions {
        x0: cfg.run.x0.clone(),
        lyapunov_c: Some(c),
        record_every: cfg.run.record_every.max(1),
        cost: CostModel {
            float_bits: m.float_bits,
            count_broadcast: cfg.run.count_broadcast,
        },
        keep_log: cfg.run.message_log,
        parallel_seeds: false,
    };
    Ok(Experiment {
        input: cfg.clone(),
        problem,
        reg: cfg.regularizer.clone(),
        config,
        iterations: cfg.run.iterations,
        seeds,
        options,
        alpha_p,
        lyapunov_c: c,
        provenance,
        validation,
    })
}

fn auto_gamma(
    k: &ProblemConstants,
    alpha: f64,
    c: f64,
    alpha_p: f64,
    iterations: usize,
    note: &mut impl FnMut(&str, String),
) -> Result<f64, Failure> {
    let (l, mu, n) = (k.l, k.mu, k.n as f64);
    if alpha == 0.0 {
        if mu > 0.0 {
            note("gamma", "auto: 2nα_p/((μ+L)(2+(n−2)α_p))".into());
            return Ok(2.0 * n * alpha_p / ((mu + l) * (2.0 + (n - 2.0) * alpha_p)));
        }
        note("gamma", "auto: nα_p/(L((n−1)α_p+1))".into());
        return Ok(n * alpha_p / (l * ((n - 1.0) * alpha_p + 1.0)));
    }
    if mu > 0.0 {
        note("gamma", "auto: min{α/μ, 2/((μ+L)(1+cα))}".into());
        return Ok((alpha / mu).min(2.0 / ((mu + l) * (1.0 + c * alpha))));
    }
    note("gamma", "auto: nα_p/(L(4+(n−4)α_p)√K)".into());
    nonconvex(k, alpha_p, iterations as u64, 1.0)
        .map(|b| b.gamma)
        .map_err(|e| field("method.gamma", e))
}

/// Runs every condition of the analysis that applies to `config`.
pub fn check(
    k: &ProblemConstants,
    config: &DianaConfig,
    c: f64,
    alpha_p: f64,
    iterations: u64,
) -> Validation {
    let gamma = config.schedule.gamma(0);
    let alpha = config.alpha;
    let (conditions, violations) = if config.beta > 0.0 {
        let variant = if alpha > 0.0 {
            MomentumVariant::Diana { alpha }
        } else {
            MomentumVariant::Baseline
        };
        let mut conds = vec![Condition::MomentumStepsizeCap, Condition::MomentumCoupling];
        if alpha > 0.0 {
            conds.insert(0, Condition::MomentumMemory);
        }
        match momentum(
            k,
            alpha_p,
            variant,
            config.beta,
            gamma,
            iterations.max(1),
            1.0,
        ) {
            Ok(m) => (conds, m.violations),
            Err(e) => (
                vec![Condition::Domain],
                vec![diana_core::theory::Violation {
                    condition: Condition::Domain,
                    message: e.to_string(),
                }],
            ),
        }
    } else {
        let conds = match (alpha > 0.0, k.mu > 0.0) {
            (true, true) => vec![
                Condition::Domain,
                Condition::MemoryContraction,
                Condition::StepsizeCap,
            ],
            (true, false) => vec![
                Condition::Domain,
                Condition::MemoryContraction,
                Condition::NonconvexStepsizeCap,
            ],
            (false, true) => vec![Condition::Domain, Condition::BaselineStepsizeCap],
            (false, false) => vec![Condition::Domain, Condition::BaselineNonconvexStepsizeCap],
        };
        (conds, validate_params(k, alpha, c, gamma, alpha_p))
    };
    let checks: Vec<CheckResult> = conditions
        .into_iter()
        .map(|cond| {
            let failed = violations.iter().find(|v| v.condition == cond);
            CheckResult {
                condition: cond,
                name: cond.to_string(),
                passed: failed.is_none(),
                detail: failed.map(|v| v.message.clone()),
            }
        })
        .collect();
    Validation {
        validated: checks.iter().all(|c| c.passed),
        checks,
        unavailable: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "[problem]\nkind = \"quadratic\"\nworkers = 1\ndim = 3\n[run]\niterations = 10\n"
    }

    #[test]
    fn defaults() {
        let cfg = parse(minimal()).unwrap();
        assert_eq!(cfg.method.p, PNorm::TWO);
        assert_eq!(cfg.method.gamma, Setting::Auto);
        assert_eq!(cfg.run.seeds, vec![0]);
    }

    #[test]
    fn unknown_field_is_reported() {
        let err = parse("[problem]\nkind = \"quadratic\"\nworkers = 1\ndim = 3\n[run]\niterations = 1\ngama = 2\n")
            .unwrap_err();
        assert!(err.contains("gama"), "{err}");
        let err = parse("[problem]\nkind = \"quadratic\"\nworkers = 1\ndim = 3\nextra = 1\n[run]\niterations = 1\n")
            .unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn setting_rejects_other_text() {
        let err = parse(&format!("{}[method]\ngamma = \"fast\"\n", minimal())).unwrap_err();
        assert!(err.contains("auto"), "{err}");
        let cfg = parse(&format!("{}[method]\ngamma = 1\n", minimal())).unwrap();
        assert_eq!(cfg.method.gamma, Setting::Value(1.0));
    }

    #[test]
    fn minimal_c_matches_standard_at_half() {
        assert_eq!(minimal_c(4, 0.2, 0.4), standard_c(4, 0.4));
        let (n, a, ap) = (3usize, 0.1, 0.5);
        let c = minimal_c(n, a, ap);
        let ratio = (1.0 + n as f64 * c * a * a) / (1.0 + n as f64 * c * a);
        assert!((ratio - ap).abs() < 1e-12);
    }

    #[test]
    fn auto_parameters_validate() {
        let loaded = Loaded {
            config: parse(minimal()).unwrap(),
            base_dir: PathBuf::new(),
        };
        let exp = resolve(&loaded, 0).unwrap();
        assert!(exp.validation.validated, "{:?}", exp.validation);
        assert_eq!(exp.provenance["gamma"], "auto: min{α/μ, 2/((μ+L)(1+cα))}");
    }

    #[test]
    fn field_paths_in_errors() {
        let text = format!("{}[method]\nblock_size = 2\nblocks = [1, 2]\n", minimal());
        let loaded = Loaded {
            config: parse(&text).unwrap(),
            base_dir: PathBuf::new(),
        };
        let err = resolve(&loaded, 0).err().unwrap().to_string();
        assert!(err.starts_with("method:"), "{err}");
        let text = minimal().replace("iterations = 10", "iterations = 0");
        let loaded = Loaded {
            config: parse(&text).unwrap(),
            base_dir: PathBuf::new(),
        };
        assert!(resolve(&loaded, 0)
            .err()
            .unwrap()
            .to_string()
            .starts_with("run.iterations"));
    }
}
