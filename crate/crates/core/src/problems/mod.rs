//! Objectives split across workers, with stochastic gradient oracles.
//!
//! The global objective is `f(x) = (1/n) Σ_i f_i(x)`; worker `i` only ever
//! evaluates its own `f_i`.

mod libsvm;
mod logistic;
mod quadratic;
mod rosenbrock;

use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use libsvm::{parse_libsvm, read_libsvm, LibsvmData};
pub use logistic::{load_logistic, logistic_problem, LogisticComponents, Partition};
pub use quadratic::{centered_quadratic_problem, quadratic_problem, QuadraticComponents};
pub use rosenbrock::{rosenbrock_split, RosenbrockComponents};

/// Smoothness, convexity, noise and dissimilarity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Every `f_i` is `l`-smooth.
    pub l: f64,
    /// Every `f_i` is `mu`-strongly convex (0 if not known to be).
    pub mu: f64,
    /// `σ² = (1/n) Σ σ_i²`.
    pub sigma2: f64,
    /// Bound on `(1/n) Σ ‖∇f_i(x) − ∇f(x)‖²`, when one is known.
    pub zeta2: Option<f64>,
    pub n: usize,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.l >= self.mu && self.mu >= 0.0 && self.sigma2 >= 0.0) || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "inconsistent problem constants {self:?}"
            )));
        }
        if let Some(z) = self.zeta2 {
            if !(z >= 0.0) {
                return Err(Error::InvalidParameter("zeta2 must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// `L / μ`, when `μ > 0`.
    pub fn kappa(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| self.l / self.mu)
    }
}

/// Known minimizer of `f` (for `R ≡ 0`) and the local gradients there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// `h_i* = ∇f_i(x*)`.
    pub grads: Vec<Vec<f64>>,
}

/// How worker gradients are perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// Spherical Gaussian noise with `E‖ε_i‖² = sigma[i]²`.
    Gaussian { sigma: Vec<f64> },
    /// Mean gradient of `batch` samples drawn with replacement from the shard.
    MiniBatch { batch: usize },
}

/// Per-worker pieces of an objective.
pub trait Components: Send + Sync {
    fn dim(&self) -> usize;
    fn workers(&self) -> usize;
    fn value(&self, worker: usize, x: &[f64]) -> f64;
    fn gradient(&self, worker: usize, x: &[f64], out: &mut [f64]);

    /// Unbiased mini-batch gradient, for sample-based objectives.
    fn minibatch_gradient(
        &self,
        _worker: usize,
        _x: &[f64],
        _batch: usize,
        _rng: &mut dyn RngCore,
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::InvalidParameter(
            "objective does not support mini-batch sampling".into(),
        ))
    }
}

#[derive(Clone)]
pub struct Problem {
    name: String,
    components: Arc<dyn Components>,
    noise: NoiseModel,
    constants: Option<ProblemConstants>,
    optimum: Option<Optimum>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("workers", &self.workers())
            .field("noise", &self.noise)
            .field("constants", &self.constants)
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        components: Arc<dyn Components>,
        constants: Option<ProblemConstants>,
        optimum: Option<Optimum>,
    ) -> Self {
        Problem {
            name: name.into(),
            components,
            noise: NoiseModel::None,
            constants,
            optimum,
        }
    }

    /// Replaces the noise model. Gaussian noise updates `σ²`; mini-batch
    /// noise leaves it to [`estimate_sigma2`].
    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        match &noise {
            NoiseModel::None => {
                if let Some(c) = self.constants.as_mut() {
                    c.sigma2 = 0.0;
                }
            }
            NoiseModel::Gaussian { sigma } => {
                check_dim(self.workers(), sigma.len())?;
                if sigma.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
                }
                if let Some(c) = self.constants.as_mut() {
                    c.sigma2 = sigma.iter().map(|s| s * s).sum::<f64>() / sigma.len() as f64;
                }
            }
            NoiseModel::MiniBatch { batch } => {
                if *batch == 0 {
                    return Err(Error::InvalidParameter(
                        "mini-batch size must be >= 1".into(),
                    ));
                }
            }
        }
        self.noise = noise;
        Ok(self)
    }

    /// Same noise level `σ_i² = sigma2` on every worker.
    pub fn with_gaussian_noise(self, sigma2: f64) -> Result<Self> {
        let n = self.workers();
        self.with_noise(NoiseModel::Gaussian {
            sigma: vec![sigma2.max(0.0).sqrt(); n],
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn workers(&self) -> usize {
        self.components.workers()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn constants(&self) -> Option<&ProblemConstants> {
        self.constants.as_ref()
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn components(&self) -> &dyn Components {
        &*self.components
    }

    pub fn value_i(&self, worker: usize, x: &[f64]) -> f64 {
        self.components.value(worker, x)
    }

    /// `f(x) = (1/n) Σ f_i(x)`, summed in worker order.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.workers();
        (0..n).map(|i| self.components.value(i, x)).sum::<f64>() / n as f64
    }

    pub fn gradient_i(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        self.components.gradient(worker, x, out)
    }

    /// `∇f(x)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.workers();
        let mut total = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for i in 0..n {
            self.components.gradient(i, x, &mut g);
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
        total.iter_mut().for_each(|t| *t /= n as f64);
        total
    }

    /// One draw of the worker's stochastic gradient `g_i` at `x`.
    ///
    /// Gaussian noise takes one standard normal per coordinate, in order.
    pub fn stochastic_gradient(
        &self,
        worker: usize,
        x: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        match &self.noise {
            NoiseModel::None => {
                self.components.gradient(worker, x, out);
                Ok(())
            }
            NoiseModel::Gaussian { sigma } => {
                self.components.gradient(worker, x, out);
                let scale = sigma[worker] / (self.dim() as f64).sqrt();
                if scale > 0.0 {
                    for v in out.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *v += scale * z;
                    }
                }
                Ok(())
            }
            NoiseModel::MiniBatch { batch } => self
                .components
                .minibatch_gradient(worker, x, *batch, rng, out),
        }
    }
}

/// `max_x (1/n) Σ ‖∇f_i(x) − ∇f(x)‖²` over the sample points: an empirical
/// lower bound on `ζ²`.
pub fn estimate_zeta2(problem: &Problem, points: &[Vec<f64>]) -> f64 {
    let n = problem.workers();
    let mut g = vec![0.0; problem.dim()];
    points
        .iter()
        .map(|x| {
            let mean = problem.gradient(x);
            (0..n)
                .map(|i| {
                    problem.gradient_i(i, x, &mut g);
                    g.iter()
                        .zip(&mean)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / n as f64
        })
        .fold(0.0, f64::max)
}

/// Monte Carlo estimate of `(1/n) Σ_i E‖g_i − ∇f_i(x)‖²` at `x`.
pub fn estimate_sigma2(
    problem: &Problem,
    x: &[f64],
    draws: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let n = problem.workers();
    let d = problem.dim();
    let mut exact = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        problem.gradient_i(i, x, &mut exact);
        let mut acc = 0.0;
        for _ in 0..draws {
            problem.stochastic_gradient(i, x, rng, &mut g)?;
            acc += g
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        total += acc / draws as f64;
    }
    Ok(total / n as f64)
}
