use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_libsvm, Components, LibsvmData, Problem, ProblemConstants};
use crate::error::{Error, Result};
use crate::prox::Regularizer;

/// How rows are assigned to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// Shuffle with the seed, then deal rows round-robin.
    #[default]
    ShuffledRoundRobin,
    /// Sort by label and cut into contiguous shards (high dissimilarity).
    SortedByLabel,
}

/// `f_i(x) = (1/|S_i|) Σ_{r∈S_i} log(1 + exp(−y_r a_rᵀx)) + (λ₂/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogisticComponents {
    data: Arc<LibsvmData>,
    shards: Vec<Vec<usize>>,
    lambda2: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticComponents {
    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    fn margin(&self, r: usize, x: &[f64]) -> f64 {
        self.data.labels[r]
            * self.data.rows[r]
                .iter()
                .map(|&(j, v)| v * x[j])
                .sum::<f64>()
    }

    fn add_row_gradient(&self, r: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let coef = -self.data.labels[r] * sigmoid(-self.margin(r, x)) * weight;
        for &(j, v) in &self.data.rows[r] {
            out[j] += coef * v;
        }
    }
}

impl Components for LogisticComponents {
    fn dim(&self) -> usize {
        self.data.dim
    }

    fn workers(&self) -> usize {
        self.shards.len()
    }

    fn value(&self, worker: usize, x: &[f64]) -> f64 {
        let shard = &self.shards[worker];
        let loss: f64 = shard
            .iter()
            .map(|&r| softplus(-self.margin(r, x)))
            .sum::<f64>()
            / shard.len() as f64;
        loss + 0.5 * self.lambda2 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        let shard = &self.shards[worker];
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda2 * xi;
        }
        let w = 1.0 / shard.len() as f64;
        for &r in shard {
            self.add_row_gradient(r, x, w, out);
        }
    }

    fn minibatch_gradient(
        &self,
        worker: usize,
        x: &[f64],
        batch: usize,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        let shard = &self.shards[worker];
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda2 * xi;
        }
        let w = 1.0 / batch as f64;
        for _ in 0..batch {
            let r = shard[rng.random_range(0..shard.len())];
            self.add_row_gradient(r, x, w, out);
        }
        Ok(())
    }
}

/// Logistic regression with `ℓ₂` weight `lambda2`, sharded over
/// `n_workers`. `L = max_r ‖a_r‖² / 4 + λ₂` and `μ = λ₂`.
pub fn logistic_problem(
    data: LibsvmData,
    n_workers: usize,
    lambda2: f64,
    partition: Partition,
    partition_seed: u64,
) -> Result<Problem> {
    if n_workers == 0 {
        return Err(Error::InvalidParameter("n_workers must be >= 1".into()));
    }
    if !(lambda2 >= 0.0) {
        return Err(Error::InvalidParameter("lambda2 must be >= 0".into()));
    }
    if data.is_empty() || data.len() < n_workers {
        return Err(Error::InvalidParameter(format!(
            "{} rows cannot fill {n_workers} non-empty shards",
            data.len()
        )));
    }
    if data.dim == 0 {
        return Err(Error::InvalidParameter("dataset has no features".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let shards = match partition {
        Partition::ShuffledRoundRobin => {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(partition_seed));
            let mut shards = vec![Vec::new(); n_workers];
            for (pos, r) in order.into_iter().enumerate() {
                shards[pos % n_workers].push(r);
            }
            shards
        }
        Partition::SortedByLabel => {
            order.sort_by(|&a, &b| data.labels[a].partial_cmp(&data.labels[b]).unwrap());
            let per = data.len() / n_workers;
            let extra = data.len() % n_workers;
            let mut shards = Vec::with_capacity(n_workers);
            let mut start = 0;
            for i in 0..n_workers {
                let len = per + usize::from(i < extra);
                shards.push(order[start..start + len].to_vec());
                start += len;
            }
            shards
        }
    };
    let max_norm2 = (0..data.len())
        .map(|r| data.row_norm2(r))
        .fold(0.0, f64::max);
    let constants = ProblemConstants {
        l: max_norm2 / 4.0 + lambda2,
        mu: lambda2,
        sigma2: 0.0,
        zeta2: None,
        n: n_workers,
    };
    let comps = LogisticComponents {
        data: Arc::new(data),
        shards,
        lambda2,
    };
    Ok(Problem::new(
        "logistic",
        Arc::new(comps),
        Some(constants),
        None,
    ))
}

/// Reads a LIBSVM file and returns the smooth part together with the
/// `ℓ₁` regularizer carrying `lambda1`.
pub fn load_logistic(
    path: impl AsRef<Path>,
    n_workers: usize,
    lambda1: f64,
    lambda2: f64,
    partition_seed: u64,
) -> Result<(Problem, Regularizer)> {
    let data = read_libsvm(path)?;
    let problem = logistic_problem(
        data,
        n_workers,
        lambda2,
        Partition::ShuffledRoundRobin,
        partition_seed,
    )?;
    let reg = if lambda1 > 0.0 {
        Regularizer::L1 { lambda1 }
    } else {
        Regularizer::Zero
    };
    reg.validate(None)?;
    Ok((problem, reg))
}
