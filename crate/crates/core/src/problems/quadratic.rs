use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{Components, Optimum, Problem, ProblemConstants};
use crate::error::{Error, Result};

/// `f_i(x) = ½ (x − b_i)ᵀ A_i (x − b_i)`.
#[derive(Debug, Clone)]
pub struct QuadraticComponents {
    a: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

impl QuadraticComponents {
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidParameter(
                "need one (A_i, b_i) pair per worker".into(),
            ));
        }
        let d = b[0].len();
        for (ai, bi) in a.iter().zip(&b) {
            if ai.nrows() != d || ai.ncols() != d || bi.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: ai.nrows().max(bi.len()),
                });
            }
        }
        Ok(QuadraticComponents { a, b })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.a
    }

    pub fn shifts(&self) -> &[DVector<f64>] {
        &self.b
    }

    /// Minimizer of the average, `(Σ A_i)⁻¹ Σ A_i b_i`.
    fn minimizer(&self) -> Result<DVector<f64>> {
        let d = self.b[0].len();
        let mut h = DMatrix::zeros(d, d);
        let mut r = DVector::zeros(d);
        for (ai, bi) in self.a.iter().zip(&self.b) {
            h += ai;
            r += ai * bi;
        }
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("sum of A_i is not positive definite".into()))?;
        Ok(chol.solve(&r))
    }

    /// Problem with `L = max_i λ_max(A_i)`, `μ = min_i λ_min(A_i)` and the
    /// exact optimum.
    pub fn into_problem(self, name: &str) -> Result<Problem> {
        let mut l = f64::NEG_INFINITY;
        let mut mu = f64::INFINITY;
        for ai in &self.a {
            let eig = ai.clone().symmetric_eigen().eigenvalues;
            l = l.max(eig.max());
            mu = mu.min(eig.min());
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(
                "A_i must be positive definite".into(),
            ));
        }
        let xs = self.minimizer()?;
        let x: Vec<f64> = xs.iter().copied().collect();
        let n = self.a.len();
        let mut grads = Vec::with_capacity(n);
        let mut g = vec![0.0; x.len()];
        for i in 0..n {
            self.gradient(i, &x, &mut g);
            grads.push(g.clone());
        }
        let f = (0..n).map(|i| self.value(i, &x)).sum::<f64>() / n as f64;
        let constants = ProblemConstants {
            l,
            mu,
            sigma2: 0.0,
            zeta2: None,
            n,
        };
        Ok(Problem::new(
            name,
            Arc::new(self),
            Some(constants),
            Some(Optimum { x, f, grads }),
        ))
    }
}

impl Components for QuadraticComponents {
    fn dim(&self) -> usize {
        self.b[0].len()
    }

    fn workers(&self) -> usize {
        self.a.len()
    }

    fn value(&self, worker: usize, x: &[f64]) -> f64 {
        let a = &self.a[worker];
        let b = &self.b[worker];
        let d = b.len();
        let mut total = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += a[(r, c)] * (x[c] - b[c]);
            }
            total += (x[r] - b[r]) * row;
        }
        0.5 * total
    }

    fn gradient(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        let a = &self.a[worker];
        let b = &self.b[worker];
        let d = b.len();
        for (r, o) in out.iter_mut().enumerate().take(d) {
            let mut s = 0.0;
            for c in 0..d {
                s += a[(r, c)] * (x[c] - b[c]);
            }
            *o = s;
        }
    }
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column signs so the factor is unique.
    let mut q = q;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn generate(
    n: usize,
    d: usize,
    condition_number: f64,
    seed: u64,
    shifted: bool,
) -> Result<Problem> {
    if n == 0 || d == 0 || !(condition_number >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quadratic needs n >= 1, d >= 1, condition number >= 1 (got {n}, {d}, {condition_number})"
        )));
    }
    let mu = 1.0;
    let l = condition_number;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(d, &mut rng);
    let spread = Uniform::new_inclusive(mu, l).expect("mu <= l");
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        // Shared eigenvectors; every worker has both extreme eigenvalues at
        // the same positions, so the extremes of the average are μ and L.
        let mut lambda: Vec<f64> = (0..d).map(|_| spread.sample(&mut rng)).collect();
        lambda[0] = mu;
        if d > 1 {
            lambda[d - 1] = l;
        }
        let diag = DMatrix::from_diagonal(&DVector::from_vec(lambda));
        let ai = &q * diag * q.transpose();
        a.push((&ai + ai.transpose()) * 0.5);
        let bi = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        b.push(if shifted { bi } else { DVector::zeros(d) });
    }
    QuadraticComponents::new(a, b)?.into_problem(if shifted {
        "quadratic"
    } else {
        "quadratic-centered"
    })
}

/// `n` strongly convex quadratics with spectra in `[1, condition_number]`
/// and Gaussian shifts `b_i`. Deterministic in `seed`.
pub fn quadratic_problem(n: usize, d: usize, condition_number: f64, seed: u64) -> Result<Problem> {
    generate(n, d, condition_number, seed, true)
}

/// As [`quadratic_problem`] with `b_i = 0`, so `x* = 0` and `∇f_i(x*) = 0`.
pub fn centered_quadratic_problem(
    n: usize,
    d: usize,
    condition_number: f64,
    seed: u64,
) -> Result<Problem> {
    generate(n, d, condition_number, seed, false)
}
