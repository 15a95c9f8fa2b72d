//! `α_p(d) = inf_{x≠0} ‖x‖₂² / (‖x‖₁ ‖x‖_p)`.
//!
//! Closed forms exist for `p ∈ {1, 2, ∞}`. Other powers use a projected
//! multi-start search over `{x : x_1 = 1, 0 ≤ x_j ≤ 1}`, which covers every
//! ratio value since the ratio is invariant to scaling, signs and
//! permutations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PNorm;
use crate::error::{Error, Result};
use crate::rng::unit_f64;

const SEARCH_MARGIN: f64 = 1e-6;
const DEFAULT_STARTS: usize = 256;
const DEFAULT_SEED: u64 = 0x5eed_a1fa;

/// `‖x‖₂² / (‖x‖₁ ‖x‖_p)`; `NaN` for the zero vector.
pub fn quantization_ratio(x: &[f64], p: PNorm) -> f64 {
    let s2: f64 = x.iter().map(|v| v * v).sum();
    s2 / (PNorm::ONE.norm(x) * p.norm(x))
}

/// Lower estimate of `α_p(d)`: exact for `p ∈ {1, 2, ∞}`, otherwise the
/// best search value minus `1e-6`, kept inside the interval given by the
/// neighbouring closed forms.
pub fn alpha_p(d: usize, p: PNorm) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("alpha_p needs d >= 1".into()));
    }
    let df = d as f64;
    match p {
        PNorm::Finite(v) if v < 1.0 || v.is_nan() => Err(Error::InvalidNorm(v)),
        _ if d == 1 => Ok(1.0),
        PNorm::Infinity => Ok(2.0 / (1.0 + df.sqrt())),
        PNorm::Finite(v) if v == 1.0 => Ok(1.0 / df),
        PNorm::Finite(v) if v == 2.0 => Ok(1.0 / df.sqrt()),
        PNorm::Finite(v) => {
            let (lo, hi) = if v < 2.0 {
                (1.0 / df, 1.0 / df.sqrt())
            } else {
                (1.0 / df.sqrt(), 2.0 / (1.0 + df.sqrt()))
            };
            let best = alpha_p_search(d, p, DEFAULT_STARTS, DEFAULT_SEED);
            Ok((best - SEARCH_MARGIN).min(hi).max(lo))
        }
    }
}

/// Best ratio found by `starts` random starts plus a structured family of
/// starts `(1, a, …, a, 0, …, 0)`, each refined by projected gradient
/// descent. Returns the raw value, without safety margin.
pub fn alpha_p_search(d: usize, p: PNorm, starts: usize, seed: u64) -> f64 {
    if d <= 1 {
        return 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut work = Workspace::new(d);
    let mut best = f64::INFINITY;

    for k in 1..d {
        for step in 0..=20 {
            let a = step as f64 / 20.0;
            x[0] = 1.0;
            for (j, v) in x.iter_mut().enumerate().skip(1) {
                *v = if j <= k { a } else { 0.0 };
            }
            best = best.min(local_min(&mut x, p, &mut work));
        }
    }
    for _ in 0..starts {
        x[0] = 1.0;
        for v in x.iter_mut().skip(1) {
            *v = unit_f64(&mut rng);
        }
        best = best.min(local_min(&mut x, p, &mut work));
    }
    best
}

struct Workspace {
    grad: Vec<f64>,
    trial: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Workspace {
            grad: vec![0.0; d],
            trial: vec![0.0; d],
        }
    }
}

fn ratio_on_box(x: &[f64], p: PNorm) -> f64 {
    // x_1 = 1 is the largest entry, so ‖x‖_∞ = 1.
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let np = match p {
        PNorm::Infinity => 1.0,
        PNorm::Finite(v) if v == 1.0 => s1,
        PNorm::Finite(v) if v == 2.0 => s2.sqrt(),
        PNorm::Finite(v) => x.iter().map(|t| t.powf(v)).sum::<f64>().powf(1.0 / v),
    };
    s2 / (s1 * np)
}

fn gradient_on_box(x: &[f64], p: PNorm, grad: &mut [f64]) -> f64 {
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    // d‖x‖_p/dx_j for x ≥ 0 with x_1 = 1 held at the maximum.
    let (np, power) = match p {
        PNorm::Infinity => (1.0, None),
        PNorm::Finite(v) if v == 1.0 => (s1, Some(1.0)),
        PNorm::Finite(v) if v == 2.0 => (s2.sqrt(), Some(2.0)),
        PNorm::Finite(v) => (
            x.iter().map(|t| t.powf(v)).sum::<f64>().powf(1.0 / v),
            Some(v),
        ),
    };
    let f = s2 / (s1 * np);
    grad[0] = 0.0;
    for j in 1..x.len() {
        let dnp = match power {
            None => 0.0,
            Some(v) if v == 1.0 => 1.0,
            Some(v) if v == 2.0 => x[j] / np,
            Some(v) => (x[j] / np).powf(v - 1.0),
        };
        grad[j] = 2.0 * x[j] / (s1 * np) - f / s1 - f * dnp / np;
    }
    f
}

fn local_min(x: &mut [f64], p: PNorm, work: &mut Workspace) -> f64 {
    let mut step = 0.5;
    let mut f = gradient_on_box(x, p, &mut work.grad);
    for _ in 0..400 {
        let mut accepted = false;
        while step > 1e-12 {
            let mut decrease = 0.0;
            work.trial[0] = 1.0;
            for j in 1..x.len() {
                let t = (x[j] - step * work.grad[j]).clamp(0.0, 1.0);
                decrease += work.grad[j] * (x[j] - t);
                work.trial[j] = t;
            }
            if decrease <= 0.0 {
                // Projected gradient vanished: stationary on the box.
                return f;
            }
            let ft = ratio_on_box(&work.trial, p);
            if ft <= f - 1e-4 * decrease {
                let improvement = f - ft;
                x.copy_from_slice(&work.trial);
                f = gradient_on_box(x, p, &mut work.grad);
                step *= 2.0;
                accepted = true;
                if improvement < 1e-15 {
                    return f;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    f
}
