use std::sync::Arc;

use super::{Components, Optimum, Problem, ProblemConstants};

/// Two-worker split of the Rosenbrock function `(x−1)² + 10(y−x²)²`:
///
/// `f₁ = (x+16)² + 10(y−x²)² + 16y`, `f₂ = (x−18)² + 10(y−x²)² − 16y`.
///
/// Their average is `(x−1)² + 10(y−x²)² + 289`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RosenbrockComponents;

const SHIFT: [f64; 2] = [16.0, -18.0];
const TILT: [f64; 2] = [16.0, -16.0];

impl Components for RosenbrockComponents {
    fn dim(&self) -> usize {
        2
    }

    fn workers(&self) -> usize {
        2
    }

    fn value(&self, worker: usize, x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let r = b - a * a;
        (a + SHIFT[worker]).powi(2) + 10.0 * r * r + TILT[worker] * b
    }

    fn gradient(&self, worker: usize, x: &[f64], out: &mut [f64]) {
        let (a, b) = (x[0], x[1]);
        let r = b - a * a;
        out[0] = 2.0 * (a + SHIFT[worker]) - 40.0 * a * r;
        out[1] = 20.0 * r + TILT[worker];
    }
}

/// Deterministic 2-worker nonconvex problem with `x* = (1, 1)`, `f* = 289`.
///
/// `L = 642` bounds the Hessian of each `f_i` on `[−2, 2]²` (Gershgorin);
/// the function is not globally smooth. `ζ² = 1412` holds everywhere since
/// `∇f_i − ∇f` is constant.
pub fn rosenbrock_split() -> Problem {
    let constants = ProblemConstants {
        l: 642.0,
        mu: 0.0,
        sigma2: 0.0,
        zeta2: Some(1412.0),
        n: 2,
    };
    let optimum = Optimum {
        x: vec![1.0, 1.0],
        f: 289.0,
        grads: vec![vec![34.0, 16.0], vec![-34.0, -16.0]],
    };
    Problem::new(
        "rosenbrock",
        Arc::new(RosenbrockComponents),
        Some(constants),
        Some(optimum),
    )
}
