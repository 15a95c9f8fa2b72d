//! Fixtures shared by the benchmarks.

use diana_core::problems::quadratic_problem;
use diana_core::quantize::alpha_p;
use diana_core::theory::select_strongly_convex;
use diana_core::{BlockLayout, DianaConfig, PNorm, Problem};

/// Deterministic dense vector with no zero entries.
pub fn dense_vector(d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| ((j as f64 + 1.0) * 0.618).sin() + 1e-3)
        .collect()
}

/// Quadratic problem with `n` workers in dimension `d` and DIANA tuned to it.
pub fn quadratic_setup(n: usize, d: usize, block: usize, p: PNorm) -> (Problem, DianaConfig) {
    let problem = quadratic_problem(n, d, 10.0, 1).expect("problem");
    let layout = BlockLayout::uniform(d, block).expect("layout");
    let ap = alpha_p(layout.max_block(), p).expect("alpha_p");
    let s =
        select_strongly_convex(problem.constants().expect("constants"), ap).expect("parameters");
    let mut cfg = DianaConfig::new(n, d, p, s.alpha, s.gamma).expect("config");
    cfg.layout = layout;
    (problem, cfg)
}
