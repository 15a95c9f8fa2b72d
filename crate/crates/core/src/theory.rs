//! Closed-form parameter choices and convergence bounds.
//!
//! Every calculator is a pure function of [`ProblemConstants`] and `α_p`.
//! Geometric factors `(1 − γμ)^k` are evaluated as `exp(k · ln(1 − γμ))`
//! so that reference curves stay accurate for large `k`.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ProblemConstants;
use crate::quantize::PNorm;

/// Relative slack allowed when checking conditions that the emitted
/// parameters satisfy with equality.
pub const CONDITION_SLACK: f64 = 1e-12;

fn require_alpha_p(alpha_p: f64) -> Result<()> {
    if !(alpha_p > 0.0 && alpha_p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha_p = {alpha_p} must lie in (0, 1]"
        )));
    }
    Ok(())
}

fn require_strongly_convex(constants: &ProblemConstants) -> Result<f64> {
    constants.validate()?;
    constants
        .kappa()
        .ok_or_else(|| Error::InvalidParameter("strong convexity constant mu must be > 0".into()))
}

/// `(1 − x)^k` for `x ∈ [0, 1]`.
pub fn geometric(x: f64, k: u64) -> f64 {
    if x >= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * (-x).ln_1p()).exp()
}

/// `α = α_p / 2`.
pub fn standard_alpha(alpha_p: f64) -> f64 {
    alpha_p / 2.0
}

/// `c = 4(1 − α_p) / (n α_p²)`.
pub fn standard_c(n: usize, alpha_p: f64) -> f64 {
    4.0 * (1.0 - alpha_p) / (n as f64 * alpha_p * alpha_p)
}

/// `max{2/α_p, (κ+1)(1/2 − 1/n + 1/(nα_p))}`, generic so that it can be
/// evaluated in exact arithmetic.
pub fn leading_term<T>(n: T, kappa: T, alpha_p: T) -> T
where
    T: Clone
        + One
        + PartialOrd
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Div<Output = T>,
{
    let one = T::one();
    let two = one.clone() + one.clone();
    let memory = two.clone() / alpha_p.clone();
    let smooth =
        (kappa + one.clone()) * (one.clone() / two - one.clone() / n.clone() + one / (n * alpha_p));
    if memory >= smooth {
        memory
    } else {
        smooth
    }
}

/// `α_p(block)` as an exact rational, when it is one: always for `p = 1`,
/// and for `p ∈ {2, ∞}` when `block` is a perfect square.
pub fn exact_alpha_p(block: u64, p: PNorm) -> Option<Ratio<i64>> {
    if block == 0 {
        return None;
    }
    let d = block as i64;
    let root = (1..=d)
        .take_while(|r| r * r <= d)
        .last()
        .filter(|r| r * r == d);
    if p == PNorm::ONE {
        Some(Ratio::new(1, d))
    } else if p == PNorm::TWO {
        root.map(|r| Ratio::new(1, r))
    } else if p == PNorm::INF {
        root.map(|r| Ratio::new(2, 1 + r))
    } else if d == 1 {
        Some(Ratio::one())
    } else {
        None
    }
}

/// Parameters for a constant stepsize on a strongly convex problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StronglyConvex {
    pub alpha_p: f64,
    pub alpha: f64,
    pub c: f64,
    pub gamma: f64,
    /// `α / μ`.
    pub gamma_memory: f64,
    /// `2 / ((L + μ)(1 + cα))`.
    pub gamma_smoothness: f64,
    /// `1/(γμ)`, the iteration complexity up to a log factor.
    pub leading_term: f64,
}

/// `α = α_p/2`, `c = 4(1−α_p)/(nα_p²)`, `γ = min{α/μ, 2/((L+μ)(1+cα))}`.
pub fn select_strongly_convex(
    constants: &ProblemConstants,
    alpha_p: f64,
) -> Result<StronglyConvex> {
    let kappa = require_strongly_convex(constants)?;
    require_alpha_p(alpha_p)?;
    let (l, mu, n) = (constants.l, constants.mu, constants.n);
    let alpha = standard_alpha(alpha_p);
    let c = standard_c(n, alpha_p);
    let gamma_memory = alpha / mu;
    let gamma_smoothness = 2.0 / ((l + mu) * (1.0 + c * alpha));
    Ok(StronglyConvex {
        alpha_p,
        alpha,
        c,
        gamma: gamma_memory.min(gamma_smoothness),
        gamma_memory,
        gamma_smoothness,
        leading_term: leading_term(n as f64, kappa, alpha_p),
    })
}

/// `(γ/μ)(1 + ncα)σ²/n`, the radius of the noise neighborhood.
pub fn neighborhood(constants: &ProblemConstants, params: &StronglyConvex) -> f64 {
    let n = constants.n as f64;
    params.gamma / constants.mu * (1.0 + n * params.c * params.alpha) * constants.sigma2 / n
}

/// `(1 − γμ)^k V⁰ + (γ/μ)(1 + ncα)σ²/n`.
pub fn strongly_convex_bound(
    constants: &ProblemConstants,
    params: &StronglyConvex,
    v0: f64,
    k: u64,
) -> Result<f64> {
    require_strongly_convex(constants)?;
    let violations = validate_params(
        constants,
        params.alpha,
        params.c,
        params.gamma,
        params.alpha_p,
    );
    if !violations.is_empty() {
        return Err(Error::InvalidParameter(describe(&violations)));
    }
    Ok(geometric(params.gamma * constants.mu, k) * v0 + neighborhood(constants, params))
}

/// A named admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Parameters must be finite, `γ > 0`, `α ≥ 0`, `c ≥ 0`.
    Domain,
    /// `(1 + ncα²)/(1 + ncα) ≤ α_p`.
    MemoryContraction,
    /// `γ ≤ min{α/μ, 2/((μ+L)(1+cα))}`.
    StepsizeCap,
    /// `γ ≤ 2/(L(1 + 2cα))`, the nonconvex counterpart when `μ = 0`.
    NonconvexStepsizeCap,
    /// `γ ≤ 2nα_p/((μ+L)(2+(n−2)α_p))`, for `α = 0` without memory.
    BaselineStepsizeCap,
    /// `γ ≤ nα_p/(L((n−1)α_p+1))`, for `α = 0` without memory, `μ = 0`.
    BaselineNonconvexStepsizeCap,
    /// `α < α_p` and `β < 1 − α` in the momentum analysis.
    MomentumMemory,
    /// `γ < (1−β²)/(2L(2ω−1))` (or `(1−β²)/(2Lω)` without memory).
    MomentumStepsizeCap,
    /// The coupling inequality between `β` and `γ`.
    MomentumCoupling,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Domain => "parameter domain",
            Condition::MemoryContraction => "memory contraction (1+ncα²)/(1+ncα) ≤ α_p",
            Condition::StepsizeCap => "stepsize cap γ ≤ min{α/μ, 2/((μ+L)(1+cα))}",
            Condition::NonconvexStepsizeCap => "nonconvex stepsize cap γ ≤ 2/(L(1+2cα))",
            Condition::BaselineStepsizeCap => {
                "memoryless stepsize cap γ ≤ 2nα_p/((μ+L)(2+(n−2)α_p))"
            }
            Condition::BaselineNonconvexStepsizeCap => {
                "memoryless nonconvex stepsize cap γ ≤ nα_p/(L((n−1)α_p+1))"
            }
            Condition::MomentumMemory => "momentum memory 0 ≤ α < α_p, β < 1−α",
            Condition::MomentumStepsizeCap => "momentum stepsize cap",
            Condition::MomentumCoupling => "momentum coupling between β and γ",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.message)
    }
}

fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn exceeds(value: f64, cap: f64) -> bool {
    value > cap * (1.0 + CONDITION_SLACK)
}

/// Checks `(α, c, γ)` against the conditions of the applicable analysis.
///
/// With `α > 0`: memory contraction and the stepsize cap (the nonconvex cap
/// when `μ = 0`). With `α = 0` the method has no memory and the memoryless
/// caps apply instead. Conditions that hold with equality pass within a
/// relative slack of [`CONDITION_SLACK`].
pub fn validate_params(
    constants: &ProblemConstants,
    alpha: f64,
    c: f64,
    gamma: f64,
    alpha_p: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let finite = [alpha, c, gamma, alpha_p, constants.l, constants.mu]
        .iter()
        .all(|v| v.is_finite());
    if !finite
        || !(gamma > 0.0)
        || !(alpha >= 0.0)
        || !(c >= 0.0)
        || !(alpha_p > 0.0 && alpha_p <= 1.0)
        || constants.n == 0
    {
        out.push(Violation {
            condition: Condition::Domain,
            message: format!("need finite γ > 0, α ≥ 0, c ≥ 0, α_p ∈ (0,1]; got γ={gamma}, α={alpha}, c={c}, α_p={alpha_p}"),
        });
        return out;
    }
    let (l, mu, n) = (constants.l, constants.mu, constants.n as f64);
    if alpha == 0.0 {
        if mu > 0.0 {
            let cap = 2.0 * n * alpha_p / ((mu + l) * (2.0 + (n - 2.0) * alpha_p));
            if exceeds(gamma, cap) {
                out.push(Violation {
                    condition: Condition::BaselineStepsizeCap,
                    message: format!("γ = {gamma} > {cap}"),
                });
            }
        } else {
            let cap = n * alpha_p / (l * ((n - 1.0) * alpha_p + 1.0));
            if exceeds(gamma, cap) {
                out.push(Violation {
                    condition: Condition::BaselineNonconvexStepsizeCap,
                    message: format!("γ = {gamma} > {cap}"),
                });
            }
        }
        return out;
    }
    let ratio = (1.0 + n * c * alpha * alpha) / (1.0 + n * c * alpha);
    if exceeds(ratio, alpha_p) {
        out.push(Violation {
            condition: Condition::MemoryContraction,
            message: format!("(1+ncα²)/(1+ncα) = {ratio} > α_p = {alpha_p}"),
        });
    }
    if mu > 0.0 {
        let cap = (alpha / mu).min(2.0 / ((mu + l) * (1.0 + c * alpha)));
        if exceeds(gamma, cap) {
            out.push(Violation {
                condition: Condition::StepsizeCap,
                message: format!("γ = {gamma} > {cap}"),
            });
        }
    } else {
        let cap = 2.0 / (l * (1.0 + 2.0 * c * alpha));
        if exceeds(gamma, cap) {
            out.push(Violation {
                condition: Condition::NonconvexStepsizeCap,
                message: format!("γ = {gamma} > {cap}"),
            });
        }
    }
    out
}

/// Which term of `max{1, κ/n, κα_p}` is largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `θ = Θ(μ/α_p)`.
    Memory,
    /// `θ = Θ(L/(nα_p))`.
    Workers,
    /// `θ = Θ(L)`.
    Smoothness,
}

/// Decreasing stepsize `γ^k = 2/(μk + θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decreasing {
    pub alpha_p: f64,
    pub alpha: f64,
    pub c: f64,
    pub mu: f64,
    pub theta: f64,
    /// `η = μ/θ`.
    pub eta: f64,
    /// `[1, κ/n, κα_p]`.
    pub regime_values: [f64; 3],
    pub regime: Regime,
    /// `(1 + ncα)σ²/n`, the per-step noise constant.
    pub noise: f64,
}

impl Decreasing {
    pub fn gamma(&self, k: u64) -> f64 {
        2.0 / (self.mu * k as f64 + self.theta)
    }

    /// `C = max{V⁰, 4(1+ncα)σ²/(nθμ)}`.
    pub fn bound_constant(&self, v0: f64) -> f64 {
        v0.max(4.0 * self.noise / (self.theta * self.mu))
    }

    /// `C / (ηk + 1)`.
    pub fn bound(&self, v0: f64, k: u64) -> f64 {
        self.bound_constant(v0) / (self.eta * k as f64 + 1.0)
    }
}

/// `θ = (μ/α_p) max{4, 2(κ+1)/n + (κ+1)(n−2)α_p/n}` with the constant-step
/// choices of `α` and `c`.
pub fn select_decreasing(constants: &ProblemConstants, alpha_p: f64) -> Result<Decreasing> {
    let kappa = require_strongly_convex(constants)?;
    require_alpha_p(alpha_p)?;
    let (mu, n) = (constants.mu, constants.n as f64);
    let alpha = standard_alpha(alpha_p);
    let c = standard_c(constants.n, alpha_p);
    let theta = mu / alpha_p
        * (4.0f64).max(2.0 * (kappa + 1.0) / n + (kappa + 1.0) * (n - 2.0) * alpha_p / n);
    let regime_values = [1.0, kappa / n, kappa * alpha_p];
    let mut regime = Regime::Memory;
    if regime_values[1] > regime_values[0] && regime_values[1] >= regime_values[2] {
        regime = Regime::Workers;
    } else if regime_values[2] > regime_values[0] && regime_values[2] > regime_values[1] {
        regime = Regime::Smoothness;
    }
    Ok(Decreasing {
        alpha_p,
        alpha,
        c,
        mu,
        theta,
        eta: mu / theta,
        regime_values,
        regime,
        noise: (1.0 + n * c * alpha) * constants.sigma2 / n,
    })
}

/// Stepsize and bound terms for `K` iterations on a nonconvex problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonconvex {
    pub alpha: f64,
    pub c: f64,
    /// `nα_p / (L(4 + (n−4)α_p)√K)`.
    pub gamma: f64,
    /// Initial-gap, noise and dissimilarity terms.
    pub terms: [f64; 3],
    pub total: f64,
}

/// Parameters and three-term bound on `E‖∇f(x̄^K)‖²` with `α = α_p/2`,
/// `c = 4(1−α_p)/(nα_p²)` and `Λ⁰ = f(x⁰) − f* + c(Lγ²/2)(1/n)Σ‖h_i⁰ − h_i*‖²`.
pub fn nonconvex(
    constants: &ProblemConstants,
    alpha_p: f64,
    iterations: u64,
    lambda0: f64,
) -> Result<Nonconvex> {
    constants.validate()?;
    require_alpha_p(alpha_p)?;
    if iterations == 0 {
        return Err(Error::InvalidParameter("K must be >= 1".into()));
    }
    let zeta2 = constants
        .zeta2
        .ok_or_else(|| Error::InvalidParameter("dissimilarity bound zeta2 is required".into()))?;
    let (l, n) = (constants.l, constants.n as f64);
    let sk = (iterations as f64).sqrt();
    let denom = 4.0 + (n - 4.0) * alpha_p;
    let terms = [
        2.0 / sk * l * denom / (n * alpha_p) * lambda0,
        (4.0 - 3.0 * alpha_p) * constants.sigma2 / (denom * sk),
        8.0 * (1.0 - alpha_p) * zeta2 / (denom * sk),
    ];
    Ok(Nonconvex {
        alpha: standard_alpha(alpha_p),
        c: standard_c(constants.n, alpha_p),
        gamma: n * alpha_p / (l * denom * sk),
        terms,
        total: terms.iter().sum(),
    })
}

pub fn nonconvex_bound(
    constants: &ProblemConstants,
    alpha_p: f64,
    iterations: u64,
    lambda0: f64,
) -> Result<f64> {
    nonconvex(constants, alpha_p, iterations, lambda0).map(|b| b.total)
}

/// Memory handling assumed by the momentum analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentumVariant {
    /// Memory rate `alpha ∈ [0, α_p)`.
    Diana { alpha: f64 },
    /// No memory: `α = 0`, `h_i ≡ 0`.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    /// `ω = (n−1)/n + 1/(nα_p)`.
    pub omega: f64,
    /// `δ = 1 + (2/n)(1/α_p − 1)(1 + α/(1−α−β))`, only with memory.
    pub delta: Option<f64>,
    pub violations: Vec<Violation>,
    /// Initial-gap, noise, momentum-noise and dissimilarity terms.
    pub terms: [f64; 4],
    pub total: f64,
}

/// `ω = (n−1)/n + 1/(nα_p)`.
pub fn momentum_omega(n: usize, alpha_p: f64) -> f64 {
    let n = n as f64;
    (n - 1.0) / n + 1.0 / (n * alpha_p)
}

/// Terms and admissibility of the momentum bound on `E‖∇f(x̄^k)‖²`.
/// `gap0 = f(z⁰) − f*`; with `v^{−1} = 0`, `z⁰ = x⁰`.
pub fn momentum(
    constants: &ProblemConstants,
    alpha_p: f64,
    variant: MomentumVariant,
    beta: f64,
    gamma: f64,
    k: u64,
    gap0: f64,
) -> Result<Momentum> {
    constants.validate()?;
    require_alpha_p(alpha_p)?;
    if k == 0 || !(gamma > 0.0) || !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "need k ≥ 1, γ > 0, β ∈ [0,1); got k={k}, γ={gamma}, β={beta}"
        )));
    }
    let zeta2 = constants.zeta2.unwrap_or(0.0);
    let (l, n, s2) = (constants.l, constants.n as f64, constants.sigma2);
    let omega = momentum_omega(constants.n, alpha_p);
    let ob = 1.0 - beta;
    let mut violations = Vec::new();
    let lead = 4.0 * gap0 / (gamma * k as f64);
    let (delta, terms) = match variant {
        MomentumVariant::Diana { alpha } => {
            if !(alpha >= 0.0 && alpha < alpha_p && beta < 1.0 - alpha) {
                violations.push(Violation {
                    condition: Condition::MomentumMemory,
                    message: format!("α = {alpha}, β = {beta}, α_p = {alpha_p}"),
                });
            }
            let cap = (1.0 - beta * beta) / (2.0 * l * (2.0 * omega - 1.0));
            if !(gamma < cap) {
                violations.push(Violation {
                    condition: Condition::MomentumStepsizeCap,
                    message: format!("γ = {gamma} ≥ (1−β²)/(2L(2ω−1)) = {cap}"),
                });
            }
            let delta =
                1.0 + 2.0 / n * (1.0 / alpha_p - 1.0) * (1.0 + alpha / (1.0 - alpha - beta));
            let lhs = beta * beta / (ob * ob * alpha);
            let rhs = (1.0 - beta * beta - 2.0 * l * gamma * (2.0 * omega - 1.0))
                / (gamma * gamma * l * l * delta);
            if beta > 0.0 && !(lhs <= rhs) {
                violations.push(Violation {
                    condition: Condition::MomentumCoupling,
                    message: format!("β²/((1−β)²α) = {lhs} > {rhs}"),
                });
            }
            let q = 3.0 / alpha_p - 2.0;
            let terms = [
                lead,
                2.0 * gamma * l * s2 / (ob * ob * n) * q,
                2.0 * gamma * gamma * l * l * beta * beta * s2 / (ob.powi(5) * n) * q,
                3.0 * gamma * gamma * l * l * beta * beta * zeta2 / (ob.powi(5) * n)
                    * (1.0 / alpha_p - 1.0),
            ];
            (Some(delta), terms)
        }
        MomentumVariant::Baseline => {
            let cap = (1.0 - beta * beta) / (2.0 * l * omega);
            if !(gamma < cap) {
                violations.push(Violation {
                    condition: Condition::MomentumStepsizeCap,
                    message: format!("γ = {gamma} ≥ (1−β²)/(2Lω) = {cap}"),
                });
            }
            let lhs = beta * beta / ob.powi(3);
            let rhs =
                (1.0 - beta * beta - 2.0 * l * gamma * omega) / (gamma * gamma * l * l * omega);
            if !(lhs <= rhs) {
                violations.push(Violation {
                    condition: Condition::MomentumCoupling,
                    message: format!("β²/(1−β)³ = {lhs} > {rhs}"),
                });
            }
            let terms = [
                lead,
                2.0 * gamma * l * s2 / (alpha_p * n * ob * ob),
                2.0 * gamma * gamma * l * l * beta * beta * s2 / (ob.powi(5) * alpha_p * n),
                2.0 * gamma * gamma * l * l * beta * beta * (1.0 - alpha_p) * zeta2
                    / (2.0 * ob.powi(5) * alpha_p * n),
            ];
            (None, terms)
        }
    };
    Ok(Momentum {
        omega,
        delta,
        violations,
        terms,
        total: terms.iter().sum(),
    })
}

/// The momentum bound value; errors if `(β, γ)` is not admissible.
pub fn momentum_bound(
    constants: &ProblemConstants,
    alpha_p: f64,
    variant: MomentumVariant,
    beta: f64,
    gamma: f64,
    k: u64,
    gap0: f64,
) -> Result<f64> {
    let m = momentum(constants, alpha_p, variant, beta, gamma, k, gap0)?;
    if !m.violations.is_empty() {
        return Err(Error::InvalidParameter(describe(&m.violations)));
    }
    Ok(m.total)
}

/// `N = σ²/(nα_p) + 2(1−α_p)/(n²α_p) Σ‖h_i*‖²`, the per-step noise of the
/// memoryless method.
pub fn baseline_noise(constants: &ProblemConstants, alpha_p: f64, sum_hstar2: f64) -> f64 {
    let n = constants.n as f64;
    constants.sigma2 / (n * alpha_p) + 2.0 * (1.0 - alpha_p) / (n * n * alpha_p) * sum_hstar2
}

/// `(1−γμ)^k ‖x⁰−x*‖² + (γ/μ) N` for the memoryless method at constant `γ`.
pub fn baseline_strongly_convex_bound(
    constants: &ProblemConstants,
    alpha_p: f64,
    gamma: f64,
    dist0: f64,
    sum_hstar2: f64,
    k: u64,
) -> Result<f64> {
    require_strongly_convex(constants)?;
    require_alpha_p(alpha_p)?;
    let violations = validate_params(constants, 0.0, 0.0, gamma, alpha_p);
    if !violations.is_empty() {
        return Err(Error::InvalidParameter(describe(&violations)));
    }
    let mu = constants.mu;
    Ok(geometric(gamma * mu, k) * dist0
        + gamma / mu * baseline_noise(constants, alpha_p, sum_hstar2))
}

/// Smallest admissible `θ = (μ+L)(2+(n−2)α_p)/(2nα_p)` for the memoryless
/// method with `γ^k = 2/(μk+θ)`.
pub fn baseline_decreasing_theta(constants: &ProblemConstants, alpha_p: f64) -> Result<f64> {
    require_strongly_convex(constants)?;
    require_alpha_p(alpha_p)?;
    let n = constants.n as f64;
    Ok((constants.mu + constants.l) * (2.0 + (n - 2.0) * alpha_p) / (2.0 * n * alpha_p))
}

/// `max{‖x⁰−x*‖², 4N/(μθ)} / (ηk + 1)` for the memoryless method.
pub fn baseline_decreasing_bound(
    constants: &ProblemConstants,
    alpha_p: f64,
    theta: f64,
    dist0: f64,
    sum_hstar2: f64,
    k: u64,
) -> Result<f64> {
    let min_theta = baseline_decreasing_theta(constants, alpha_p)?;
    if exceeds(min_theta, theta) {
        return Err(Error::InvalidParameter(format!(
            "θ = {theta} < {min_theta}"
        )));
    }
    let mu = constants.mu;
    let c = dist0.max(4.0 / (mu * theta) * baseline_noise(constants, alpha_p, sum_hstar2));
    Ok(c / (mu / theta * k as f64 + 1.0))
}

/// Worker count balancing quantization and smoothness for blocks of size
/// `d/m` with `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalNodes {
    /// `n* = 2(√(d/m) − 1)`.
    pub n_star: f64,
    /// `√(d/m)`.
    pub root: f64,
}

impl OptimalNodes {
    /// `W(n*) = max{2√(d/m), κ + 1}`.
    pub fn complexity(&self, kappa: f64) -> f64 {
        (2.0 * self.root).max(kappa + 1.0)
    }
}

pub fn optimal_nodes(d: u64, m: u64) -> Result<OptimalNodes> {
    if m == 0 || d < m {
        return Err(Error::InvalidParameter(format!(
            "need d ≥ m ≥ 1, got d={d}, m={m}"
        )));
    }
    let root = (d as f64 / m as f64).sqrt();
    Ok(OptimalNodes {
        n_star: 2.0 * (root - 1.0),
        root,
    })
}

/// Scalar sequence `a^{k+1} = (1 − γ^kμ)a^k + (γ^k)²N`, for checking the
/// decreasing-stepsize recursion numerically.
pub fn recursion_sequence(schedule: &Decreasing, a0: f64, noise: f64, steps: u64) -> Vec<f64> {
    let mut a = a0;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(a);
    for k in 0..steps {
        let g = schedule.gamma(k);
        a = (1.0 - g * schedule.mu) * a + g * g * noise;
        out.push(a);
    }
    out
}
