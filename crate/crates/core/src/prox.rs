//! Regularizers with closed-form proximal operators,
//! `prox_{γR}(u) = argmin_v γR(v) + ½‖v − u‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    /// `R ≡ 0`.
    #[default]
    Zero,
    /// `λ₁ ‖x‖₁`.
    L1 { lambda1: f64 },
    /// `(λ₂/2) ‖x‖²`.
    SquaredL2 { lambda2: f64 },
    /// `λ₁ ‖x‖₁ + (λ₂/2) ‖x‖²`.
    Elastic { lambda1: f64, lambda2: f64 },
    /// Indicator of `{x : lower ≤ x ≤ upper}`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

fn soft_threshold(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

impl Regularizer {
    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { lambda1 } if !(*lambda1 >= 0.0) => bad("lambda1 must be >= 0"),
            Regularizer::SquaredL2 { lambda2 } if !(*lambda2 >= 0.0) => bad("lambda2 must be >= 0"),
            Regularizer::Elastic { lambda1, lambda2 } if !(*lambda1 >= 0.0 && *lambda2 >= 0.0) => {
                bad("elastic weights must be >= 0")
            }
            Regularizer::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                if let Some(d) = dim {
                    check_dim(d, lower.len())?;
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return bad("box bounds need lower <= upper");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether the nonconvex analysis covers this regularizer (constant only).
    pub fn is_constant(&self) -> bool {
        match self {
            Regularizer::Zero => true,
            Regularizer::L1 { lambda1 } => *lambda1 == 0.0,
            Regularizer::SquaredL2 { lambda2 } => *lambda2 == 0.0,
            Regularizer::Elastic { lambda1, lambda2 } => *lambda1 == 0.0 && *lambda2 == 0.0,
            Regularizer::Box { .. } => false,
        }
    }

    /// `prox_{γR}(u)` written into `u`.
    pub fn prox_in_place(&self, gamma: f64, u: &mut [f64]) {
        debug_assert!(gamma > 0.0);
        match self {
            Regularizer::Zero => {}
            Regularizer::L1 { lambda1 } => {
                let t = gamma * lambda1;
                u.iter_mut().for_each(|v| *v = soft_threshold(*v, t));
            }
            Regularizer::SquaredL2 { lambda2 } => {
                let s = 1.0 / (1.0 + gamma * lambda2);
                u.iter_mut().for_each(|v| *v *= s);
            }
            Regularizer::Elastic { lambda1, lambda2 } => {
                let t = gamma * lambda1;
                let s = 1.0 / (1.0 + gamma * lambda2);
                u.iter_mut().for_each(|v| *v = soft_threshold(*v, t) * s);
            }
            Regularizer::Box { lower, upper } => {
                for ((v, l), h) in u.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *h);
                }
            }
        }
    }

    pub fn prox(&self, gamma: f64, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        self.prox_in_place(gamma, &mut out);
        out
    }

    /// `R(x)`; `+∞` outside the box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let l1 = || x.iter().map(|v| v.abs()).sum::<f64>();
        let sq = || x.iter().map(|v| v * v).sum::<f64>();
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda1 } => lambda1 * l1(),
            Regularizer::SquaredL2 { lambda2 } => 0.5 * lambda2 * sq(),
            Regularizer::Elastic { lambda1, lambda2 } => lambda1 * l1() + 0.5 * lambda2 * sq(),
            Regularizer::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower)
                    .zip(upper)
                    .all(|((v, l), h)| l <= v && v <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `‖prox_{γR}(x − γg) − x‖ / γ`: zero iff `x` is optimal for
    /// `f + R` when `g = ∇f(x)`.
    pub fn fixed_point_residual(&self, gamma: f64, x: &[f64], grad: &[f64]) -> f64 {
        let mut u: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - gamma * g).collect();
        self.prox_in_place(gamma, &mut u);
        u.iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / gamma
    }
}

/// Free-function form of [`Regularizer::prox`].
pub fn prox(r: &Regularizer, gamma: f64, u: &[f64]) -> Vec<f64> {
    r.prox(gamma, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(prox(&Regularizer::Zero, 3.0, &[1.0, -2.0]), vec![1.0, -2.0]);
        assert_eq!(
            prox(&Regularizer::L1 { lambda1: 1.0 }, 1.0, &[2.0, -0.5]),
            vec![1.0, 0.0]
        );
        assert_eq!(
            prox(&Regularizer::SquaredL2 { lambda2: 1.0 }, 1.0, &[4.0, -2.0]),
            vec![2.0, -1.0]
        );
        let b = Regularizer::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert_eq!(prox(&b, 0.1, &[2.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Regularizer::Zero.eval(&[5.0]), 0.0);
        assert_eq!(Regularizer::L1 { lambda1: 2.0 }.eval(&[1.0, -3.0]), 8.0);
        let b = Regularizer::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert_eq!(b.eval(&[2.0, 0.0]), f64::INFINITY);
        assert_eq!(b.eval(&[0.5, 1.0]), 0.0);
    }

    #[test]
    fn validation() {
        assert!(Regularizer::L1 { lambda1: -1.0 }.validate(None).is_err());
        let b = Regularizer::Box {
            lower: vec![1.0],
            upper: vec![0.0],
        };
        assert!(b.validate(None).is_err());
        let b = Regularizer::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert!(b.validate(Some(2)).is_err());
        assert!(b.validate(Some(1)).is_ok());
    }

    fn objective(r: &Regularizer, gamma: f64, u: &[f64], v: &[f64]) -> f64 {
        gamma * r.eval(v) + 0.5 * v.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    #[test]
    fn matches_grid_minimization() {
        let regs = [
            Regularizer::Zero,
            Regularizer::L1 { lambda1: 0.7 },
            Regularizer::SquaredL2 { lambda2: 1.3 },
            Regularizer::Elastic {
                lambda1: 0.4,
                lambda2: 0.9,
            },
            Regularizer::Box {
                lower: vec![-0.5, 0.0],
                upper: vec![0.25, 2.0],
            },
        ];
        let h = 0.005;
        let grid: Vec<f64> = (0..=1200).map(|i| -3.0 + i as f64 * h).collect();
        let inputs = [[1.7, -0.2], [-2.1, 0.05], [0.3, 2.4]];
        for r in &regs {
            for u in inputs {
                let p = r.prox(0.8, &u);
                // Separable objectives: minimise each coordinate on the grid.
                for j in 0..2 {
                    let mut best = (f64::INFINITY, 0.0);
                    for &g in &grid {
                        let mut v = p.clone();
                        v[j] = g;
                        let val = objective(r, 0.8, &u, &v);
                        if val < best.0 {
                            best = (val, g);
                        }
                    }
                    assert!(
                        (best.1 - p[j]).abs() <= h,
                        "{r:?} u={u:?} j={j}: grid {} vs {}",
                        best.1,
                        p[j]
                    );
                }
            }
        }
    }

    fn arb_reg() -> impl Strategy<Value = Regularizer> {
        prop_oneof![
            Just(Regularizer::Zero),
            (0.0f64..5.0).prop_map(|lambda1| Regularizer::L1 { lambda1 }),
            (0.0f64..5.0).prop_map(|lambda2| Regularizer::SquaredL2 { lambda2 }),
            (0.0f64..5.0, 0.0f64..5.0)
                .prop_map(|(lambda1, lambda2)| Regularizer::Elastic { lambda1, lambda2 }),
            (
                prop::collection::vec(-2.0f64..0.0, 3),
                prop::collection::vec(0.0f64..2.0, 3)
            )
                .prop_map(|(lower, upper)| Regularizer::Box { lower, upper }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn nonexpansive(
            r in arb_reg(),
            gamma in 1e-3f64..10.0,
            u in prop::collection::vec(-10.0f64..10.0, 3),
            v in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let pu = r.prox(gamma, &u);
            let pv = r.prox(gamma, &v);
            let dp: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let du: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dp <= du * (1.0 + 1e-12) + 1e-15);
        }
    }
}
