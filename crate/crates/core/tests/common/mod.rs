//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use diana_core::quantize::{quantize, BlockLayout, PNorm};

/// Replays a fixed list of uniforms: `0` forces a keep, values just below 1
/// force a drop unless the keep probability is 1.
pub struct Scripted {
    pub values: Vec<u64>,
    pub pos: usize,
}

impl RngCore for Scripted {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let v = self.values[self.pos];
        self.pos += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for b in dst {
            *b = self.next_u64() as u8;
        }
    }
}

pub fn oracle_norm(x: &[f64], p: PNorm) -> f64 {
    match p {
        PNorm::Infinity => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        PNorm::Finite(v) if v == 1.0 => x.iter().map(|v| v.abs()).sum(),
        PNorm::Finite(v) if v == 2.0 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        PNorm::Finite(v) => x.iter().map(|t| t.abs().powf(v)).sum::<f64>().powf(1.0 / v),
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
pub struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    pub fn add(&mut self, v: f64) {
        let t = self.total + v;
        if self.total.abs() >= v.abs() {
            self.carry += (self.total - t) + v;
        } else {
            self.carry += (v - t) + self.total;
        }
        self.total = t;
    }

    pub fn value(self) -> f64 {
        self.total + self.carry
    }
}

pub struct Enumeration {
    pub mean: Vec<f64>,
    pub variance: f64,
    pub block_sparsity: Vec<f64>,
    /// Decoded outcome and its probability, for every pattern with
    /// nonzero weight.
    pub outcomes: Vec<(Vec<f64>, f64)>,
}

/// Exact distribution of the quantizer output over every keep/drop pattern
/// of the nonzero coordinates, driving the library quantizer with scripted
/// uniforms and weighting each pattern by its product probability.
pub fn enumerate(delta: &[f64], layout: &BlockLayout, p: PNorm) -> Enumeration {
    let d = delta.len();
    let mut prob = vec![0.0; d];
    for r in layout.ranges() {
        let s = oracle_norm(&delta[r.clone()], p);
        for j in r {
            prob[j] = if s == 0.0 {
                0.0
            } else {
                (delta[j].abs() / s).min(1.0)
            };
        }
    }
    let nz: Vec<usize> = (0..d).filter(|&j| delta[j] != 0.0).collect();
    let mut mean = vec![Sum::default(); d];
    let mut second = Sum::default();
    let mut block_sparsity = vec![Sum::default(); layout.num_blocks()];
    let mut outcomes = Vec::new();
    let block_of: Vec<usize> = layout
        .ranges()
        .enumerate()
        .flat_map(|(b, r)| r.map(move |_| b))
        .collect();
    for mask in 0u32..(1 << nz.len()) {
        let mut weight = 1.0;
        let mut script = vec![u64::MAX; d];
        for (t, &j) in nz.iter().enumerate() {
            if mask >> t & 1 == 1 {
                weight *= prob[j];
                script[j] = 0;
            } else {
                weight *= 1.0 - prob[j];
            }
        }
        if weight == 0.0 {
            continue;
        }
        let mut rng = Scripted {
            values: script,
            pos: 0,
        };
        let q = quantize(delta, layout, p, &mut rng).unwrap();
        assert_eq!(rng.pos, d, "one draw per coordinate");
        let out = q.decode();
        for j in 0..d {
            mean[j].add(weight * out[j]);
            second.add(weight * (out[j] - delta[j]).powi(2));
            if out[j] != 0.0 {
                block_sparsity[block_of[j]].add(weight);
            }
        }
        outcomes.push((out, weight));
    }
    Enumeration {
        mean: mean.into_iter().map(Sum::value).collect(),
        variance: second.value(),
        block_sparsity: block_sparsity.into_iter().map(Sum::value).collect(),
        outcomes,
    }
}

pub fn random_layout(rng: &mut ChaCha8Rng, d: usize) -> BlockLayout {
    let mut sizes = Vec::new();
    let mut left = d;
    while left > 0 {
        let s = rng.random_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    BlockLayout::new(sizes).unwrap()
}
