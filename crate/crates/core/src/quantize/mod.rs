//! Block p-quantization.
//!
//! A block `Δ(l)` is replaced by `‖Δ(l)‖_p · sign(Δ_j) · ξ_j` where the
//! `ξ_j` are independent Bernoulli variables with success probability
//! `|Δ_j| / ‖Δ(l)‖_p`. The result is an unbiased estimate of `Δ` whose
//! variance is [`psi`] and whose expected support is [`expected_sparsity`].
//!
//! Draw order: [`quantize`] consumes exactly one `u64` per coordinate, in
//! coordinate order, including coordinates of all-zero blocks. Coordinate
//! `j` is kept iff `u_j < |Δ_j| / ‖Δ(l)‖_p` with `u_j` from
//! [`crate::rng::unit_f64`].

mod alpha;
mod layout;
mod wire;

pub use alpha::{alpha_p, alpha_p_search, quantization_ratio};
pub use layout::{BlockLayout, PNorm};
pub use wire::{
    decode_wire, elias_gamma_len, encode_wire, encode_wire_with, encoded_len, BitString,
    FloatWidth, ScalePolicy,
};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::rng::unit_f64;

/// Log base used by [`comm_cost_bound`].
pub const COMM_COST_LOG_BASE: &str = "e";

/// Compressed vector: one scale per block and a ternary sign per coordinate.
///
/// A coordinate is in the support iff its sign is nonzero. Blocks with a
/// zero scale have an empty support, so every value has a single encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedVector {
    layout: BlockLayout,
    scales: Vec<f64>,
    signs: Vec<i8>,
}

impl QuantizedVector {
    pub fn from_parts(layout: BlockLayout, scales: Vec<f64>, signs: Vec<i8>) -> Result<Self> {
        check_dim(layout.num_blocks(), scales.len())?;
        check_dim(layout.total_dim(), signs.len())?;
        for (block, (range, &scale)) in layout.ranges().zip(&scales).enumerate() {
            if !scale.is_finite() || scale.is_sign_negative() {
                return Err(Error::InvalidScale {
                    block,
                    value: scale,
                });
            }
            for j in range {
                if !(-1..=1).contains(&signs[j]) {
                    return Err(Error::InvalidParameter(format!("sign {} at {j}", signs[j])));
                }
                if scale == 0.0 && signs[j] != 0 {
                    return Err(Error::InvalidScale {
                        block,
                        value: scale,
                    });
                }
            }
        }
        Ok(QuantizedVector {
            layout,
            scales,
            signs,
        })
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        let scales = vec![0.0; layout.num_blocks()];
        let signs = vec![0; layout.total_dim()];
        QuantizedVector {
            layout,
            scales,
            signs,
        }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn support(&self, j: usize) -> bool {
        self.signs[j] != 0
    }

    /// `‖Δ̂‖_0`.
    pub fn nnz(&self) -> usize {
        self.signs.iter().filter(|&&s| s != 0).count()
    }

    /// Dense vector `scale(l) · sign(j)` on the support, `+0.0` elsewhere.
    pub fn decode(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.signs.len()];
        self.decode_into(&mut out);
        out
    }

    pub fn decode_into(&self, out: &mut [f64]) {
        for (range, &scale) in self.layout.ranges().zip(&self.scales) {
            for j in range {
                out[j] = match self.signs[j] {
                    1 => scale,
                    -1 => -scale,
                    _ => 0.0,
                };
            }
        }
    }
}

/// Free-function form of [`QuantizedVector::decode`].
pub fn decode(q: &QuantizedVector) -> Vec<f64> {
    q.decode()
}

/// Samples `Δ̂ ~ Quant_p(Δ, layout)`.
pub fn quantize<R: RngCore + ?Sized>(
    delta: &[f64],
    layout: &BlockLayout,
    p: PNorm,
    rng: &mut R,
) -> Result<QuantizedVector> {
    check_dim(layout.total_dim(), delta.len())?;
    check_finite(delta)?;
    let mut scales = Vec::with_capacity(layout.num_blocks());
    let mut signs = vec![0i8; delta.len()];
    for range in layout.ranges() {
        let block = &delta[range.clone()];
        let scale = p.norm(block);
        for (j, &v) in range.zip(block) {
            let u = unit_f64(rng);
            if scale > 0.0 && v != 0.0 {
                let prob = (v.abs() / scale).min(1.0);
                if u < prob {
                    signs[j] = if v > 0.0 { 1 } else { -1 };
                }
            }
        }
        scales.push(scale);
    }
    Ok(QuantizedVector {
        layout: layout.clone(),
        scales,
        signs,
    })
}

/// Retention probabilities `|Δ_j| / ‖Δ(l)‖_p` (0 on zero blocks).
pub fn keep_probabilities(delta: &[f64], layout: &BlockLayout, p: PNorm) -> Result<Vec<f64>> {
    check_dim(layout.total_dim(), delta.len())?;
    let mut probs = vec![0.0; delta.len()];
    for range in layout.ranges() {
        let scale = p.norm(&delta[range.clone()]);
        if scale > 0.0 {
            for j in range {
                probs[j] = (delta[j].abs() / scale).min(1.0);
            }
        }
    }
    Ok(probs)
}

/// `Ψ(Δ) = Σ_l ‖Δ(l)‖_1 ‖Δ(l)‖_p − ‖Δ(l)‖_2²`, the exact variance of the quantizer.
pub fn psi(delta: &[f64], layout: &BlockLayout, p: PNorm) -> Result<f64> {
    check_dim(layout.total_dim(), delta.len())?;
    let total = layout
        .ranges()
        .map(|r| {
            let b = &delta[r];
            // Σ_j |Δ_j| (‖Δ‖_p − |Δ_j|) is the same quantity without cancellation.
            let np = p.norm(b);
            b.iter()
                .map(|v| v.abs() * (np - v.abs()).max(0.0))
                .sum::<f64>()
        })
        .sum();
    Ok(total)
}

/// `E ‖Δ̂‖_0 = Σ_l ‖Δ(l)‖_1 / ‖Δ(l)‖_p`.
pub fn expected_sparsity(delta: &[f64], layout: &BlockLayout, p: PNorm) -> Result<f64> {
    check_dim(layout.total_dim(), delta.len())?;
    Ok(layout
        .ranges()
        .map(|r| {
            let b = &delta[r];
            let np = p.norm(b);
            if np == 0.0 {
                0.0
            } else {
                PNorm::ONE.norm(b) / np
            }
        })
        .sum())
}

/// Upper bound on the expected Elias-coded size of `Δ̂`, per block
/// `(‖Δ(l)‖_1/‖Δ(l)‖_p)^{1/2} (ln d_l + ln 2 + 1) + b`, summed over blocks.
///
/// This is a reference curve; the codec's real size is [`encoded_len`].
pub fn comm_cost_bound(
    delta: &[f64],
    layout: &BlockLayout,
    p: PNorm,
    float_bits: f64,
) -> Result<f64> {
    check_dim(layout.total_dim(), delta.len())?;
    if !(float_bits > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "float bit width {float_bits}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(layout
        .ranges()
        .map(|r| {
            let size = r.len() as f64;
            let b = &delta[r];
            let np = p.norm(b);
            if np == 0.0 {
                float_bits
            } else {
                (PNorm::ONE.norm(b) / np).sqrt() * (size.ln() + ln2 + 1.0) + float_bits
            }
        })
        .sum())
}

/// `C(Δ̂) = ‖Δ̂‖_0^{1/2} (ln ‖Δ̂‖_0 + ln 2 + 1) + b`, taking the sparsity
/// term as 0 when `Δ̂ = 0`.
pub fn elias_cost(nnz: usize, float_bits: f64) -> f64 {
    if nnz == 0 {
        return float_bits;
    }
    let s = nnz as f64;
    s.sqrt() * (s.ln() + std::f64::consts::LN_2 + 1.0) + float_bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn one_block(d: usize) -> BlockLayout {
        BlockLayout::single(d).unwrap()
    }

    #[test]
    fn zero_vector_quantizes_to_zero() {
        let mut rng = stream(0, 0, Purpose::Quantizer, 0);
        for p in [PNorm::ONE, PNorm::TWO, PNorm::INF] {
            let q = quantize(&[0.0; 3], &one_block(3), p, &mut rng).unwrap();
            assert_eq!(q, QuantizedVector::zeros(one_block(3)));
            assert_eq!(q.decode(), vec![0.0; 3]);
        }
    }

    #[test]
    fn single_coordinate_is_lossless() {
        for seed in 0..50 {
            let mut rng = stream(seed, 0, Purpose::Quantizer, 0);
            let q = quantize(&[5.0], &one_block(1), PNorm::TWO, &mut rng).unwrap();
            assert_eq!(q.decode(), vec![5.0]);
        }
    }

    #[test]
    fn outcomes_of_three_four() {
        let mut counts = std::collections::HashMap::new();
        for seed in 0..20_000 {
            let mut rng = stream(seed, 0, Purpose::Quantizer, 0);
            let q = quantize(&[3.0, 4.0], &one_block(2), PNorm::TWO, &mut rng).unwrap();
            let d = q.decode();
            assert!([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]].contains(&[d[0], d[1]]));
            *counts.entry((d[0] as i32, d[1] as i32)).or_insert(0usize) += 1;
        }
        // P(5,5) = 0.6 * 0.8
        let p55 = counts[&(5, 5)] as f64 / 20_000.0;
        assert!((p55 - 0.48).abs() < 0.02, "{p55}");
    }

    #[test]
    fn decode_examples() {
        let l = one_block(2);
        let q = QuantizedVector::from_parts(l.clone(), vec![5.0], vec![1, 0]).unwrap();
        assert_eq!(q.decode(), vec![5.0, 0.0]);
        let q = QuantizedVector::from_parts(l.clone(), vec![5.0], vec![1, -1]).unwrap();
        assert_eq!(decode(&q), vec![5.0, -5.0]);
        assert!(QuantizedVector::from_parts(l.clone(), vec![0.0], vec![1, 0]).is_err());
        assert!(QuantizedVector::from_parts(l, vec![-1.0], vec![0, 0]).is_err());
    }

    #[test]
    fn psi_examples() {
        assert!((psi(&[3.0, 4.0], &one_block(2), PNorm::TWO).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(
            psi(&[0.0, -2.5, 0.0], &one_block(3), PNorm::new(3.3).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(psi(&[1.0, 1.0], &one_block(2), PNorm::INF).unwrap(), 0.0);
    }

    #[test]
    fn sparsity_examples() {
        let s = expected_sparsity(&[3.0, 4.0], &one_block(2), PNorm::TWO).unwrap();
        assert!((s - 1.4).abs() < 1e-12);
        assert_eq!(
            expected_sparsity(&[0.0; 4], &one_block(4), PNorm::TWO).unwrap(),
            0.0
        );
        assert_eq!(
            expected_sparsity(&[1.0; 9], &one_block(9), PNorm::INF).unwrap(),
            9.0
        );
    }

    #[test]
    fn comm_cost_examples() {
        let l = one_block(2);
        assert_eq!(
            comm_cost_bound(&[0.0, 0.0], &l, PNorm::TWO, 32.0).unwrap(),
            32.0
        );
        let ln2 = std::f64::consts::LN_2;
        let expected = 1.4f64.sqrt() * (ln2 + ln2 + 1.0) + 32.0;
        let got = comm_cost_bound(&[3.0, 4.0], &l, PNorm::TWO, 32.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let delta = [0.3, -1.2, 0.05, 2.0, 0.0, 0.7];
        let l6 = one_block(6);
        let b1 = comm_cost_bound(&delta, &l6, PNorm::ONE, 32.0).unwrap();
        let b2 = comm_cost_bound(&delta, &l6, PNorm::TWO, 32.0).unwrap();
        let binf = comm_cost_bound(&delta, &l6, PNorm::INF, 32.0).unwrap();
        // ‖Δ‖_1/‖Δ‖_p grows with p, so the bound does too.
        assert!(b1 <= b2 && b2 <= binf);
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = stream(0, 0, Purpose::Quantizer, 0);
        assert!(matches!(
            quantize(&[1.0, 2.0], &one_block(3), PNorm::TWO, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            quantize(&[1.0, f64::NAN], &one_block(2), PNorm::TWO, &mut rng),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn fixed_draw_count_per_coordinate() {
        use rand::RngCore;
        let l = BlockLayout::new(vec![2, 3]).unwrap();
        let mut a = stream(3, 0, Purpose::Quantizer, 0);
        quantize(&[0.0, 0.0, 1.0, -2.0, 0.5], &l, PNorm::TWO, &mut a).unwrap();
        let mut b = stream(3, 0, Purpose::Quantizer, 0);
        for _ in 0..5 {
            b.next_u64();
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
