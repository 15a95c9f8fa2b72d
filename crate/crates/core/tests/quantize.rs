use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diana_core::quantize::{
    alpha_p, comm_cost_bound, decode_wire, encode_wire, encoded_len, expected_sparsity, psi,
    quantize, BlockLayout, FloatWidth, PNorm, QuantizedVector,
};

mod common;
use common::{enumerate, Sum};

fn single(d: usize) -> BlockLayout {
    BlockLayout::single(d).unwrap()
}

fn pnorm() -> impl Strategy<Value = PNorm> {
    prop_oneof![
        Just(PNorm::ONE),
        Just(PNorm::TWO),
        Just(PNorm::INF),
        (1.0f64..6.0).prop_map(|p| PNorm::new(p).unwrap())
    ]
}

fn vector_and_layout(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, BlockLayout)> {
    (1..=max_dim)
        .prop_flat_map(|d| {
            let values = prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], d);
            let block = 1..=d;
            (values, block)
        })
        .prop_map(|(v, b)| {
            let layout = BlockLayout::uniform(v.len(), b).unwrap();
            (v, layout)
        })
}

#[test]
fn three_four_outcomes_and_probabilities() {
    let e = enumerate(&[3.0, 4.0], &single(2), PNorm::TWO);
    let expected = [
        ([0.0, 0.0], 0.4 * 0.2),
        ([5.0, 0.0], 0.6 * 0.2),
        ([0.0, 5.0], 0.4 * 0.8),
        ([5.0, 5.0], 0.6 * 0.8),
    ];
    assert_eq!(e.outcomes.len(), 4);
    for (out, prob) in expected {
        let hit = e
            .outcomes
            .iter()
            .find(|(o, _)| o == &out)
            .expect("outcome present");
        assert_relative_eq!(hit.1, prob, epsilon = 1e-15);
    }
    assert_relative_eq!(e.variance, 10.0, epsilon = 1e-12);
}

#[test]
fn forced_and_zero_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for p in [PNorm::ONE, PNorm::TWO, PNorm::INF] {
        let q = quantize(&[0.0; 3], &single(3), p, &mut rng).unwrap();
        assert_eq!(q, QuantizedVector::zeros(single(3)));
        assert_eq!(q.decode(), vec![0.0; 3]);
        for _ in 0..50 {
            assert_eq!(
                quantize(&[5.0], &single(1), p, &mut rng).unwrap().decode(),
                vec![5.0]
            );
        }
    }
}

#[test]
fn decode_examples() {
    let q = QuantizedVector::from_parts(single(2), vec![5.0], vec![1, 0]).unwrap();
    assert_eq!(q.decode(), vec![5.0, 0.0]);
    let q = QuantizedVector::from_parts(single(2), vec![5.0], vec![1, -1]).unwrap();
    assert_eq!(q.decode(), vec![5.0, -5.0]);
}

#[test]
fn psi_examples() {
    assert_relative_eq!(
        psi(&[3.0, 4.0], &single(2), PNorm::TWO).unwrap(),
        10.0,
        epsilon = 1e-12
    );
    for p in [PNorm::ONE, PNorm::TWO, PNorm::INF] {
        assert_eq!(psi(&[0.0, -2.5, 0.0], &single(3), p).unwrap(), 0.0);
    }
    assert_eq!(psi(&[1.0, 1.0], &single(2), PNorm::INF).unwrap(), 0.0);
    assert!(psi(&[1.0], &single(2), PNorm::INF).is_err());
}

#[test]
fn alpha_examples() {
    assert_relative_eq!(alpha_p(4, PNorm::TWO).unwrap(), 0.5);
    assert_relative_eq!(alpha_p(4, PNorm::INF).unwrap(), 2.0 / 3.0);
    for p in [PNorm::ONE, PNorm::TWO, PNorm::INF, PNorm::new(3.0).unwrap()] {
        assert_relative_eq!(alpha_p(1, p).unwrap(), 1.0);
    }
    assert!(PNorm::new(0.5).is_err());
}

#[test]
fn alpha_is_monotone_in_d_and_p() {
    let ps: Vec<PNorm> = [1.0, 1.5, 2.0, 3.0, 8.0]
        .iter()
        .map(|&p| PNorm::new(p).unwrap())
        .chain([PNorm::INF])
        .collect();
    for d in 1..=10 {
        for w in ps.windows(2) {
            assert!(
                alpha_p(d, w[0]).unwrap() <= alpha_p(d, w[1]).unwrap() + 1e-12,
                "d={d}"
            );
        }
        for &p in &ps {
            assert!(
                alpha_p(d + 1, p).unwrap() <= alpha_p(d, p).unwrap() + 1e-12,
                "d={d}"
            );
        }
    }
}

#[test]
fn sparsity_examples() {
    assert_relative_eq!(
        expected_sparsity(&[3.0, 4.0], &single(2), PNorm::TWO).unwrap(),
        1.4,
        epsilon = 1e-15
    );
    assert_eq!(
        expected_sparsity(&[0.0; 4], &single(4), PNorm::TWO).unwrap(),
        0.0
    );
    assert_eq!(
        expected_sparsity(&[1.0; 7], &single(7), PNorm::INF).unwrap(),
        7.0
    );
}

#[test]
fn comm_cost_examples() {
    let layout = BlockLayout::uniform(6, 3).unwrap();
    assert_eq!(
        comm_cost_bound(&[0.0; 6], &layout, PNorm::TWO, 32.0).unwrap(),
        64.0
    );
    let want = 1.4f64.sqrt() * (2.0f64.ln() + 2.0f64.ln() + 1.0) + 32.0;
    assert_relative_eq!(
        comm_cost_bound(&[3.0, 4.0], &single(2), PNorm::TWO, 32.0).unwrap(),
        want,
        epsilon = 1e-12
    );
}

/// `‖Δ̂‖₀^{1/2}(ln‖Δ̂‖₀ + ln 2 + 1) + b` averaged over the exact outcome
/// distribution, against the measured codec length.
#[test]
fn encoded_length_tracks_expected_cost() {
    let delta = [3.0, 4.0];
    let layout = single(2);
    let e = enumerate(&delta, &layout, PNorm::TWO);
    let mut reference = Sum::default();
    for (out, prob) in &e.outcomes {
        let nnz = out.iter().filter(|v| **v != 0.0).count() as f64;
        let cost = if nnz == 0.0 {
            32.0
        } else {
            nnz.sqrt() * (nnz.ln() + 2.0f64.ln() + 1.0) + 32.0
        };
        reference.add(prob * cost);
    }
    let reference = reference.value();
    let draws = 100_000;
    let mut total = 0u64;
    for seed in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = quantize(&delta, &layout, PNorm::TWO, &mut rng).unwrap();
        total += encode_wire(&q, FloatWidth::F32).unwrap().len() as u64;
    }
    let mean = total as f64 / draws as f64;
    assert!(
        (mean / reference - 1.0).abs() <= 0.2,
        "mean {mean}, reference {reference}"
    );
}

/// The worked example in `docs/wire-format.md`.
#[test]
fn documented_wire_example() {
    let q = QuantizedVector::from_parts(single(4), vec![2.5], vec![1, 0, -1, 0]).unwrap();
    let bits = encode_wire(&q, FloatWidth::F32).unwrap();
    assert_eq!(bits.len(), 41);
    assert_eq!(bits.as_bytes(), &[0x40, 0x20, 0x00, 0x00, 0xD1, 0x00]);
    assert_eq!(decode_wire(&bits, &single(4), FloatWidth::F32).unwrap(), q);
}

#[test]
fn zero_block_is_header_and_terminator() {
    let q = QuantizedVector::zeros(single(5));
    let bits = encode_wire(&q, FloatWidth::F32).unwrap();
    // gamma(6) = 00110
    assert_eq!(bits.len(), 32 + 5);
    assert_eq!(decode_wire(&bits, &single(5), FloatWidth::F32).unwrap(), q);
}

#[test]
fn index_past_block_end_is_rejected() {
    let q = QuantizedVector::from_parts(single(3), vec![1.0], vec![0, 0, 1]).unwrap();
    let bits = encode_wire(&q, FloatWidth::F32).unwrap();
    // Same stream read against a shorter block.
    assert!(decode_wire(&bits, &single(2), FloatWidth::F32).is_err());
}

#[test]
fn f32_header_rejects_unrepresentable_scale() {
    let q = QuantizedVector::from_parts(single(1), vec![0.1], vec![1]).unwrap();
    assert!(encode_wire(&q, FloatWidth::F32).is_err());
    assert!(encode_wire(&q, FloatWidth::F64).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn output_structure((delta, layout) in vector_and_layout(24), p in pnorm(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = quantize(&delta, &layout, p, &mut rng).unwrap();
        for (b, r) in layout.ranges().enumerate() {
            prop_assert_eq!(q.scales()[b], p.norm(&delta[r.clone()]));
            for j in r {
                let s = q.signs()[j];
                prop_assert!(s == 0 || delta[j] != 0.0);
                prop_assert!(s == 0 || (s > 0) == (delta[j] > 0.0));
            }
        }
    }

    #[test]
    fn psi_and_sparsity_bounds((delta, layout) in vector_and_layout(24), p in pnorm()) {
        prop_assert!(psi(&delta, &layout, p).unwrap() >= 0.0);
        let cap: f64 = layout
            .sizes()
            .iter()
            .map(|&d| match p {
                PNorm::Infinity => d as f64,
                PNorm::Finite(v) => (d as f64).powf(1.0 - 1.0 / v),
            })
            .sum();
        prop_assert!(expected_sparsity(&delta, &layout, p).unwrap() <= cap * (1.0 + 1e-12));
    }

    #[test]
    fn wire_round_trip((delta, layout) in vector_and_layout(40), p in pnorm(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = quantize(&delta, &layout, p, &mut rng).unwrap();
        let bits = encode_wire(&q, FloatWidth::F64).unwrap();
        prop_assert_eq!(bits.len(), encoded_len(&q, FloatWidth::F64));
        prop_assert_eq!(decode_wire(&bits, &layout, FloatWidth::F64).unwrap(), q);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..24), sizes in prop::collection::vec(1usize..20, 1..4)) {
        let layout = BlockLayout::new(sizes).unwrap();
        let len = bytes.len() * 8;
        let bits = diana_core::quantize::BitString::from_bytes(bytes, len);
        let _ = decode_wire(&bits, &layout, FloatWidth::F32);
    }
}
