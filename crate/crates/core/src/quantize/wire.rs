//! Bit-exact wire format for [`QuantizedVector`]. See `docs/wire-format.md`.
//!
//! Per block, in order:
//! 1. the scale as a `b`-bit IEEE-754 value, most significant bit first;
//! 2. for each support index `j` in ascending order, the Elias-gamma code
//!    of `j − prev` (with `prev = −1` before the first entry) followed by
//!    one sign bit, `1` for positive;
//! 3. if the last support index is not the block's last coordinate, the
//!    Elias-gamma code of `size − prev`, which points one past the end of
//!    the block and carries no sign bit.
//!
//! Blocks are concatenated with no padding. Decoding rejects trailing bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BlockLayout, QuantizedVector};
use crate::error::{Error, Result};

/// Width of the floating-point scale header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u32", into = "u32")]
pub enum FloatWidth {
    #[default]
    F32,
    F64,
}

impl FloatWidth {
    pub fn bits(self) -> u32 {
        match self {
            FloatWidth::F32 => 32,
            FloatWidth::F64 => 64,
        }
    }
}

impl TryFrom<u32> for FloatWidth {
    type Error = Error;

    fn try_from(b: u32) -> Result<Self> {
        match b {
            32 => Ok(FloatWidth::F32),
            64 => Ok(FloatWidth::F64),
            other => Err(Error::InvalidParameter(format!(
                "float width {other} (expected 32 or 64)"
            ))),
        }
    }
}

impl From<FloatWidth> for u32 {
    fn from(w: FloatWidth) -> u32 {
        w.bits()
    }
}

/// What to do with a scale that does not fit the header width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalePolicy {
    /// Fail with [`Error::PrecisionLoss`].
    #[default]
    Exact,
    /// Round to the nearest representable value (lossy).
    Nearest,
}

/// Growable bit string, most significant bit of each byte first.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Self {
        assert!(len <= bytes.len() * 8);
        let mut s = BitString { bytes, len };
        s.bytes.truncate(len.div_ceil(8));
        s.clear_tail();
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.bytes[i / 8] ^= 0x80 >> (i % 8);
    }

    pub fn truncate(&mut self, len: usize) {
        if len < self.len {
            self.len = len;
            self.bytes.truncate(len.div_ceil(8));
            self.clear_tail();
        }
    }

    fn clear_tail(&mut self) {
        if self.len % 8 != 0 {
            let keep = 0xffu8 << (8 - self.len % 8);
            *self.bytes.last_mut().unwrap() &= keep;
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for i in 0..self.len {
            f.write_str(if self.get(i).unwrap() { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}

struct Reader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl Reader<'_> {
    fn bit(&mut self) -> Result<bool> {
        let b = self
            .bits
            .get(self.pos)
            .ok_or(Error::Truncated { position: self.pos })?;
        self.pos += 1;
        Ok(b)
    }

    fn bits(&mut self, n: u32) -> Result<u64> {
        if self.pos + n as usize > self.bits.len() {
            return Err(Error::Truncated {
                position: self.bits.len(),
            });
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }

    fn gamma(&mut self) -> Result<u64> {
        let start = self.pos;
        let mut zeros = 0u32;
        while !self.bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(Error::MalformedCode { position: start });
            }
        }
        Ok((1u64 << zeros) | self.bits(zeros)?)
    }
}

fn push_gamma(out: &mut BitString, n: u64) {
    debug_assert!(n >= 1);
    let nbits = 63 - n.leading_zeros();
    out.push_bits(0, nbits);
    out.push_bits(n, nbits + 1);
}

/// Length in bits of the Elias-gamma code of `n ≥ 1`.
pub fn elias_gamma_len(n: u64) -> usize {
    assert!(n >= 1, "Elias-gamma codes start at 1");
    2 * (63 - n.leading_zeros() as usize) + 1
}

/// Encodes with [`ScalePolicy::Exact`].
pub fn encode_wire(q: &QuantizedVector, width: FloatWidth) -> Result<BitString> {
    encode_wire_with(q, width, ScalePolicy::Exact)
}

pub fn encode_wire_with(
    q: &QuantizedVector,
    width: FloatWidth,
    policy: ScalePolicy,
) -> Result<BitString> {
    let mut out = BitString::new();
    let signs = q.signs();
    for (block, (range, &scale)) in q.layout().ranges().zip(q.scales()).enumerate() {
        match width {
            FloatWidth::F64 => out.push_bits(scale.to_bits(), 64),
            FloatWidth::F32 => {
                let narrow = scale as f32;
                if policy == ScalePolicy::Exact && narrow as f64 != scale {
                    return Err(Error::PrecisionLoss {
                        block,
                        scale,
                        bits: 32,
                    });
                }
                out.push_bits(narrow.to_bits() as u64, 32);
            }
        }
        let size = range.len() as i64;
        let base = range.start;
        let mut prev: i64 = -1;
        for j in range {
            if signs[j] != 0 {
                let local = (j - base) as i64;
                push_gamma(&mut out, (local - prev) as u64);
                out.push(signs[j] > 0);
                prev = local;
            }
        }
        if prev != size - 1 {
            push_gamma(&mut out, (size - prev) as u64);
        }
    }
    Ok(out)
}

/// Size in bits of [`encode_wire`]'s output. The size does not depend on
/// the scale values, so this never fails.
pub fn encoded_len(q: &QuantizedVector, width: FloatWidth) -> usize {
    let signs = q.signs();
    let mut total = 0;
    for range in q.layout().ranges() {
        total += width.bits() as usize;
        let size = range.len() as i64;
        let base = range.start;
        let mut prev: i64 = -1;
        for j in range {
            if signs[j] != 0 {
                let local = (j - base) as i64;
                total += elias_gamma_len((local - prev) as u64) + 1;
                prev = local;
            }
        }
        if prev != size - 1 {
            total += elias_gamma_len((size - prev) as u64);
        }
    }
    total
}

pub fn decode_wire(
    bits: &BitString,
    layout: &BlockLayout,
    width: FloatWidth,
) -> Result<QuantizedVector> {
    let mut r = Reader { bits, pos: 0 };
    let mut scales = Vec::with_capacity(layout.num_blocks());
    let mut signs = vec![0i8; layout.total_dim()];
    for (block, range) in layout.ranges().enumerate() {
        let scale = match width {
            FloatWidth::F64 => f64::from_bits(r.bits(64)?),
            FloatWidth::F32 => f32::from_bits(r.bits(32)? as u32) as f64,
        };
        if !scale.is_finite() || scale.is_sign_negative() {
            return Err(Error::InvalidScale {
                block,
                value: scale,
            });
        }
        let size = range.len() as u64;
        let mut prev: i64 = -1;
        loop {
            let gap = r.gamma()?;
            let next = (prev as i128 + gap as i128) as u128;
            if next > size as u128 {
                let index = usize::try_from(next).unwrap_or(usize::MAX);
                return Err(Error::IndexOverflow {
                    block,
                    index,
                    size: size as usize,
                });
            }
            let next = next as u64;
            if next == size {
                break;
            }
            if scale == 0.0 {
                return Err(Error::InvalidScale {
                    block,
                    value: scale,
                });
            }
            signs[range.start + next as usize] = if r.bit()? { 1 } else { -1 };
            prev = next as i64;
            if next == size - 1 {
                break;
            }
        }
        scales.push(scale);
    }
    if r.pos != bits.len() {
        return Err(Error::TrailingBits {
            trailing: bits.len() - r.pos,
        });
    }
    QuantizedVector::from_parts(layout.clone(), scales, signs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(sizes: Vec<usize>, scales: Vec<f64>, signs: Vec<i8>) -> QuantizedVector {
        QuantizedVector::from_parts(BlockLayout::new(sizes).unwrap(), scales, signs).unwrap()
    }

    #[test]
    fn gamma_codes() {
        let mut s = BitString::new();
        push_gamma(&mut s, 1);
        push_gamma(&mut s, 2);
        push_gamma(&mut s, 5);
        assert_eq!(format!("{s:?}"), "BitString(101000101)");
        assert_eq!(elias_gamma_len(1), 1);
        assert_eq!(elias_gamma_len(5), 5);
        let mut r = Reader { bits: &s, pos: 0 };
        assert_eq!(
            (r.gamma().unwrap(), r.gamma().unwrap(), r.gamma().unwrap()),
            (1, 2, 5)
        );
    }

    #[test]
    fn zero_block_is_header_plus_terminator() {
        let z = QuantizedVector::zeros(BlockLayout::single(2).unwrap());
        let bits = encode_wire(&z, FloatWidth::F32).unwrap();
        // 32 header bits + gamma(3) = 011
        assert_eq!(bits.len(), 35);
        assert_eq!(decode_wire(&bits, z.layout(), FloatWidth::F32).unwrap(), z);
    }

    #[test]
    fn three_four_outcome_sizes() {
        let l = vec![2];
        let cases = [
            (vec![0, 0], 0.0, 35),
            (vec![1, 0], 5.0, 37),
            (vec![0, 1], 5.0, 36),
            (vec![1, 1], 5.0, 36),
        ];
        for (signs, scale, len) in cases {
            let v = q(l.clone(), vec![scale], signs);
            let bits = encode_wire(&v, FloatWidth::F32).unwrap();
            assert_eq!(bits.len(), len);
            assert_eq!(encoded_len(&v, FloatWidth::F32), len);
        }
    }

    #[test]
    fn float32_header_is_binary32() {
        let v = q(vec![3], vec![1.5], vec![0, -1, 0]);
        let bits = encode_wire(&v, FloatWidth::F32).unwrap();
        let mut header = 0u32;
        for i in 0..32 {
            header = (header << 1) | bits.get(i).unwrap() as u32;
        }
        assert_eq!(header, 1.5f32.to_bits());
        // gamma(2) = 010, sign 0, then gamma(3 - 1) = 010
        let tail: String = (32..bits.len())
            .map(|i| if bits.get(i).unwrap() { '1' } else { '0' })
            .collect();
        assert_eq!(tail, "0100010");
    }

    #[test]
    fn precision_loss_is_reported() {
        let v = q(vec![1], vec![0.1], vec![1]);
        assert!(matches!(
            encode_wire(&v, FloatWidth::F32),
            Err(Error::PrecisionLoss { .. })
        ));
        let lossy = encode_wire_with(&v, FloatWidth::F32, ScalePolicy::Nearest).unwrap();
        let back = decode_wire(&lossy, v.layout(), FloatWidth::F32).unwrap();
        assert_eq!(back.scales()[0], 0.1f32 as f64);
        assert!(encode_wire(&v, FloatWidth::F64).is_ok());
    }

    #[test]
    fn corrupted_streams() {
        let v = q(vec![4], vec![2.0], vec![0, 1, 0, 0]);
        let layout = v.layout().clone();
        let good = encode_wire(&v, FloatWidth::F32).unwrap();

        // Gap that jumps past the block end.
        let mut s = BitString::new();
        s.push_bits(2.0f32.to_bits() as u64, 32);
        push_gamma(&mut s, 6);
        assert!(matches!(
            decode_wire(&s, &layout, FloatWidth::F32),
            Err(Error::IndexOverflow { .. })
        ));

        let mut t = good.clone();
        t.truncate(good.len() - 1);
        assert!(matches!(
            decode_wire(&t, &layout, FloatWidth::F32),
            Err(Error::Truncated { .. })
        ));

        let mut e = good.clone();
        e.push(true);
        assert!(matches!(
            decode_wire(&e, &layout, FloatWidth::F32),
            Err(Error::TrailingBits { trailing: 1 })
        ));

        let mut z = BitString::new();
        z.push_bits(2.0f32.to_bits() as u64, 32);
        z.push_bits(0, 64);
        z.push_bits(1, 1);
        assert!(matches!(
            decode_wire(&z, &layout, FloatWidth::F32),
            Err(Error::MalformedCode { .. })
        ));

        let mut neg = BitString::new();
        neg.push_bits((-2.0f32).to_bits() as u64, 32);
        push_gamma(&mut neg, 5);
        assert!(matches!(
            decode_wire(&neg, &layout, FloatWidth::F32),
            Err(Error::InvalidScale { .. })
        ));
    }

    fn arb_quantized() -> impl Strategy<Value = (QuantizedVector, FloatWidth)> {
        (prop::collection::vec(1usize..9, 1..5), any::<bool>()).prop_flat_map(|(sizes, wide)| {
            let d: usize = sizes.iter().sum();
            let m = sizes.len();
            (
                Just(sizes),
                prop::collection::vec(prop_oneof![Just(0.0f64), (1e-6f64..1e6)], m),
                prop::collection::vec(-1i8..=1, d),
                Just(wide),
            )
                .prop_map(|(sizes, scales, mut signs, wide)| {
                    let layout = BlockLayout::new(sizes).unwrap();
                    let width = if wide {
                        FloatWidth::F64
                    } else {
                        FloatWidth::F32
                    };
                    let scales: Vec<f64> = scales
                        .into_iter()
                        .map(|s| if wide { s } else { s as f32 as f64 })
                        .collect();
                    for (range, &s) in layout.ranges().zip(&scales) {
                        if s == 0.0 {
                            signs[range].iter_mut().for_each(|x| *x = 0);
                        }
                    }
                    (
                        QuantizedVector::from_parts(layout, scales, signs).unwrap(),
                        width,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip((v, width) in arb_quantized()) {
            let bits = encode_wire(&v, width).unwrap();
            prop_assert_eq!(bits.len(), encoded_len(&v, width));
            let back = decode_wire(&bits, v.layout(), width).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn flipped_bits_never_panic((v, width) in arb_quantized(), pos in any::<prop::sample::Index>()) {
            let mut bits = encode_wire(&v, width).unwrap();
            bits.flip(pos.index(bits.len()));
            let _ = decode_wire(&bits, v.layout(), width);
        }
    }
}
