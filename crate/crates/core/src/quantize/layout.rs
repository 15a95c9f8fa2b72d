use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm power used to scale a quantized block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PNormRepr", into = "PNormRepr")]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub const ONE: PNorm = PNorm::Finite(1.0);
    pub const TWO: PNorm = PNorm::Finite(2.0);
    pub const INF: PNorm = PNorm::Infinity;

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidNorm(p));
        }
        if p.is_infinite() {
            Ok(PNorm::Infinity)
        } else {
            Ok(PNorm::Finite(p))
        }
    }

    /// The power as a float, `f64::INFINITY` for the max norm.
    pub fn value(self) -> f64 {
        match self {
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    /// `‖x‖_p` of a slice.
    ///
    /// Finite powers are evaluated relative to the largest magnitude so the
    /// result never falls below `max |x_j|`.
    pub fn norm(self, x: &[f64]) -> f64 {
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return 0.0;
        }
        match self {
            PNorm::Infinity => max,
            PNorm::Finite(p) if p == 1.0 => x.iter().map(|v| v.abs()).sum(),
            PNorm::Finite(p) if p == 2.0 => {
                let s: f64 = x.iter().map(|v| (v / max) * (v / max)).sum();
                max * s.sqrt()
            }
            PNorm::Finite(p) => {
                let s: f64 = x.iter().map(|v| (v.abs() / max).powf(p)).sum();
                max * s.powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::InvalidNorm(f64::NAN))?;
                PNorm::new(p)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PNormRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<PNormRepr> for PNorm {
    type Error = Error;

    fn try_from(r: PNormRepr) -> Result<Self> {
        match r {
            PNormRepr::Number(p) => PNorm::new(p),
            PNormRepr::Text(s) => s.parse(),
        }
    }
}

impl From<PNorm> for PNormRepr {
    fn from(p: PNorm) -> Self {
        match p {
            PNorm::Finite(v) => PNormRepr::Number(v),
            PNorm::Infinity => PNormRepr::Text("inf".into()),
        }
    }
}

/// Partition of `0..total_dim` into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidLayout("no blocks".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidLayout(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(BlockLayout { sizes, offsets })
    }

    /// One block covering all `dim` coordinates.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    /// Blocks of `block` coordinates; the last block takes the remainder.
    pub fn uniform(dim: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::InvalidLayout("block size 0".into()));
        }
        let mut sizes = vec![block; dim / block];
        if dim % block != 0 {
            sizes.push(dim % block);
        }
        Self::new(sizes)
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Largest block size.
    pub fn max_block(&self) -> usize {
        self.sizes.iter().copied().max().unwrap()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }
}

impl TryFrom<Vec<usize>> for BlockLayout {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        BlockLayout::new(sizes)
    }
}

impl From<BlockLayout> for Vec<usize> {
    fn from(l: BlockLayout) -> Self {
        l.sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets() {
        let l = BlockLayout::uniform(10, 4).unwrap();
        assert_eq!(l.sizes(), &[4, 4, 2]);
        assert_eq!(l.range(2), 8..10);
        assert_eq!(l.total_dim(), 10);
        assert_eq!(l.max_block(), 4);
        assert!(BlockLayout::new(vec![3, 0]).is_err());
        assert!(BlockLayout::new(vec![]).is_err());
    }

    #[test]
    fn norms() {
        let x = [3.0, -4.0];
        assert_eq!(PNorm::ONE.norm(&x), 7.0);
        assert_eq!(PNorm::TWO.norm(&x), 5.0);
        assert_eq!(PNorm::INF.norm(&x), 4.0);
        let p3 = PNorm::new(3.0).unwrap().norm(&x);
        assert!((p3 - (27.0f64 + 64.0).cbrt()).abs() < 1e-12);
        assert!(PNorm::new(0.5).is_err());
        assert_eq!(PNorm::new(f64::INFINITY).unwrap(), PNorm::INF);
    }

    #[test]
    fn finite_norm_dominates_max() {
        for p in [1.0, 1.5, 2.0, 7.0, 300.0] {
            let x = [1e-3, 0.7, -0.69999, 1e-300];
            assert!(PNorm::new(p).unwrap().norm(&x) >= 0.7);
        }
    }

    #[test]
    fn parse_pnorm() {
        assert_eq!("inf".parse::<PNorm>().unwrap(), PNorm::INF);
        assert_eq!("2".parse::<PNorm>().unwrap(), PNorm::TWO);
        assert!("0.3".parse::<PNorm>().is_err());
    }
}
