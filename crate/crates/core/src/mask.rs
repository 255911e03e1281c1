//! Nonempty index subsets of `[n]` stored as bitmasks.
//!
//! Bit `i` corresponds to zero-based index `i`; rendering is one-based
//! (`{1,5}` is bits 0 and 4).

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest dimension a mask can address.
pub const MAX_MASK_DIM: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SubsetMask {
    bits: u64,
    n: usize,
}

impl SubsetMask {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_MASK_DIM || bits >> n != 0 {
            return Err(Error::MaskOutOfRange { bits, n });
        }
        if bits == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Self { bits, n })
    }

    /// Caller guarantees `0 < bits < 2^n`.
    pub(crate) fn from_bits_unchecked(bits: u64, n: usize) -> Self {
        debug_assert!(bits != 0 && bits >> n == 0);
        Self { bits, n }
    }

    /// Zero-based indices.
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i >= n || i >= MAX_MASK_DIM {
                return Err(Error::MaskOutOfRange { bits: 1u64 << i.min(63), n });
            }
            bits |= 1 << i;
        }
        Self::new(bits, n)
    }

    /// One-based indices, as subsets are written in tables.
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::ParseMask(format!("{indices:?}")));
        }
        let zero: Vec<usize> = indices.iter().map(|i| i - 1).collect();
        Self::from_indices(&zero, n)
    }

    pub fn full(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_MASK_DIM {
            return Err(Error::MaskOutOfRange { bits: 0, n });
        }
        Self::new(low_bits(n), n)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cardinality.
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.bits >> i & 1 == 1
    }

    /// Zero-based indices in ascending order.
    pub fn indices(&self) -> Indices {
        Indices { bits: self.bits }
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices().map(|i| i + 1).collect()
    }

    /// Size of the symmetric difference.
    pub fn distance(&self, other: &SubsetMask) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.bits & !other.bits == 0
    }

    /// Re-expresses `self` in the coordinates of the principal submatrix
    /// indexed by `outer` (position `k` = k-th smallest index of `outer`).
    pub fn reindex_within(&self, outer: &SubsetMask) -> Result<SubsetMask> {
        if !self.is_subset_of(outer) || self.n != outer.n {
            return Err(Error::InvalidArgument(format!("{self} is not contained in {outer}")));
        }
        let mut bits = 0u64;
        for (pos, idx) in outer.indices().enumerate() {
            if self.contains(idx) {
                bits |= 1 << pos;
            }
        }
        SubsetMask::new(bits, outer.len())
    }
}

pub(crate) fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub struct Indices {
    bits: u64,
}

impl Iterator for Indices {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.bits == 0 {
            return None;
        }
        let i = self.bits.trailing_zeros() as usize;
        self.bits &= self.bits - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let c = self.bits.count_ones() as usize;
        (c, Some(c))
    }
}

impl ExactSizeIterator for Indices {}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// Parses `"{1,5}"` / `"1,5"` (one-based) against a dimension.
pub fn parse_subset(s: &str, n: usize) -> Result<SubsetMask> {
    s.parse::<SubsetSpec>()?.with_dim(n)
}

/// Dimension-free parse result; bind it with [`SubsetSpec::with_dim`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSpec(pub Vec<usize>);

impl FromStr for SubsetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        let idx = inner
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<usize>().map_err(|_| Error::ParseMask(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubsetSpec(idx))
    }
}

impl SubsetSpec {
    pub fn with_dim(&self, n: usize) -> Result<SubsetMask> {
        SubsetMask::from_one_based(&self.0, n)
    }
}

impl Serialize for SubsetMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SubsetMask", 2)?;
        st.serialize_field("mask_bits", &self.bits)?;
        st.serialize_field("subset", &self.to_string())?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_one_based() {
        let m = SubsetMask::from_indices(&[0, 4], 6).unwrap();
        assert_eq!(m.bits(), 17);
        assert_eq!(m.to_string(), "{1,5}");
        assert_eq!(parse_subset("{1,5}", 6).unwrap(), m);
        assert_eq!("{1, 5}".parse::<SubsetSpec>().unwrap().with_dim(6).unwrap(), m);
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(matches!(SubsetMask::new(0, 3), Err(Error::EmptyMask)));
        assert!(SubsetMask::new(8, 3).is_err());
        assert!(SubsetMask::from_one_based(&[0], 3).is_err());
        assert!(parse_subset("{}", 3).is_err());
    }

    #[test]
    fn reindex() {
        let outer = SubsetMask::from_one_based(&[2, 4, 5], 6).unwrap();
        let inner = SubsetMask::from_one_based(&[2, 5], 6).unwrap();
        assert_eq!(inner.reindex_within(&outer).unwrap().one_based(), vec![1, 3]);
        let bad = SubsetMask::from_one_based(&[1], 6).unwrap();
        assert!(bad.reindex_within(&outer).is_err());
    }

    #[test]
    fn distance_and_len() {
        let a = SubsetMask::from_one_based(&[1, 5], 6).unwrap();
        let b = SubsetMask::from_one_based(&[1, 4, 5], 6).unwrap();
        assert_eq!(a.distance(&b), 1);
        assert_eq!(b.len(), 3);
        assert!(a.is_subset_of(&b));
    }
}
