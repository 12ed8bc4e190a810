//! Fixed-width bitmask subsets of the message index range `[1:K]`.
//!
//! Message indices are 1-based externally (matching the usual convention for
//! retrieval problems) and 0-based in the underlying bits. The canonical
//! order on subsets is ascending numeric mask value, which fixes a
//! deterministic variable indexing across the whole pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default (and maximum) number of supported message indices. Variable
/// counts downstream grow as `2^K`, so the cap is deliberately small.
pub const MAX_MESSAGES: u32 = 24;

/// A subset of `[1:K]` stored as a bitmask; bit `i` (0-based) holds message
/// `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// The full set `[1:k]`.
    pub fn full(k: u32) -> Self {
        debug_assert!(k <= MAX_MESSAGES);
        if k == 0 {
            SubsetMask(0)
        } else {
            SubsetMask(u32::MAX >> (32 - k))
        }
    }

    /// Singleton `{i}` with 1-based `i`.
    pub fn singleton(i: u32) -> Self {
        debug_assert!((1..=MAX_MESSAGES).contains(&i));
        SubsetMask(1 << (i - 1))
    }

    /// Build from 1-based indices.
    pub fn from_indices(indices: &[u32]) -> Self {
        let mut m = 0u32;
        for &i in indices {
            debug_assert!((1..=MAX_MESSAGES).contains(&i));
            m |= 1 << (i - 1);
        }
        SubsetMask(m)
    }

    /// 1-based indices in ascending order.
    pub fn indices(self) -> Vec<u32> {
        self.iter().collect()
    }

    pub fn iter(self) -> impl Iterator<Item = u32> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros();
                bits &= bits - 1;
                Some(i + 1)
            }
        })
    }

    pub fn card(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: u32) -> bool {
        debug_assert!((1..=MAX_MESSAGES).contains(&i));
        self.0 & (1 << (i - 1)) != 0
    }

    pub fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersect(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 & other.0)
    }

    pub fn diff(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, i: u32) -> SubsetMask {
        self.union(SubsetMask::singleton(i))
    }

    pub fn without(self, i: u32) -> SubsetMask {
        self.diff(SubsetMask::singleton(i))
    }

    /// All subsets of `self` in ascending mask order (the empty set first).
    pub fn submasks(self) -> impl Iterator<Item = SubsetMask> {
        let m = self.0;
        let mut cur = Some(0u32);
        std::iter::from_fn(move || {
            let s = cur?;
            cur = if s == m {
                None
            } else {
                Some(s.wrapping_sub(m) & m)
            };
            Some(SubsetMask(s))
        })
    }

    /// Nonempty subsets of `self` in ascending mask order.
    pub fn nonempty_submasks(self) -> impl Iterator<Item = SubsetMask> {
        self.submasks().filter(|s| !s.is_empty())
    }

    /// Subsets of `self` with exactly `l` elements, ascending mask order.
    pub fn submasks_of_size(self, l: u32) -> impl Iterator<Item = SubsetMask> {
        self.submasks().filter(move |s| s.card() == l)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_set_algebra() {
        let a = SubsetMask::from_indices(&[1, 3]);
        let b = SubsetMask::from_indices(&[3, 4]);
        assert_eq!(a.card(), 2);
        assert_eq!(a.union(b), SubsetMask::from_indices(&[1, 3, 4]));
        assert_eq!(a.intersect(b), SubsetMask::singleton(3));
        assert_eq!(a.diff(b), SubsetMask::singleton(1));
        assert!(SubsetMask::singleton(3).is_subset_of(a));
        assert!(!a.is_subset_of(b));
        assert_eq!(a.indices(), vec![1, 3]);
        assert_eq!(format!("{a}"), "{1,3}");
        assert_eq!(SubsetMask::full(5), SubsetMask::from_indices(&[1, 2, 3, 4, 5]));
    }

    #[test]
    fn submask_enumeration_is_ascending_and_complete() {
        let m = SubsetMask::from_indices(&[1, 3, 4]);
        let subs: Vec<u32> = m.submasks().map(|s| s.0).collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.windows(2).all(|w| w[0] < w[1]));
        for s in m.submasks() {
            assert!(s.is_subset_of(m));
        }
        assert_eq!(m.submasks_of_size(2).count(), 3);
        assert_eq!(m.nonempty_submasks().count(), 7);
        assert_eq!(SubsetMask::EMPTY.submasks().count(), 1);
    }
}
