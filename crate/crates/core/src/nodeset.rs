//! Compact sets of predictor indices.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Maximum number of predictors a [`NodeSet`] can address.
pub const MAX_NODES: usize = 32;

/// A set of zero-based predictor indices stored as a bitmask.
///
/// Ordering follows the bitmask value, which is the canonical enumeration
/// order used by the candidate generators.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u32) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All predictors `0..d`.
    pub fn full(d: usize) -> Self {
        assert!(d <= MAX_NODES, "at most {MAX_NODES} predictors supported");
        if d == MAX_NODES {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << d) - 1)
        }
    }

    pub fn singleton(j: usize) -> Self {
        assert!(j < MAX_NODES);
        NodeSet(1 << j)
    }

    pub fn contains(self, j: usize) -> bool {
        j < MAX_NODES && self.0 & (1 << j) != 0
    }

    pub fn insert(&mut self, j: usize) {
        assert!(j < MAX_NODES);
        self.0 |= 1 << j;
    }

    pub fn with(self, j: usize) -> Self {
        let mut s = self;
        s.insert(j);
        s
    }

    pub fn without(self, j: usize) -> Self {
        if j < MAX_NODES {
            NodeSet(self.0 & !(1 << j))
        } else {
            self
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Largest member index plus one (0 for the empty set).
    pub fn span(self) -> usize {
        (u32::BITS - self.0.leading_zeros()) as usize
    }

    /// Every subset of `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = NodeSet> {
        let mask = self.0;
        // Enumerate submasks upwards: next = ((cur | !mask) + 1) & mask.
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            let succ = ((cur | !mask).wrapping_add(1)) & mask;
            next = if succ == 0 { None } else { Some(succ) };
            Some(NodeSet(cur))
        })
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = NodeSet::EMPTY;
        for j in iter {
            s.insert(j);
        }
        s
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for NodeSet {
    /// `{0;2;5}`, using `;` so the rendering is safe inside CSV cells.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = members.iter().find(|&&j| j >= MAX_NODES) {
            return Err(serde::de::Error::custom(format!(
                "node index {bad} exceeds the {MAX_NODES}-node limit"
            )));
        }
        Ok(members.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerate_all_in_order() {
        let s: NodeSet = [0, 2, 3].into_iter().collect();
        let subs: Vec<u32> = s.subsets().map(|x| x.bits()).collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.windows(2).all(|w| w[0] < w[1]));
        assert!(s.subsets().all(|x| x.is_subset(s)));
        assert_eq!(NodeSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn display_and_serde() {
        let s: NodeSet = [4, 1].into_iter().collect();
        assert_eq!(s.to_string(), "{1;4}");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[1,4]");
        let back: NodeSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn set_algebra() {
        let a: NodeSet = [0, 1].into_iter().collect();
        let b: NodeSet = [1, 2].into_iter().collect();
        assert_eq!(a.union(b).to_vec(), vec![0, 1, 2]);
        assert_eq!(a.intersection(b).to_vec(), vec![1]);
        assert_eq!(a.difference(b).to_vec(), vec![0]);
        assert_eq!(NodeSet::full(3).len(), 3);
        assert_eq!(b.span(), 3);
    }
}
