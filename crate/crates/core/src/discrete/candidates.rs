use crate::nodeset::NodeSet;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A tuple `(k, R, S)`: match `E[Y | X_S]` against the prediction module `E[X_k | X_R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub k: usize,
    pub r: NodeSet,
    pub s: NodeSet,
}

impl Candidate {
    pub fn new(k: usize, r: NodeSet, s: NodeSet) -> Self {
        debug_assert!(!r.contains(k));
        Candidate { k, r, s }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, R={}, S={})", self.k, self.r, self.s)
    }
}

/// Caps on the exhaustive search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    #[serde(default)]
    pub max_s_size: Option<usize>,
    #[serde(default)]
    pub max_candidates: Option<usize>,
}

impl SearchLimits {
    pub const NONE: SearchLimits = SearchLimits { max_s_size: None, max_candidates: None };
}

/// All `(k, R, S)` with `S ⊆ {0..d}` and `R ⊆ S \ {k}`, ordered by `(k, S, R)`
/// where sets compare by their bitmask.
pub fn enumerate_candidates(d: usize, limits: SearchLimits) -> Vec<Candidate> {
    let cap = limits.max_candidates.unwrap_or(usize::MAX);
    let max_s = limits.max_s_size.unwrap_or(d);
    let mut out = Vec::new();
    for k in 0..d {
        for s in NodeSet::full(d).subsets() {
            if s.len() > max_s {
                continue;
            }
            for r in s.without(k).subsets() {
                if out.len() == cap {
                    return out;
                }
                out.push(Candidate::new(k, r, s));
            }
        }
    }
    out
}
