use crate::discrete::SearchLimits;
use crate::nodeset::NodeSet;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A continuous-environment candidate `(P, k, R, S)`.
///
/// `X_P` enters with varying coefficients; `X_{S\P}` and `X_{R\P}` enter
/// with constant coefficients on the response and prediction-module sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContCandidate {
    pub p: NodeSet,
    pub k: usize,
    pub r: NodeSet,
    pub s: NodeSet,
}

impl ContCandidate {
    pub fn new(p: NodeSet, k: usize, r: NodeSet, s: NodeSet) -> Self {
        ContCandidate { p, k, r, s }
    }

    pub fn is_valid(&self) -> bool {
        !self.p.is_empty()
            && !self.p.contains(self.k)
            && !self.r.contains(self.k)
            && self.p.is_subset(self.r)
            && self.r.is_subset(self.s)
    }

    /// Constant-coefficient columns on the response side.
    pub fn z(&self) -> NodeSet {
        self.s.difference(self.p)
    }

    /// Constant-coefficient columns on the prediction-module side.
    pub fn z_v(&self) -> NodeSet {
        self.r.difference(self.p)
    }
}

impl fmt::Display for ContCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(P={}, k={}, R={}, S={})", self.p, self.k, self.r, self.s)
    }
}

/// All valid `(P, k, R, S)` ordered by `(P, k, S, R)` bitmask values.
/// `P = ∅` is never emitted.
pub fn enumerate_candidates_cont(d: usize, limits: SearchLimits) -> Vec<ContCandidate> {
    let cap = limits.max_candidates.unwrap_or(usize::MAX);
    let max_s = limits.max_s_size.unwrap_or(d);
    let full = NodeSet::full(d);
    let mut out = Vec::new();
    for p in full.subsets().filter(|p| !p.is_empty()) {
        for k in (0..d).filter(|&k| !p.contains(k)) {
            // S = P ∪ extra with extra ⊆ complement of P.
            for extra in full.difference(p).subsets() {
                let s = p.union(extra);
                if s.len() > max_s {
                    continue;
                }
                for r_extra in extra.without(k).subsets() {
                    if out.len() == cap {
                        return out;
                    }
                    out.push(ContCandidate::new(p, k, p.union(r_extra), s));
                }
            }
        }
    }
    out
}
