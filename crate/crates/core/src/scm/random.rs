use super::{rng_for, LinearScm};
use crate::error::ScmError;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomScmConfig {
    /// Total number of variables, response included.
    pub num_nodes: usize,
    /// Probability of each edge in the lower-triangular adjacency.
    pub edge_prob: f64,
    /// Coefficient magnitudes are uniform on this interval, with a random sign.
    pub coef_range: (f64, f64),
    /// Choose the response among nodes having at least one parent and one child.
    pub require_parent_and_child: bool,
}

impl Default for RandomScmConfig {
    fn default() -> Self {
        RandomScmConfig {
            num_nodes: 9,
            edge_prob: 0.5,
            coef_range: (0.5, 1.5),
            require_parent_and_child: true,
        }
    }
}

/// A generated model plus the causal position the response was drawn at.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScm {
    pub scm: LinearScm,
    pub response_position: usize,
}

/// Draw a random DAG in a fixed causal order, pick the response, and fill
/// in coefficients. Predictors keep their causal order, so `X_j` can only
/// have parents `X_i` with `i < j` (apart from the response).
pub fn random_scm(config: &RandomScmConfig, seed: u64) -> Result<RandomScm, ScmError> {
    let n = config.num_nodes;
    if n < 3 {
        return Err(ScmError::Invalid(format!("need at least 3 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&config.edge_prob) {
        return Err(ScmError::Invalid(format!("edge probability {} outside [0, 1]", config.edge_prob)));
    }
    let (lo, hi) = config.coef_range;
    if !(lo > 0.0 && lo <= hi) {
        return Err(ScmError::Invalid(format!("coefficient range ({lo}, {hi}) must satisfy 0 < lo <= hi")));
    }
    let mut rng = rng_for(seed, 0);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        // adj[i][j] for j < i means j -> i.
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            for cell in row.iter_mut().take(i) {
                *cell = rng.random_bool(config.edge_prob);
            }
        }
        let has_parent = |i: usize| adj[i].iter().any(|&e| e);
        let has_child = |j: usize| (0..n).any(|i| adj[i][j]);
        let eligible: Vec<usize> = if config.require_parent_and_child {
            (0..n).filter(|&i| has_parent(i) && has_child(i)).collect()
        } else {
            (0..n).collect()
        };
        if eligible.is_empty() {
            continue;
        }
        let y = eligible[rng.random_range(0..eligible.len())];
        let x_index = |node: usize| if node < y { node } else { node - 1 };

        let mut scm = LinearScm::empty(n - 1);
        for i in 0..n {
            for j in 0..i {
                if !adj[i][j] {
                    continue;
                }
                let mag = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                let w = if rng.random_bool(0.5) { mag } else { -mag };
                match (i == y, j == y) {
                    (true, false) => scm.beta[x_index(j)] = w,
                    (false, true) => scm.gamma[x_index(i)] = w,
                    (false, false) => scm.b[x_index(i)][x_index(j)] = w,
                    (true, true) => unreachable!(),
                }
            }
        }
        return Ok(RandomScm { scm, response_position: y });
    }
    Err(ScmError::Generation {
        attempts: MAX_GENERATION_ATTEMPTS,
        reason: "no node has both a parent and a child".into(),
    })
}
