use super::LinearScm;
use crate::NodeSet;

/// Graph-level view of a model: parent, child and descendant sets plus the
/// sets used to restrict candidate searches when some predictors are
/// intervened.
///
/// Sets only contain predictor indices; whether `Y` lies downstream of a
/// predictor is exposed separately.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphView {
    d: usize,
    /// `parents[i]` for joint node `i` (`d` is the response).
    parents: Vec<NodeSet>,
    children: Vec<NodeSet>,
    y_children: Vec<bool>,
    y_parents: Vec<bool>,
    descendants: Vec<NodeSet>,
    y_is_descendant: Vec<bool>,
    pub intervened: NodeSet,
    pub pe: NodeSet,
    pub x_int_y: NodeSet,
}

impl GraphView {
    pub fn new(scm: &LinearScm, intervened: NodeSet) -> Self {
        let d = scm.d();
        let joint = scm.joint_matrix();
        let n = d + 1;
        let mut parents = vec![NodeSet::EMPTY; n];
        let mut children = vec![NodeSet::EMPTY; n];
        let mut y_children = vec![false; n];
        let mut y_parents = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                if joint[(i, j)] == 0.0 {
                    continue;
                }
                // edge j -> i
                if j < d {
                    parents[i].insert(j);
                } else {
                    y_parents[i] = true;
                }
                if i < d {
                    children[j].insert(i);
                } else {
                    y_children[j] = true;
                }
            }
        }

        let mut descendants = vec![NodeSet::EMPTY; n];
        let mut y_is_descendant = vec![false; n];
        for start in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                let next = children[v].iter().chain(y_children[v].then_some(d));
                for c in next {
                    if !seen[c] {
                        seen[c] = true;
                        stack.push(c);
                    }
                }
            }
            descendants[start] = (0..d).filter(|&c| seen[c]).collect();
            y_is_descendant[start] = seen[d];
        }

        let mut view = GraphView {
            d,
            parents,
            children,
            y_children,
            y_parents,
            descendants,
            y_is_descendant,
            intervened,
            pe: scm.varying_parents(),
            x_int_y: NodeSet::EMPTY,
        };
        view.x_int_y = view.x_int_of(d);
        view
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn parents_y(&self) -> NodeSet {
        self.parents[self.d]
    }

    pub fn children_y(&self) -> NodeSet {
        self.children[self.d]
    }

    pub fn descendants_y(&self) -> NodeSet {
        self.descendants[self.d]
    }

    /// Predictor parents of `X_j`.
    pub fn parents(&self, j: usize) -> NodeSet {
        self.parents[j]
    }

    /// Predictor children of `X_j`.
    pub fn children(&self, j: usize) -> NodeSet {
        self.children[j]
    }

    pub fn y_is_parent_of(&self, j: usize) -> bool {
        self.y_parents[j]
    }

    pub fn y_is_child_of(&self, j: usize) -> bool {
        self.y_children[j]
    }

    /// Predictor descendants of `X_j` (excluding `X_j`).
    pub fn descendants(&self, j: usize) -> NodeSet {
        self.descendants[j]
    }

    pub fn y_is_descendant_of(&self, j: usize) -> bool {
        self.y_is_descendant[j]
    }

    /// Markov blanket of `Y`: parents, children, and parents of children.
    pub fn markov_blanket_y(&self) -> NodeSet {
        let ch = self.children_y();
        let spouses = ch.iter().fold(NodeSet::EMPTY, |acc, c| acc.union(self.parents[c]));
        self.parents_y().union(ch).union(spouses)
    }

    /// Intervened children of node `i` together with their descendants.
    fn x_int_of(&self, i: usize) -> NodeSet {
        let hit = self.children[i].intersection(self.intervened);
        hit.iter().fold(hit, |acc, c| acc.union(self.descendants[c]))
    }

    /// Intervened children of `X_j` together with their descendants.
    pub fn x_int(&self, j: usize) -> NodeSet {
        self.x_int_of(j)
    }

    /// `Y` has at least one child.
    pub fn y_has_child(&self) -> bool {
        !self.children_y().is_empty()
    }

    /// `Y` has a child that is neither intervened nor downstream of an intervened child.
    pub fn has_stable_child(&self) -> bool {
        !self.children_y().difference(self.x_int_y).is_empty()
    }

    /// Predictor set for which the response is blocked from predictor interventions.
    pub fn stable_set(&self) -> NodeSet {
        NodeSet::full(self.d).difference(self.x_int_y)
    }

    /// Candidate `(k, R)` pairs whose prediction module matches the causal
    /// function when both predictors and response are intervened.
    pub fn matched_modules(&self) -> Vec<(usize, NodeSet)> {
        let all = NodeSet::full(self.d);
        let excluded = self.pe.union(self.x_int_y);
        (0..self.d)
            .filter(|&k| !excluded.contains(k))
            .map(|k| (k, all.without(k).difference(self.x_int(k).union(self.x_int_y))))
            .collect()
    }
}
