//! Random models and intervention plans for the simulated experiments.

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::ScmError;
use crate::nodeset::NodeSet;
use crate::scm::{random_scm, EnvId, Edit, GraphView, InterventionSpec, LinearScm, Node, RandomScmConfig, Value};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A model with one intervention spec per training and test environment.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTask {
    pub scm: LinearScm,
    pub train: Vec<InterventionSpec>,
    pub test: Vec<InterventionSpec>,
    pub intervened_x: NodeSet,
    /// Parents of `Y` whose coefficients are perturbed.
    pub varying_parents: NodeSet,
}

/// A model with `u`-indexed edits for the training and test ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTask {
    pub scm: LinearScm,
    pub train_edits: Vec<Edit>,
    pub test_edits: Vec<Edit>,
    pub intervened_x: NodeSet,
    pub varying_parents: NodeSet,
}

/// Why a draw was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Generation(ScmError),
    /// Every child of `Y` would be intervened or downstream of an intervened child.
    NoStableChild,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn draw_model(config: &ExperimentConfig, num_nodes: usize, rng: &mut ChaCha8Rng) -> Result<LinearScm, Rejection> {
    let rc = RandomScmConfig { num_nodes, edge_prob: config.edge_prob, ..RandomScmConfig::default() };
    random_scm(&rc, rng.random()).map(|r| r.scm).map_err(Rejection::Generation)
}

fn choose(rng: &mut ChaCha8Rng, from: NodeSet, count: usize) -> NodeSet {
    let pool = from.to_vec();
    let count = count.min(pool.len());
    sample_indices(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect()
}

/// Pick `count` predictors to intervene on, keeping a child of `Y` that is
/// neither intervened nor downstream of an intervened child.
fn choose_stable_targets(scm: &LinearScm, count: usize, attempts: usize, rng: &mut ChaCha8Rng) -> Result<NodeSet, Rejection> {
    let all = NodeSet::full(scm.d());
    for _ in 0..attempts.max(1) {
        let targets = choose(rng, all, count);
        if GraphView::new(scm, targets).has_stable_child() {
            return Ok(targets);
        }
    }
    Err(Rejection::NoStableChild)
}

fn response_parents(scm: &LinearScm) -> NodeSet {
    (0..scm.d()).filter(|&j| scm.response_coef(j) != 0.0).collect()
}

/// Draw `n_p ~ Unif{1, …, |PA(Y)|}` parents of `Y`.
fn choose_varying_parents(scm: &LinearScm, rng: &mut ChaCha8Rng) -> NodeSet {
    let pa = response_parents(scm);
    if pa.is_empty() {
        return NodeSet::EMPTY;
    }
    let n_p = rng.random_range(1..=pa.len());
    choose(rng, pa, n_p)
}

/// Build one draw of the discrete recipes `discrete_x`, `discrete_y` and `discrete_xy`.
pub fn discrete_task(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<DiscreteTask, Rejection> {
    let scm = draw_model(config, config.num_nodes, rng)?;
    let kind = config.kind;
    let intervened_x = match kind {
        ExperimentKind::DiscreteX => choose(rng, NodeSet::full(scm.d()), config.intervened_x),
        ExperimentKind::DiscreteXy => choose_stable_targets(&scm, config.intervened_x, 20, rng)?,
        _ => NodeSet::EMPTY,
    };
    let varying_parents = match kind {
        ExperimentKind::DiscreteY | ExperimentKind::DiscreteXy => choose_varying_parents(&scm, rng),
        _ => NodeSet::EMPTY,
    };
    let intervene_y = kind != ExperimentKind::DiscreteX;
    let env = |label: String, range: (f64, f64), rng: &mut ChaCha8Rng| {
        let mut edits: Vec<Edit> = intervened_x.iter().map(|j| Edit::shift(Node::X(j), uniform(rng, range))).collect();
        if intervene_y {
            edits.extend(varying_parents.iter().map(|j| Edit::coefficient(Node::Y, Node::X(j), uniform(rng, range))));
            edits.push(Edit::shift(Node::Y, uniform(rng, range)));
        }
        InterventionSpec::new(EnvId::discrete(label), edits)
    };
    let train = (0..config.train_envs).map(|e| env(format!("train{e}"), config.train_range, rng)).collect();
    let test = (0..config.test_envs).map(|e| env(format!("test{e}"), config.test_range, rng)).collect();
    Ok(DiscreteTask { scm, train, test, intervened_x, varying_parents })
}

/// Build one draw of the continuous recipe: `a sin(2π w u)` perturbations on
/// shifts of the intervened predictors, on coefficients of the chosen parents
/// of `Y` and on the shift of `Y`, with one frequency `w` per parameter.
pub fn continuous_task(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<ContinuousTask, Rejection> {
    let cs = &config.continuous;
    let scm = draw_model(config, cs.num_nodes, rng)?;
    let intervened_x = choose_stable_targets(&scm, cs.intervened_x, 20, rng)?;
    let varying_parents = choose_varying_parents(&scm, rng);
    // Each perturbed parameter: the edit with a unit amplitude and its frequency.
    let mut plan: Vec<(Node, Option<Node>, f64)> = Vec::new();
    for j in intervened_x.iter() {
        plan.push((Node::X(j), None, uniform(rng, cs.frequency)));
    }
    for j in varying_parents.iter() {
        plan.push((Node::Y, Some(Node::X(j)), uniform(rng, cs.frequency)));
    }
    plan.push((Node::Y, None, uniform(rng, cs.frequency)));
    let edits = |amplitude: f64| -> Vec<Edit> {
        plan.iter()
            .map(|&(target, parent, frequency)| {
                let v = Value::Sinusoid { amplitude, frequency };
                match parent {
                    Some(p) => Edit::coefficient(target, p, v),
                    None => Edit::shift(target, v),
                }
            })
            .collect()
    };
    Ok(ContinuousTask {
        train_edits: edits(cs.amplitude_train),
        test_edits: edits(cs.amplitude_test),
        scm,
        intervened_x,
        varying_parents,
    })
}

/// Unit-scale perturbations of one environment in the robustness recipe.
#[derive(Debug, Clone, PartialEq)]
struct EnvDraw {
    /// Edits of every node other than the protected child.
    fixed: Vec<Edit>,
    /// Shift and coefficient draws on `[-1, 1]` and a variance draw on `[-1, 1]`
    /// for the protected child, scaled by `λ` later.
    child_shift: f64,
    child_coefs: Vec<(Node, f64)>,
    child_var: f64,
}

/// The robustness recipe: every parameter of every node is perturbed except
/// those of the earliest child of `Y` in causal order, which is perturbed
/// with strength `λ`. One task per `λ`, sharing the model and all draws.
pub fn robustness_tasks(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, DiscreteTask)>, Rejection> {
    let rs = &config.robustness;
    let scm = draw_model(config, config.num_nodes, rng)?;
    let d = scm.d();
    let graph = GraphView::new(&scm, NodeSet::EMPTY);
    // Predictors keep their causal order, so the smallest index is the earliest child.
    let protected = graph.children_y().iter().next().ok_or(Rejection::NoStableChild)?;
    let incoming = |node: Node| -> Vec<Node> {
        match node {
            Node::Y => (0..d).filter(|&j| scm.response_coef(j) != 0.0).map(Node::X).collect(),
            Node::X(i) => {
                let mut v: Vec<Node> = (0..d).filter(|&j| scm.b[i][j] != 0.0).map(Node::X).collect();
                if scm.gamma[i] != 0.0 {
                    v.push(Node::Y);
                }
                v
            }
        }
    };
    let others: Vec<Node> = (0..d).filter(|&j| j != protected).map(Node::X).chain([Node::Y]).collect();
    let child_parents = incoming(Node::X(protected));
    let draw_env = |range: (f64, f64), var: (f64, f64), rng: &mut ChaCha8Rng| {
        let mut fixed = Vec::new();
        for &node in &others {
            fixed.push(Edit::shift(node, uniform(rng, range)));
            for parent in incoming(node) {
                fixed.push(Edit::coefficient(node, parent, uniform(rng, range)));
            }
            fixed.push(Edit::noise_variance(node, uniform(rng, var)));
        }
        EnvDraw {
            fixed,
            child_shift: uniform(rng, (-1.0, 1.0)),
            child_coefs: child_parents.iter().map(|&p| (p, uniform(rng, (-1.0, 1.0)))).collect(),
            child_var: uniform(rng, (-1.0, 1.0)),
        }
    };
    let train: Vec<EnvDraw> = (0..config.train_envs).map(|_| draw_env(rs.train_range, rs.noise_var_train, rng)).collect();
    let test: Vec<EnvDraw> = (0..config.test_envs).map(|_| draw_env(rs.test_range, rs.noise_var_test, rng)).collect();

    let half_width = |r: (f64, f64)| 0.5 * (r.1 - r.0);
    let centre = |r: (f64, f64)| 0.5 * (r.1 + r.0);
    let specs = |draws: &[EnvDraw], prefix: &str, range: (f64, f64), var: (f64, f64), lambda: f64| -> Vec<InterventionSpec> {
        let (scale, var_scale) = (lambda * half_width(range), lambda * half_width(var));
        draws
            .iter()
            .enumerate()
            .map(|(e, dr)| {
                let mut edits = dr.fixed.clone();
                let child = Node::X(protected);
                edits.push(Edit::shift(child, lambda * centre(range) + scale * dr.child_shift));
                for &(p, u) in &dr.child_coefs {
                    edits.push(Edit::coefficient(child, p, lambda * centre(range) + scale * u));
                }
                edits.push(Edit::noise_variance(child, 1.0 + var_scale * dr.child_var));
                InterventionSpec::new(EnvId::discrete(format!("{prefix}{e}")), edits)
            })
            .collect()
    };
    let intervened_x = NodeSet::full(d).without(protected);
    let varying_parents = response_parents(&scm);
    Ok(rs
        .lambdas
        .iter()
        .map(|&lambda| {
            let task = DiscreteTask {
                scm: scm.clone(),
                train: specs(&train, "train", rs.train_range, rs.noise_var_train, lambda),
                test: specs(&test, "test", rs.test_range, rs.noise_var_test, lambda),
                intervened_x,
                varying_parents,
            };
            (lambda, task)
        })
        .collect())
}
