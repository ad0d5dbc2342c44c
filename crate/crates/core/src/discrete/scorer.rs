//! Candidate scoring from per-environment Gram matrices.
//!
//! Every regression in the discrete search is linear in the columns of
//! `Z_e = [X_e, 1, Y_e]`, so all fits and residual norms follow from the
//! small matrices `Z_eᵀZ_e`. Per-environment fits of `Y` on `X_S` and of
//! `X_k` on `X_R` are computed once and shared across candidates.

use super::candidates::Candidate;
use crate::data::Panel;
use crate::estimators::invariance::{invariance_pvalue_from_groups, GroupMoments};
use crate::linalg::{SmallCholesky, GRAM_REL_TOL};
use crate::nodeset::NodeSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Scores of one candidate. Coefficient vectors are laid out as
/// `[coefficients on S in increasing index order, λ, intercept]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    pub feasible: bool,
    /// Mean squared residual of the matching regression.
    pub t: f64,
    /// Invariance p-value of the residuals of `Y` on `[X_S, L̂_2, 1]`.
    pub p_inv: f64,
    /// In-sample pooled MSE of the predictor `f`.
    pub s_pred: f64,
    /// Matching parameter `(η, λ, b)`.
    pub theta: Vec<f64>,
    /// Coefficients of the predictor `f` on `[X_S, L̂_2, 1]`.
    pub phi: Vec<f64>,
}

impl CandidateScore {
    fn infeasible(candidate: Candidate) -> Self {
        CandidateScore {
            candidate,
            feasible: false,
            t: f64::NAN,
            p_inv: f64::NAN,
            s_pred: f64::NAN,
            theta: Vec::new(),
            phi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct EnvGram {
    n: usize,
    g: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ModuleFit {
    v: Vec<f64>,
    gv: Vec<f64>,
    q: f64,
}

/// Per-environment fits of one module with their sums over environments.
#[derive(Debug, Clone)]
struct Module {
    fits: Vec<ModuleFit>,
    sum_gv: Vec<f64>,
    sum_q: f64,
}

impl Module {
    fn new(fits: Vec<ModuleFit>, p: usize) -> Self {
        let mut sum_gv = vec![0.0; p];
        for f in &fits {
            sum_gv.iter_mut().zip(&f.gv).for_each(|(a, b)| *a += b);
        }
        let sum_q = fits.iter().map(|f| f.q).sum();
        Module { fits, sum_gv, sum_q }
    }
}

/// Reusable buffers for the pooled normal equations.
#[derive(Debug, Default)]
struct Scratch {
    mm: Vec<f64>,
    rt: Vec<f64>,
    rf: Vec<f64>,
    /// Right-hand sides before the solve.
    rt0: Vec<f64>,
    rf0: Vec<f64>,
    cols: Vec<usize>,
    chol: SmallCholesky,
}

/// Gram-based scorer over a fixed panel (or a row resample of it).
#[derive(Debug, Clone)]
pub struct GramScorer {
    d: usize,
    envs: Vec<EnvGram>,
    pooled: Vec<f64>,
    n: usize,
    l1: BTreeMap<u32, Option<Module>>,
    l2: BTreeMap<(usize, u32), Option<Module>>,
}

fn env_gram(panel: &Panel, e: usize, rows: Option<&[usize]>) -> EnvGram {
    let env = &panel.envs[e];
    let d = panel.d();
    let p = d + 2;
    let mut g = vec![0.0; p * p];
    let mut z = vec![0.0; p];
    let mut add = |i: usize| {
        for j in 0..d {
            z[j] = env.x[(i, j)];
        }
        z[d] = 1.0;
        z[d + 1] = env.y[i];
        for a in 0..p {
            let za = z[a];
            for b in a..p {
                g[a * p + b] += za * z[b];
            }
        }
    };
    let n = match rows {
        Some(rows) => {
            rows.iter().for_each(|&i| add(i));
            rows.len()
        }
        None => {
            (0..env.n()).for_each(&mut add);
            env.n()
        }
    };
    for a in 0..p {
        for b in 0..a {
            g[a * p + b] = g[b * p + a];
        }
    }
    EnvGram { n, g }
}

fn module_fit(eg: &EnvGram, p: usize, cols: &[usize], target: usize) -> Option<ModuleFit> {
    let m = cols.len();
    if eg.n <= m {
        return None;
    }
    let a: Vec<f64> = cols.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| eg.g[i * p + j]).collect();
    let mut chol = SmallCholesky::default();
    chol.factor(&a, m, GRAM_REL_TOL).ok()?;
    let mut c: Vec<f64> = cols.iter().map(|&i| eg.g[i * p + target]).collect();
    chol.solve(&mut c);
    let mut v = vec![0.0; p];
    for (&i, ci) in cols.iter().zip(&c) {
        v[i] = *ci;
    }
    let gv = mat_vec(&eg.g, &v, p);
    let q = dot(&v, &gv);
    Some(ModuleFit { v, gv, q })
}

fn mat_vec(g: &[f64], v: &[f64], p: usize) -> Vec<f64> {
    (0..p).map(|a| dot(&g[a * p..(a + 1) * p], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GramScorer {
    /// Scorer over the full panel, with module caches for `candidates`.
    pub fn new(panel: &Panel, candidates: &[Candidate]) -> Self {
        Self::build(panel, None, candidates)
    }

    /// Scorer over the listed rows of each environment.
    pub fn from_rows(panel: &Panel, rows: &[Vec<usize>], candidates: &[Candidate]) -> Self {
        Self::build(panel, Some(rows), candidates)
    }

    fn build(panel: &Panel, rows: Option<&[Vec<usize>]>, candidates: &[Candidate]) -> Self {
        let d = panel.d();
        let p = d + 2;
        let envs: Vec<EnvGram> = (0..panel.envs.len())
            .map(|e| env_gram(panel, e, rows.map(|r| r[e].as_slice())))
            .collect();
        let mut pooled = vec![0.0; p * p];
        for eg in &envs {
            for (acc, v) in pooled.iter_mut().zip(&eg.g) {
                *acc += v;
            }
        }
        let n = envs.iter().map(|e| e.n).sum();
        let s_keys: BTreeSet<u32> = candidates.iter().map(|c| c.s.bits()).collect();
        let r_keys: BTreeSet<(usize, u32)> = candidates.iter().map(|c| (c.k, c.r.bits())).collect();
        let fit_all = |set: NodeSet, target: usize| -> Option<Module> {
            let mut cols = set.to_vec();
            cols.push(d);
            let fits: Option<Vec<ModuleFit>> = envs.iter().map(|eg| module_fit(eg, p, &cols, target)).collect();
            fits.map(|f| Module::new(f, p))
        };
        let l1 = s_keys.into_iter().map(|s| (s, fit_all(NodeSet::from_bits(s), d + 1))).collect();
        let l2 = r_keys.into_iter().map(|(k, r)| ((k, r), fit_all(NodeSet::from_bits(r), k))).collect();
        GramScorer { d, envs, pooled, n, l1, l2 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Score every candidate; the output order matches the input order.
    pub fn score_all(&self, candidates: &[Candidate], with_pinv: bool) -> Vec<CandidateScore> {
        candidates.par_iter().map(|c| self.score(c, with_pinv)).collect()
    }

    /// Assemble and factor the pooled normal equations of the matching
    /// regression (`rt`) and the predictor regression (`rf`). The design
    /// columns are `X_S` in increasing index order, then `L̂_2`, then the constant.
    fn normal_equations<'a>(&'a self, c: &Candidate, sc: &mut Scratch) -> Option<(&'a Module, &'a Module)> {
        let d = self.d;
        let p = d + 2;
        let (one, yi) = (d, d + 1);
        let ns = c.s.len();
        let m = ns + 2;
        if self.envs.iter().any(|e| e.n <= ns.max(c.r.len()) + 2) {
            return None;
        }
        let (Some(Some(l1)), Some(Some(l2))) = (self.l1.get(&c.s.bits()), self.l2.get(&(c.k, c.r.bits()))) else {
            return None;
        };
        sc.cols.clear();
        sc.cols.extend(c.s.iter());
        sc.cols.push(usize::MAX);
        sc.cols.push(one);
        sc.mm.clear();
        sc.mm.resize(m * m, 0.0);
        sc.rt.clear();
        sc.rf.clear();
        for a in 0..m {
            let ca = sc.cols[a];
            for b in 0..m {
                let cb = sc.cols[b];
                sc.mm[a * m + b] = match (a == ns, b == ns) {
                    (false, false) => self.pooled[ca * p + cb],
                    (true, false) => l2.sum_gv[cb],
                    (false, true) => l2.sum_gv[ca],
                    (true, true) => l2.sum_q,
                };
            }
            if a == ns {
                sc.rt.push(l1.fits.iter().zip(&l2.fits).map(|(f1, f2)| dot(&f2.v, &f1.gv)).sum());
                sc.rf.push(l2.sum_gv[yi]);
            } else {
                sc.rt.push(l1.sum_gv[ca]);
                sc.rf.push(self.pooled[ca * p + yi]);
            }
        }
        sc.chol.factor(&sc.mm, m, GRAM_REL_TOL).ok()?;
        sc.rt0.clone_from(&sc.rt);
        sc.rf0.clone_from(&sc.rf);
        sc.chol.solve(&mut sc.rt);
        sc.chol.solve(&mut sc.rf);
        Some((l1, l2))
    }

    /// `(T, s_pred)` from the normal equations alone: at the least-squares
    /// solution the residual sum of squares is `q − rᵀθ`.
    fn fast_scores(&self, c: &Candidate, sc: &mut Scratch) -> Option<(f64, f64)> {
        let (l1, _) = self.normal_equations(c, sc)?;
        let yi = self.d + 1;
        let t = l1.sum_q - dot(&sc.rt0, &sc.rt);
        let sse = self.pooled[yi * (self.d + 2) + yi] - dot(&sc.rf0, &sc.rf);
        let n = self.n as f64;
        Some((t.max(0.0) / n, sse.max(0.0) / n))
    }

    /// Per-round minima of `T` and `s_pred` over `candidates`, or `None` when
    /// no candidate is feasible.
    pub fn minima(&self, candidates: &[Candidate]) -> Option<(f64, f64)> {
        let (t, sp) = candidates
            .par_iter()
            .map_init(Scratch::default, |sc, c| self.fast_scores(c, sc))
            .flatten()
            .reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| (a.0.min(b.0), a.1.min(b.1)));
        t.is_finite().then_some((t, sp))
    }

    pub fn score(&self, c: &Candidate, with_pinv: bool) -> CandidateScore {
        let mut sc = Scratch::default();
        let Some((l1, l2)) = self.normal_equations(c, &mut sc) else {
            return CandidateScore::infeasible(*c);
        };
        let (l1, l2) = (&l1.fits, &l2.fits);
        let p = self.d + 2;
        let (one, yi) = (self.d, self.d + 1);
        let ns = c.s.len();
        let m = ns + 2;
        let col = |j: usize| sc.cols[j];
        let theta = std::mem::take(&mut sc.rt);
        let phi = std::mem::take(&mut sc.rf);

        let mut t_sum = 0.0;
        let mut sse = 0.0;
        let mut groups = Vec::with_capacity(self.envs.len());
        let mut w = vec![0.0; p];
        let mut u = vec![0.0; p];
        for (e, eg) in self.envs.iter().enumerate() {
            w.copy_from_slice(&l1[e].v);
            u.iter_mut().for_each(|x| *x = 0.0);
            u[yi] = 1.0;
            for j in (0..m).filter(|&j| j != ns) {
                w[col(j)] -= theta[j];
                u[col(j)] -= phi[j];
            }
            for i in 0..p {
                w[i] -= theta[ns] * l2[e].v[i];
                u[i] -= phi[ns] * l2[e].v[i];
            }
            t_sum += dot(&w, &mat_vec(&eg.g, &w, p));
            let gu = mat_vec(&eg.g, &u, p);
            let ss = dot(&u, &gu).max(0.0);
            sse += ss;
            groups.push(GroupMoments { n: eg.n as f64, sum: gu[one], sum_sq: ss });
        }
        let n = self.n as f64;
        let p_inv = if with_pinv { invariance_pvalue_from_groups(&groups).unwrap_or(f64::NAN) } else { f64::NAN };
        CandidateScore {
            candidate: *c,
            feasible: true,
            t: t_sum.max(0.0) / n,
            p_inv,
            s_pred: sse / n,
            theta,
            phi,
        }
    }
}

/// Score all candidates on the full panel.
pub fn score_candidates(panel: &Panel, candidates: &[Candidate]) -> Vec<CandidateScore> {
    GramScorer::new(panel, candidates).score_all(candidates, true)
}
