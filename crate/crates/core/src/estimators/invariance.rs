//! Two-sample tests for equal residual means and variances across environments.

use crate::error::EstimationError;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use std::collections::BTreeMap;
use std::fmt::Display;

/// Count, sum and sum of squares of one group of residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupMoments {
    pub n: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl GroupMoments {
    pub fn from_slice(v: &[f64]) -> Self {
        GroupMoments {
            n: v.len() as f64,
            sum: v.iter().sum(),
            sum_sq: v.iter().map(|x| x * x).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let centered = self.sum_sq - self.sum * self.sum / self.n;
        (centered / (self.n - 1.0)).max(0.0)
    }

    fn minus(&self, other: &GroupMoments) -> GroupMoments {
        GroupMoments {
            n: self.n - other.n,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
        }
    }
}

/// Two-sided Welch t-test p-value for equal means.
pub fn welch_t_pvalue(a: &GroupMoments, b: &GroupMoments) -> f64 {
    let se2 = a.variance() / a.n + b.variance() / b.n;
    let diff = a.mean() - b.mean();
    if !(se2 > 0.0) {
        return if diff.abs() <= f64::EPSILON * (a.mean().abs() + b.mean().abs()) { 1.0 } else { 0.0 };
    }
    let t = diff / se2.sqrt();
    let va = a.variance() / a.n;
    let vb = b.variance() / b.n;
    let df = se2 * se2 / (va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Two-sided F-test p-value for equal variances.
pub fn variance_ratio_pvalue(a: &GroupMoments, b: &GroupMoments) -> f64 {
    let (va, vb) = (a.variance(), b.variance());
    match (va > 0.0, vb > 0.0) {
        (false, false) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let f = va / vb;
    let dist = FisherSnedecor::new(a.n - 1.0, b.n - 1.0).expect("positive degrees of freedom");
    (2.0 * dist.cdf(f).min(dist.sf(f))).min(1.0)
}

/// Bonferroni-combined p-value over every environment-versus-rest comparison.
///
/// Each environment contributes a Welch t-test and an F-test against the
/// pooled residuals of all other environments; the result is
/// `min(1, 2 |E| min p)`.
pub fn invariance_pvalue_from_groups(groups: &[GroupMoments]) -> Result<f64, EstimationError> {
    if groups.len() < 2 {
        return Err(EstimationError::TooFewEnvironments(groups.len()));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.n < 3.0) {
        return Err(EstimationError::SmallEnvironment { env: i.to_string(), count: g.n as usize });
    }
    let total = groups.iter().fold(GroupMoments::default(), |acc, g| GroupMoments {
        n: acc.n + g.n,
        sum: acc.sum + g.sum,
        sum_sq: acc.sum_sq + g.sum_sq,
    });
    let mut min_p = 1.0f64;
    for g in groups {
        let rest = total.minus(g);
        min_p = min_p.min(welch_t_pvalue(g, &rest)).min(variance_ratio_pvalue(g, &rest));
    }
    Ok((2.0 * groups.len() as f64 * min_p).min(1.0))
}

/// Residual-invariance p-value with environment labels given per residual.
pub fn residual_invariance_pvalue<L: Ord + Display>(residuals: &[f64], env_labels: &[L]) -> Result<f64, EstimationError> {
    if residuals.len() != env_labels.len() {
        return Err(EstimationError::Dimension(format!(
            "{} residuals but {} labels",
            residuals.len(),
            env_labels.len()
        )));
    }
    let mut groups: BTreeMap<&L, Vec<f64>> = BTreeMap::new();
    for (r, l) in residuals.iter().zip(env_labels) {
        groups.entry(l).or_default().push(*r);
    }
    if groups.len() < 2 {
        return Err(EstimationError::TooFewEnvironments(groups.len()));
    }
    if let Some((l, v)) = groups.iter().find(|(_, v)| v.len() < 3) {
        return Err(EstimationError::SmallEnvironment { env: l.to_string(), count: v.len() });
    }
    let moments: Vec<GroupMoments> = groups.values().map(|v| GroupMoments::from_slice(v)).collect();
    invariance_pvalue_from_groups(&moments)
}
