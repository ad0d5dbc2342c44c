//! Statistical building blocks shared by the estimators.

pub mod invariance;
pub mod kernel;
pub mod ols;
pub mod svc;

pub use invariance::{invariance_pvalue_from_groups, residual_invariance_pvalue, GroupMoments};
pub use kernel::epanechnikov;
pub use ols::{design_condition, ols_fit, OlsFit};
pub use svc::{svc_predict_m, svc_profile_fit, Smoother, SvcFit};
