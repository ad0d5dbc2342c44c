//! IMP with a continuous environment variable: the coefficient of `X0` on `Y`
//! oscillates as `2 sin(2π u)` on the training range `u ∈ [0, 1]` and with
//! amplitude 5 on the unseen test range `u ∈ [1, 2]`.

use imp_lab::continuous::{fit_continuous, sample_uniform_u};
use imp_lab::discrete::{SearchLimits, SelectionConfig};
use imp_lab::estimators::ols_fit;
use imp_lab::scm::{toy_scm, Edit, Node, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scm = toy_scm(1.0);
    let edit = |amplitude| Edit::coefficient(Node::Y, Node::X(0), Value::Sinusoid { amplitude, frequency: 1.0 });
    let train = sample_uniform_u(&scm, &[edit(2.0)], (0.0, 1.0), 800, 1)?;
    let test = sample_uniform_u(&scm, &[edit(5.0)], (1.0, 2.0), 800, 2)?;

    let config = SelectionConfig { bootstrap_rounds: 20, ..Default::default() };
    let report = fit_continuous(&train, SearchLimits::NONE, 0.1, &config)?;
    let model = report.model()?;
    println!("cutoffs: c_imp = {:.4}, c_pred = {:.4}", model.cutoffs.c_imp, model.cutoffs.c_pred);
    for p in &model.predictors {
        println!("selected {}", p.candidate());
    }
    let imp = model.predict(&test.u, &test.x)?;
    let ols = ols_fit(&train.x, &train.y, true)?;
    let ols_pred = (&test.x * &ols.coefficients).add_scalar(ols.intercept.unwrap_or(0.0));
    let rss = |p: &nalgebra::DVector<f64>| (p - &test.y).norm_squared() / test.n() as f64;
    println!("test mean RSS: imp {:.3}, pooled ols {:.3}", rss(&imp), rss(&ols_pred));
    Ok(())
}
