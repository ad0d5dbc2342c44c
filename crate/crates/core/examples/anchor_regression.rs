//! Anchor regression with environment indicators as anchors, along a grid of
//! `γ` and with the cross-validated choice.

use imp_lab::baselines::{anchor_cv, anchor_regression, default_gamma_grid, pooled_ols};
use imp_lab::data::toy_panel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = toy_panel(&[-1.0, 0.0, 1.0, 2.0], 300, 3);
    let test = toy_panel(&[6.0], 1000, 4);
    let env = &test.envs[0];
    let rss = |p: nalgebra::DVector<f64>| (p - &env.y).norm_squared() / env.n() as f64;

    println!("{:>6}  {:>24}  {:>10}", "gamma", "coefficients", "test RSS");
    for gamma in [0.0, 0.5, 1.0, 4.0, 100.0] {
        let m = anchor_regression(&train, gamma)?;
        println!("{gamma:>6}  {:>24}  {:>10.3}", format!("{:.2?}", m.coefficients), rss(m.predict(&env.x)));
    }
    let ols = pooled_ols(&train)?;
    println!("pooled OLS test RSS {:.3}", rss(ols.predict(&env.x)));
    let cv = anchor_cv(&train, &default_gamma_grid(), 5, 0)?;
    println!("cross-validated {:?}: test RSS {:.3}", cv.method, rss(cv.predict(&env.x)));
    Ok(())
}
