//! Profile least squares for `Y = a0(U) + a1(U) W + b Z + noise`, where the
//! varying coefficients are smooth in `U` and `b` is constant.

use imp_lab::estimators::svc_profile_fit;
use imp_lab::scm::rng_for;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 2000;
    let mut rng = rng_for(5, 0);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let w = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let z = DMatrix::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
    let a0 = |t: f64| (2.0 * PI * t).sin();
    let a1 = |t: f64| 1.0 + t * t;
    let y = DVector::from_fn(n, |i, _| a0(u[i]) + a1(u[i]) * w[(i, 1)] + 0.7 * z[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal));

    for h in [0.05, 0.1, 0.2, 0.4] {
        let fit = svc_profile_fit(&u, &w, &z, &y, h)?;
        let err = (0..n).map(|i| (fit.varying[(i, 1)] - a1(u[i])).powi(2)).sum::<f64>() / n as f64;
        println!("h = {h:<5} b_hat = {:.4}   mean sq. error of a1 = {err:.4}", fit.beta_hat[0]);
    }
    Ok(())
}
