//! The three-variable toy model: `Y = a X0 + X1 + N`, `X2 = Y + X0 + N2`,
//! with the coefficient `a` changed between two environments.
//!
//! `E[Y | X0, X1, X2]` depends on `a`, yet it matches the prediction module
//! `E[X1 | X0, X1]` through a fixed linear relation. This example recovers
//! both such relations and shows that an unrelated candidate fails to match.

use imp_lab::data::toy_panel;
use imp_lab::discrete::{fit_candidate_discrete, Candidate};
use imp_lab::NodeSet;

fn set(v: &[usize]) -> NodeSet {
    v.iter().copied().collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = toy_panel(&[1.0, 2.0], 50_000, 7);
    let cases = [
        ("true relation", Candidate::new(2, set(&[0, 1]), set(&[0, 1, 2]))),
        ("second relation", Candidate::new(1, set(&[0, 2]), set(&[0, 1, 2]))),
        ("no relation", Candidate::new(0, set(&[1, 2]), set(&[0, 1, 2]))),
    ];
    for (name, cand) in cases {
        let fit = fit_candidate_discrete(&panel, &cand)?;
        println!("{name:<16} {cand}");
        println!("    lambda = {:>8.4}   eta = {:.4?}", fit.lambda, fit.eta.as_slice());
        println!("    T = {:.3e}   p_inv = {:.3}", fit.t, fit.p_inv);
    }
    Ok(())
}
