//! Random linear SCM, shift and coefficient interventions, sampling, and the
//! population regression of `Y` on all predictors in each environment.

use imp_lab::estimators::ols_fit;
use imp_lab::scm::{population_lmmse, random_scm, sample, Edit, EnvId, InterventionSpec, Node, RandomScmConfig, ScmDocument};
use imp_lab::NodeSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generated = random_scm(&RandomScmConfig { num_nodes: 6, ..Default::default() }, 11)?;
    let scm = generated.scm;
    let d = scm.d();
    let parents: Vec<usize> = (0..d).filter(|&j| scm.beta[j] != 0.0).collect();
    println!("d = {d}, parents of Y: {parents:?}, children of Y: {:?}", (0..d).filter(|&j| scm.gamma[j] != 0.0).collect::<Vec<_>>());

    let mut specs = vec![InterventionSpec::observational(EnvId::discrete("obs"))];
    let mut edits = vec![Edit::shift(Node::Y, 3.0)];
    if let Some(&p) = parents.first() {
        edits.push(Edit::coefficient(Node::Y, Node::X(p), 1.5));
    }
    specs.push(InterventionSpec::new(EnvId::discrete("shifted"), edits));

    for (i, spec) in specs.iter().enumerate() {
        let l = population_lmmse(&scm, spec, Node::Y, NodeSet::full(d))?;
        let joint = sample(&scm, spec, 200_000, i as u64)?;
        let x = joint.columns(0, d).into_owned();
        let y = joint.column(d).into_owned();
        let ols = ols_fit(&x, &y, true)?;
        println!("{}: residual variance {:.4}", spec.env, l.residual_variance);
        println!("    population {:.3?}", l.dense(d));
        println!("    sample OLS {:.3?}", ols.coefficients.as_slice());
    }
    let doc = ScmDocument::new(&scm, specs);
    println!("document has {} bytes of JSON and environments {:?}", doc.to_json().len(), doc.labels());
    Ok(())
}
