//! Loopy belief propagation on a frustrated 4-cycle Ising model: beliefs against exact
//! marginals, and the local stability of the fixed point.

use bethe_zeta::bethe::exact_point;
use bethe_zeta::diagnostics::stability_classify;
use bethe_zeta::lbp::{self, LbpConfig, MessageSet};
use bethe_zeta::{generators, ModelSpec};

fn main() -> bethe_zeta::Result<()> {
    let model = ModelSpec::ising(generators::cycle(4), &[0.8, 0.8, 0.8, -0.8], &[0.2, -0.1, 0.0, 0.3])?;
    let run = lbp::run(&model, MessageSet::zeros(&model), &LbpConfig::default())?;
    println!("converged {} after {} updates", run.converged, run.iterations);

    let beliefs = lbp::beliefs(&model, &run.messages)?;
    let exact = exact_point(&model)?;
    println!("{:>6} {:>10} {:>10}", "vertex", "E_b[x]", "exact");
    for i in 0..model.graph().num_vertices() {
        println!("{:>6} {:>10.6} {:>10.6}", model.graph().label(i), beliefs.vertex[i][0], exact.vertex[i][0]);
    }

    let s = stability_classify(&model, &run.messages)?;
    println!("rho(T') = {:.6}, locally stable: {}", s.rho, s.locally_stable);
    Ok(())
}
