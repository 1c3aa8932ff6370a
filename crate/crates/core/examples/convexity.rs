//! Convexity of the Bethe free energy: one-cycle graphs are convex, graphs with two
//! independent cycles get an explicit non-convexity witness.

use bethe_zeta::bethe::{convexity_classify, ConvexityVerdict};
use bethe_zeta::{generators, FactorGraph, ModelSpec, VertexKind};

fn show(name: &str, model: &ModelSpec) -> bethe_zeta::Result<()> {
    match convexity_classify(model)? {
        ConvexityVerdict::Convex => println!("{name}: convex on the whole local polytope"),
        ConvexityVerdict::NonConvex { t, min_eigenvalue, .. } => {
            println!("{name}: not convex, witness at t = {t} has min eigenvalue {min_eigenvalue:.4e}")
        }
        ConvexityVerdict::Unknown(why) => println!("{name}: undecided ({why})"),
    }
    Ok(())
}

fn spins(g: FactorGraph) -> bethe_zeta::Result<ModelSpec> {
    let n = g.num_vertices();
    ModelSpec::zero(g, vec![VertexKind::Spin; n])
}

fn main() -> bethe_zeta::Result<()> {
    show("binary C_6", &spins(generators::cycle(6))?)?;
    show("binary star", &spins(generators::star(5))?)?;
    show("binary K4", &spins(generators::complete(4))?)?;
    let g = generators::torus(3, 3);
    let gauss = ModelSpec::fixed_mean_gaussian(g, &[0.1; 18], &[1.0; 9], &[0.0; 9])?;
    show("Gaussian 3x3 torus", &gauss)?;
    Ok(())
}
