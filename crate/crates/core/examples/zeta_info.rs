//! Prime cycles, Perron-Frobenius data and the Hashimoto limit of a few small graphs.

use bethe_zeta::zeta::{self, EdgeWeights};
use bethe_zeta::{generators, FactorGraph};

fn report(name: &str, g: &FactorGraph) -> bethe_zeta::Result<()> {
    let mut by_len = [0usize; 9];
    for c in g.prime_cycles(8) {
        by_len[c.len()] += 1;
    }
    let kappa = bethe_zeta::linalg::spectral_radius(&zeta::unweighted_matrix(g))?;
    let (lo, hi) = g.pf_bounds();
    println!("{name}: |V|={} |F|={} |E|={} nullity={}", g.num_vertices(), g.num_factors(), g.num_edges(), g.nullity());
    println!("  prime cycles of length 1..8: {:?}", &by_len[1..]);
    println!("  kappa = {kappa:.6} in [{lo}, {hi}]");
    println!("  zeta(0.2) = {:.6}", zeta::zeta_determinant(g, &EdgeWeights::uniform(g, 0.2))?);
    if let Ok(h) = zeta::hashimoto_limit(g) {
        println!("  Hashimoto: {:.3} vs {}", h.numeric, h.predicted);
    }
    Ok(())
}

fn main() -> bethe_zeta::Result<()> {
    report("C_4", &generators::cycle(4))?;
    report("K4", &generators::complete(4))?;
    report("K_{2,3}", &generators::complete_bipartite(2, 3))?;
    report("hypergraph {1,2},{1,2,3,4},{4}", &generators::hyper_example())?;
    Ok(())
}
