//! Uniqueness certificates of the LBP fixed point for a binary 3x3 torus Ising model
//! with growing coupling.

use bethe_zeta::diagnostics::{uniqueness_certificate, WeightCache, WeightKind, WeightOptions};
use bethe_zeta::experiments::uniform_ising;
use bethe_zeta::generators;

fn main() -> bethe_zeta::Result<()> {
    let g = generators::torus(3, 3);
    let mut cache = WeightCache::new(WeightOptions::default());
    println!("{:>5} {:>10} {:>10} {:>6}", "J", "rho_W", "rho_N", "unique");
    for k in 0..=8 {
        let j = 0.05 * k as f64;
        let model = uniform_ising(&g, j)?;
        let w = uniqueness_certificate(&model, WeightKind::W, &mut cache)?;
        let n = uniqueness_certificate(&model, WeightKind::N, &mut cache)?;
        println!("{j:>5.2} {:>10.6} {:>10.6} {:>6}", w.rho, n.rho, w.certified || n.certified);
    }
    Ok(())
}
