//! The determinant identities at a random point of the local polytope of a binary K4 model:
//! Bethe-zeta, the Ihara-Bass factorization, and the truncated Euler product.

use bethe_zeta::bethe::{self, random_point};
use bethe_zeta::zeta::{self, EdgeWeights};
use bethe_zeta::{generators, ModelSpec, VertexKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bethe_zeta::Result<()> {
    let g = generators::complete(4);
    let model = ModelSpec::zero(g.clone(), vec![VertexKind::Spin; 4])?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let point = random_point(&model, &mut rng)?;

    let bz = bethe::bethe_zeta(&model, &point)?;
    println!("zeta(u)^-1       {:+.12e}", bz.lhs);
    println!("Hessian side     {:+.12e}", bz.rhs);
    if let Some(c) = bethe::bethe_zeta_closed_form(&model, &point)? {
        println!("closed form      {c:+.12e}");
    }

    let w = bethe::belief_weights(&model, &point)?;
    let ib = zeta::ihara_bass_factorization(&g, &w)?;
    println!("Ihara-Bass       {:+.12e}", ib.product);

    let small = EdgeWeights::uniform(&g, 0.15);
    let det = zeta::zeta_determinant(&g, &small)?;
    let euler = zeta::zeta_euler_truncated(&g, &small, 14)?;
    let bound = zeta::euler_tail_bound(&g, &small, 14);
    println!("zeta(0.15)       {det:.12} (Euler product to length 14: {euler:.12}, tail bound {bound:.1e})");
    Ok(())
}
