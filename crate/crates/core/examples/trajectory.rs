//! Continuation of the symmetric fixed point of the 3×3 torus Ising model `J = t`.

use bethe_zeta::diagnostics::{t_grid, TrajectoryOptions};
use bethe_zeta::experiments::torus_ising_trajectory;

fn main() -> bethe_zeta::Result<()> {
    let tr = torus_ising_trajectory(3, 3, &t_grid(0.5, 100), &TrajectoryOptions::default())?;
    for r in tr.rows.iter().filter(|r| (r.t - 0.3465).abs() < 0.03) {
        println!(
            "t={:.3} rho={:.6} min_eig={:+.3e} stable={} onset={} hessian_onset={}",
            r.t, r.rho_tprime, r.min_eig_restricted_hessian, r.stable, r.instability_onset, r.hessian_onset
        );
    }
    println!("instability onset in {:?}", tr.onset_interval);
    println!("Hessian sign change in {:?}", tr.hessian_interval);
    println!("atanh(1/3) = {:.5}", (1.0f64 / 3.0).atanh());
    Ok(())
}
