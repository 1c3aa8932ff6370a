//! W versus N for `Ψ(x1,x2,x3) = exp(K x1x2x3 + 0.3 Σ x_i x_j)` over `K ∈ [−2, 2]`.

use bethe_zeta::diagnostics::WeightOptions;
use bethe_zeta::experiments::{linspace, wn_sweep};

fn main() -> bethe_zeta::Result<()> {
    let rows = wn_sweep(&linspace(-2.0, 2.0, 41), &WeightOptions::default())?;
    println!("{:>6} {:>10} {:>10} {:>10}", "K", "W", "N", "N - W");
    for r in rows {
        println!("{:>6.2} {:>10.6} {:>10.6} {:>10.2e}", r.k, r.w, r.n, r.n - r.w);
    }
    Ok(())
}
