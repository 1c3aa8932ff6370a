//! LBP convergence and the W/N uniqueness certificates on the 3×3 factor torus over a
//! `(K, J)` grid. Pass the number of grid steps per axis as the first argument (default 21).

use bethe_zeta::diagnostics::WeightOptions;
use bethe_zeta::experiments::{grid_sweep, linspace, ProtocolConfig};

fn main() -> bethe_zeta::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(21);
    let axis = linspace(-1.0, 1.0, steps);
    let rows = grid_sweep(&axis, &axis, &ProtocolConfig::default(), &WeightOptions::default())?;
    let count = |f: &dyn Fn(&bethe_zeta::experiments::GridRow) -> bool| rows.iter().filter(|r| f(r)).count();
    println!("points                      {}", rows.len());
    println!("converged                   {}", count(&|r| r.converged));
    println!("certified by W              {}", count(&|r| r.certified_w));
    println!("certified by N              {}", count(&|r| r.certified_n));
    println!("W-certified, not converged  {}", count(&|r| r.certified_w && !r.converged));
    println!("N-certified, not converged  {}", count(&|r| r.certified_n && !r.converged));
    println!("fixed points analysed       {}", count(&|r| r.locally_stable.is_some()));
    let not_min = |r: &bethe_zeta::experiments::GridRow| {
        r.locally_stable == Some(true) && r.min_eig_restricted_hessian.is_some_and(|e| e <= 0.0)
    };
    println!("stable but not a local min  {}", count(&not_min));
    println!("\nconvergence map (rows K from -1 to 1, columns J from -1 to 1)");
    println!("  # converged   w W-certified only   . neither   x N-certified yet not converged");
    for k in 0..steps {
        let line: String = (0..steps)
            .map(|j| {
                let r = &rows[k * steps + j];
                match (r.converged, r.certified_w, r.certified_n) {
                    (false, _, true) => 'x',
                    (true, _, _) => '#',
                    (false, true, false) => 'w',
                    _ => '.',
                }
            })
            .collect();
        println!("  {line}");
    }
    Ok(())
}
