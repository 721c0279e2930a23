//! Semi-discrete transport from the uniform measure to four atoms on the
//! square torus: the cell of each atom gets exactly its mass.

use entropic::measure::{AtomicMeasure, Domain};
use entropic::sdot::{solve_laguerre, SolveConfig};

fn main() -> entropic::Result<()> {
    let nu = AtomicMeasure::new(
        Domain::Torus(2),
        vec![0.12, 0.20, 0.63, 0.33, 0.41, 0.80, 0.86, 0.55],
        vec![0.4, 0.3, 0.2, 0.1],
    )?;
    let d = solve_laguerre(&nu, &SolveConfig::for_dim(2).with_grid(256))?;
    // the 256 grid is warm-started from a 128 solve, which may already be within tolerance
    println!("{} Newton iterations at full resolution, residual {:.2e} (tolerance {:.2e})", d.iterations, d.residual, d.mass_tol);
    for i in 0..d.len() {
        println!(
            "site {:?}: target {:.3}, cell mass {:.9}, weight {:+.6}",
            d.sites[i].coords(),
            d.target_masses[i],
            d.computed_masses[i],
            d.dual_weights[i]
        );
    }
    let h = &d.dual_history;
    println!("dual value {:.8} -> {:.8}", h[0], h[h.len() - 1]);
    Ok(())
}
