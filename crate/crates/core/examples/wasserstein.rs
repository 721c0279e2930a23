//! Exact Wasserstein distances between atomic measures on the torus.

use entropic::measure::{AtomicMeasure, Domain};
use entropic::metrics::{best_dirac, w2, w2_discrete};

fn main() -> entropic::Result<()> {
    let mu = AtomicMeasure::new(Domain::Torus(2), vec![0.1, 0.1, 0.9, 0.1, 0.5, 0.5], vec![0.5, 0.3, 0.2])?;
    let grid = AtomicMeasure::uniform_grid(Domain::Torus(2), 4)?;
    let (d, plan) = w2_discrete(&mu, &grid)?;
    println!("W2(mu, 4x4 grid) = {d:.6}, {} plan entries", plan.entries.len());
    let shifted = mu.translated(&[0.25, 0.5])?;
    // never more than the shift length, sqrt(5) / 4
    println!("W2(mu, mu + (1/4, 1/2)) = {:.6}", w2(&mu, &shifted)?);
    let dirac = best_dirac(&mu)?;
    println!("closest Dirac at {:?}, distance {:.6}", dirac.location(0), w2(&mu, &dirac)?);
    Ok(())
}
