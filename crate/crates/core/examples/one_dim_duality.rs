//! Conjugation on the unit interval swaps a measure's CDF and quantile, and
//! trades Ent(mu | m) for Ent(m | mu^c).

use entropic::one_dim::{conjugate_1d, entropy_1d, reverse_entropy_1d, w2_1d, QuantileMeasure1D, DENSITY_GRID};

fn main() -> entropic::Result<()> {
    let mu = QuantileMeasure1D::from_density(|x| 0.5 + x, DENSITY_GRID)?;
    let c = conjugate_1d(&mu);
    println!("Ent(mu | m)   = {:.10}", entropy_1d(&mu));
    println!("Ent(m | mu^c) = {:.10}", reverse_entropy_1d(&c, 1e-6)?);
    println!("W2(c(c(mu)), mu) = {:.1e}", w2_1d(&conjugate_1d(&c), &mu));

    let atoms = QuantileMeasure1D::atomic(&[0.2, 0.7], &[0.5, 0.5])?;
    let ca = conjugate_1d(&atoms);
    let (x, w) = ca.atoms().expect("atomic");
    println!("conjugate of (delta_0.2 + delta_0.7)/2: atoms {x:?} weights {w:?}");
    Ok(())
}
