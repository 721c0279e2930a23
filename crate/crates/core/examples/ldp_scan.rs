//! Large deviations on [0, 1]: (1/beta) log P(W2(mu, target) < eps) rises
//! toward -Ent(target | m) as beta grows.

use entropic::conjugation::ConjugationConfig;
use entropic::metrics::{ldp_scan, LdpTarget};
use entropic::one_dim::{QuantileMeasure1D, DENSITY_GRID};

fn main() -> entropic::Result<()> {
    let target = QuantileMeasure1D::from_density(|x| 0.5 + x, DENSITY_GRID)?;
    let r = ldp_scan(&LdpTarget::Interval(target), 0.04, &[5.0, 10.0, 20.0, 40.0], 20_000, &ConjugationConfig::new(1), 5)?;
    println!("-Ent(target | m) = {:.4}", r.target_rate.unwrap_or(f64::NAN));
    for row in &r.rows {
        println!("beta {:>4}: {:>5} hits, rate {:+.4}", row.beta, row.hits, row.rate_estimate);
    }
    Ok(())
}
