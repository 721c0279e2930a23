//! Monte Carlo diagnostics of the entropic measure on the square torus: mean
//! value, the two beta limits, and hits of a ball around a Dirac mass.

use entropic::conjugation::ConjugationConfig;
use entropic::measure::{AtomicMeasure, AxisBox, Domain};
use entropic::metrics::{beta_limit_diagnostic, mean_measure_check, support_probe, Law};

fn main() -> entropic::Result<()> {
    let cfg = ConjugationConfig::new(2).with_grid(96).with_points(1000);
    let check = mean_measure_check(Law::Entropic, 5.0, 200, &AxisBox::quadrants(), &cfg, 1)?;
    for r in &check.rows {
        println!("{}: mean {:.4} vs {:.2}, z = {:+.2}", r.region, r.empirical_mean, r.expected, r.z);
    }
    for r in beta_limit_diagnostic(&[0.1, 1.0, 10.0, 100.0], 2, 30, &cfg, 2)? {
        println!(
            "beta {:>5}: to nearest Dirac {:.4}, to uniform {:.4}",
            r.beta, r.dirac_proximity, r.uniform_proximity
        );
    }
    let target = AtomicMeasure::dirac(Domain::Torus(2), &[0.5, 0.5])?;
    let p = support_probe(&target, 0.05, 200, &cfg, 3)?;
    for eps in [0.1, 0.2, 0.3] {
        let h = p.at(eps);
        println!("P(W2 < {eps}) ~ {:.3} [{:.3}, {:.3}]", h.frequency, h.wilson_lo, h.wilson_hi);
    }
    Ok(())
}
