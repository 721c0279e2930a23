//! The conjugate of a Dirac mass is the Dirac mass at its antipode, and the
//! conjugate of a two-atom measure sits on the boundary of its two cells.

use entropic::conjugation::conjugate_sample;
use entropic::measure::{AtomicMeasure, Domain};
use entropic::rng::{stream, Purpose};
use entropic::sdot::SolveConfig;
use entropic::torus::{antipode, torus_dist, TorusPoint};

fn main() -> entropic::Result<()> {
    let z = [0.3, 0.8];
    let nu = AtomicMeasure::dirac(Domain::Torus(2), &z)?;
    let cfg = SolveConfig::for_dim(2).with_grid(128);
    let s = conjugate_sample(&nu, 1000, &cfg, &mut stream(1, 0, Purpose::Points))?;
    let a = antipode(&TorusPoint::new(&z)?);
    let worst = s.cloud.points.iter().map(|p| torus_dist(p, &a).unwrap()).fold(0.0, f64::max);
    println!("conjugate of delta_{z:?}: every point within {worst:.2e} of {:?}", a.coords());

    let two = AtomicMeasure::new(Domain::Torus(1), vec![0.0, 0.5], vec![0.5, 0.5])?;
    let s = conjugate_sample(&two, 10_000, &SolveConfig::for_dim(1), &mut stream(1, 1, Purpose::Points))?;
    let left = s.cloud.points.iter().filter(|p| (p.coords()[0] - 0.25).abs() < 1e-9).count();
    println!("half-half on the circle: {left} of 10000 points at 1/4, the rest at 3/4");
    Ok(())
}
