//! Dirichlet-Ferguson draws by stick-breaking, and the Dirichlet law of their
//! masses on a partition.

use entropic::measure::{empirical_partition_vector, stick_breaking, AxisBox, Domain, StickBreakingConfig};
use entropic::rng::{stream, Purpose};

fn main() -> entropic::Result<()> {
    let beta = 5.0;
    let cfg = StickBreakingConfig { beta, seed: 42, ..Default::default() };
    let mut rng = stream(cfg.seed, 0, Purpose::Measure);
    let nu = stick_breaking(&cfg, Domain::Torus(2), &mut rng)?;
    println!("beta = {beta}: {} atoms, largest five weights:", nu.len());
    for w in nu.size_ordered_weights().iter().take(5) {
        println!("  {w:.5}");
    }

    // mean mass of each quadrant over many draws is its area
    let quads = AxisBox::quadrants();
    let n = 2000;
    let mut mean = [0.0; 4];
    for i in 0..n {
        let mut r = stream(cfg.seed, i, Purpose::Measure);
        let v = empirical_partition_vector(&stick_breaking(&cfg, Domain::Torus(2), &mut r)?, &quads)?;
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    println!("mean quadrant masses over {n} draws: {mean:.4?}");
    Ok(())
}
