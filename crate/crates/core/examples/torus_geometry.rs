//! Distances, antipodes and translation families on the flat torus.

use entropic::torus::{antipode, exp_map, torus_dist, translation_family, TorusPoint};

fn main() -> entropic::Result<()> {
    let x = TorusPoint::new(&[0.1, 0.9])?;
    let y = TorusPoint::new(&[0.8, 0.2])?;
    // the short way round both axes: (0.3, 0.3)
    println!("d(x, y) = {:.6}", torus_dist(&x, &y)?);
    println!("antipode of x = {:?}", antipode(&x).coords());

    let moved = exp_map(&x, &[0.45, -0.2])?;
    println!("exp_x(0.45, -0.2) = {:?}", moved.coords());

    let fam = translation_family(&x, &y)?;
    println!("translation family x -> y, Lipschitz constant {:.6}", fam.lipschitz());
    for t in [0.0, 0.25, 0.5, 1.0] {
        println!("  Phi_{t}(x) = {:?}", fam.apply(&x, t).coords());
    }
    Ok(())
}
