//! Wasserstein energy of cylinder functions: the pre-energy upper proxy and
//! the lower bounds from isometry families, on one shared ensemble.

use entropic::conjugation::ConjugationConfig;
use entropic::energy::{
    antisym_lower_bound, catalog, estimate_pre_energy, key_lower_bound, lip_lower_bound, sharp_example_report,
    CloudEnsemble, CylinderFunction, Inner,
};
use entropic::torus::{IsometryFamily, TorusPoint};

fn main() -> entropic::Result<()> {
    let cfg = ConjugationConfig::new(2).with_grid(96).with_points(1000);
    let ens = CloudEnsemble::draw(5.0, 2, 100, 9, &cfg)?;
    let half = IsometryFamily::from_displacement(&[0.5, 0.0])?;
    for f in catalog().iter().take(3) {
        let e = estimate_pre_energy(f, &ens)?;
        let k = key_lower_bound(f, &half, &ens)?;
        println!("{:<22} pre-energy {:.4} +- {:.4}, key bound {:.4}", e.f_id, e.value, e.stderr, k.value);
    }
    let sin = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
    let a = antisym_lower_bound(&sin, &half, &ens)?;
    println!("antisymmetric bound for sin: {:.4} +- {:.4}", a.value, a.stderr);

    let near_dirac = CloudEnsemble::draw(0.01, 2, 300, 10, &cfg)?;
    let x0 = TorusPoint::new(&[0.0, 0.0])?;
    let x1 = TorusPoint::new(&[0.5, 0.0])?;
    let l = lip_lower_bound(&Inner::Sawtooth { axis: 0 }, &x0, &x1, 0.1, &near_dirac)?;
    println!("Lipschitz bound at beta 0.01: {:.5} +- {:.5}", l.value, l.stderr);

    let small = CloudEnsemble::draw(0.05, 2, 300, 11, &cfg)?;
    for r in sharp_example_report(&[0.1, 0.2], &small)? {
        println!(
            "eps {}: strips {:.3} / {:.3} (need {:.2}), bound {:.4}, pre-energy {}",
            r.eps, r.p_strip, r.p_mirror, r.threshold, r.implied_bound, r.pre_energy
        );
    }
    Ok(())
}
