//! Translations leave the entropic measure invariant; translating only half
//! of each sample does not.

use entropic::conjugation::ConjugationConfig;
use entropic::energy::{half_pushforward_points, invariance_test, pushforward_points, CloudEnsemble, CylinderFunction, Inner};
use entropic::torus::{IsometryFamily, TorusPoint};

fn main() -> entropic::Result<()> {
    let cfg = ConjugationConfig::new(2).with_grid(96).with_points(1000);
    let a = CloudEnsemble::draw_range(5.0, 2, 0..200, 4, &cfg)?;
    let b = CloudEnsemble::draw_range(5.0, 2, 200..400, 4, &cfg)?;
    let fam = IsometryFamily::from_displacement(&[1.0, 0.0])?;
    let f = CylinderFunction::linear(Inner::Cos { freq: 1, axis: 0 });
    let ok = invariance_test(&f, |p: &[TorusPoint]| pushforward_points(p, &fam, 0.37), 0.37, &a, &b);
    println!("translated by 0.37: KS {:.3}, p = {:.3}, pass {}", ok.statistic, ok.p_value, ok.pass);
    // sin is positive on [0, 1/2), so moving that half by 1/2 makes it non-positive
    let g = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
    let bad = invariance_test(&g, |p: &[TorusPoint]| half_pushforward_points(p, &fam, 0.5), 0.5, &a, &b);
    println!("half translated:    KS {:.3}, p = {:.2e}, pass {}", bad.statistic, bad.p_value, bad.pass);
    Ok(())
}
