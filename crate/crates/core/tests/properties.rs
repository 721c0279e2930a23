//! Property tests across modules.

use proptest::prelude::*;

use entropic::measure::{stick_breaking, AtomicMeasure, Domain, StickBreakingConfig};
use entropic::metrics::{w2, SupportProbe};
use entropic::one_dim::{conjugate_1d, w2_1d, QuantileMeasure1D};
use entropic::rng::{stream, Purpose};
use entropic::sdot::{solve_laguerre, SolveConfig};
use entropic::torus::{torus_dist_sq, TorusPoint};

fn measure(max: usize) -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.05..1.0f64), 1..=max).prop_map(|atoms| {
        let locs = atoms.iter().flat_map(|a| [a.0, a.1]).collect();
        let w = atoms.iter().map(|a| a.2).collect();
        AtomicMeasure::normalized(Domain::Torus(2), locs, w).unwrap()
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w2_is_a_metric(a in measure(6), b in measure(6), c in measure(6)) {
        let ab = w2(&a, &b).unwrap();
        prop_assert!((ab - w2(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(w2(&a, &c).unwrap() <= ab + w2(&b, &c).unwrap() + 1e-9);
        prop_assert!(w2(&a, &a).unwrap() < 1e-9);
    }

    #[test]
    fn w2_is_translation_invariant(a in measure(6), b in measure(6), v0 in -1.0..1.0f64, v1 in -1.0..1.0f64) {
        let d0 = w2(&a, &b).unwrap();
        let d1 = w2(&a.translated(&[v0, v1]).unwrap(), &b.translated(&[v0, v1]).unwrap()).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    // equal weights: an optimal plan is a permutation
    #[test]
    fn w2_matches_best_matching(pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..=5)) {
        let n = pts.len();
        let xs: Vec<TorusPoint> = pts.iter().map(|p| TorusPoint::new(&[p.0, p.1]).unwrap()).collect();
        let ys: Vec<TorusPoint> = pts.iter().map(|p| TorusPoint::new(&[p.2, p.3]).unwrap()).collect();
        let best = permutations(n)
            .iter()
            .map(|s| (0..n).map(|i| torus_dist_sq(&xs[i], &ys[s[i]]).unwrap()).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let a = AtomicMeasure::empirical(Domain::Torus(2), pts.iter().flat_map(|p| [p.0, p.1]).collect()).unwrap();
        let b = AtomicMeasure::empirical(Domain::Torus(2), pts.iter().flat_map(|p| [p.2, p.3]).collect()).unwrap();
        prop_assert!((w2(&a, &b).unwrap() - best).abs() < 1e-9);
    }

    #[test]
    fn probe_hits_grow_with_radius(d in prop::collection::vec(0.0..1.0f64, 0..50), e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
        let probe = SupportProbe { beta: 1.0, distances: d, failed: 0, seed: 0 };
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(probe.at(lo).hits <= probe.at(hi).hits);
    }

    #[test]
    fn interval_conjugation_is_an_involution(atoms in prop::collection::vec((0.0..1.0f64, 0.01..1.0f64), 1..12)) {
        let x: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let s: f64 = atoms.iter().map(|a| a.1).sum();
        let w: Vec<f64> = atoms.iter().map(|a| a.1 / s).collect();
        let nu = QuantileMeasure1D::atomic(&x, &w).unwrap();
        prop_assert!(w2_1d(&conjugate_1d(&conjugate_1d(&nu)), &nu) <= 1e-9);
    }

    #[test]
    fn stick_breaking_gives_probability_measures(beta in 0.1..30.0f64, seed in 0u64..1000) {
        let cfg = StickBreakingConfig { seed, ..StickBreakingConfig::new(beta) };
        let nu = stick_breaking(&cfg, Domain::Torus(2), &mut stream(seed, 0, Purpose::Measure)).unwrap();
        prop_assert!(nu.weights().iter().all(|w| *w > 0.0));
        prop_assert!((nu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn laguerre_cells_get_their_mass(nu in measure(12)) {
        let d = solve_laguerre(&nu, &SolveConfig::for_dim(2).with_grid(64)).unwrap();
        for (m, l) in d.computed_masses.iter().zip(&d.target_masses) {
            prop_assert!((m - l).abs() <= d.mass_tol);
        }
        prop_assert!(d.dual_history.windows(2).all(|h| h[1] >= h[0]));
        // masses recomputed from the returned weights agree with the solver's
        for (m, l) in d.cell_masses().iter().zip(&d.computed_masses) {
            prop_assert!((m - l).abs() < 1e-12);
        }
    }
}
