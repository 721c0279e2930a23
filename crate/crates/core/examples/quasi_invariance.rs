//! Change of variables for the entropic measure on [0, 1]: averages of
//! u(mu) agree with averages of u(h_* mu) times the density X Y.

use entropic::one_dim::{quasi_invariance_test, Diffeo1D, QuantileMeasure1D};

fn main() -> entropic::Result<()> {
    let h = Diffeo1D::quadratic(0.1)?;
    let u = |mu: &QuantileMeasure1D| mu.integrate(|x| (std::f64::consts::TAU * x).sin());
    for beta in [0.5, 2.0] {
        let r = quasi_invariance_test(&h, beta, u, 20_000, 11)?;
        println!(
            "beta {beta}: lhs {:+.5} rhs {:+.5}, |diff| / stderr = {:.2}",
            r.lhs,
            r.rhs,
            (r.lhs - r.rhs).abs() / r.combined_stderr
        );
    }
    Ok(())
}
