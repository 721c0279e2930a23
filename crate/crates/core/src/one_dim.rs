//! Probability measures on `[0, 1]` through their distribution and quantile
//! functions, where conjugation is explicit: the conjugate of `mu` is the
//! push-forward of Lebesgue measure under the CDF of `mu`.
//!
//! Conventions: the CDF is right-continuous and the quantile
//! `Q(t) = inf {x : F(x) >= t}` left-continuous, with `Q(0) = 0`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::{stick_breaking, Domain, StickBreakingConfig};
use crate::rng::{self, Purpose};
use crate::stats::mean_stderr;

/// Default number of cells of a density representation.
pub const DENSITY_GRID: usize = 10_000;

/// Eight-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Gauss-Legendre integral of `f` over `[a, b]`.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Repr1D {
    /// Sorted distinct atoms with positive weights.
    Atomic { atoms: Vec<f64>, weights: Vec<f64> },
    /// Piecewise-linear CDF through `(knots[i], cdf[i])`, from `(0, 0)` to
    /// `(1, 1)`, strictly increasing in both coordinates: a density that is
    /// positive and constant between consecutive knots.
    Density { knots: Vec<f64>, cdf: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Repr1D", into = "Repr1D")]
pub struct QuantileMeasure1D {
    repr: Repr1D,
    /// Cumulative weights of the atoms; the last entry is exactly 1. Empty
    /// for densities, which carry their CDF directly.
    cumulative: Vec<f64>,
}

impl From<Repr1D> for QuantileMeasure1D {
    fn from(r: Repr1D) -> Self {
        Self::build(r)
    }
}

impl From<QuantileMeasure1D> for Repr1D {
    fn from(m: QuantileMeasure1D) -> Self {
        m.repr
    }
}

/// Linear interpolation through increasing `xs`.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|k| *k <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    ys[j - 1] + s * (ys[j] - ys[j - 1])
}

impl QuantileMeasure1D {
    fn build(repr: Repr1D) -> Self {
        let mut cumulative = Vec::new();
        if let Repr1D::Atomic { weights, .. } = &repr {
            let mut s = 0.0;
            for w in weights {
                s += w;
                cumulative.push(s);
            }
            if let Some(last) = cumulative.last_mut() {
                *last = 1.0;
            }
        }
        Self { repr, cumulative }
    }

    /// Atomic measure; atoms are sorted and coincident atoms merged.
    pub fn atomic(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(invalid("atomic measure needs matching, non-empty atoms and weights"));
        }
        if atoms.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid("atoms must lie in [0, 1]"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&a, &b| atoms[a].total_cmp(&atoms[b]));
        let mut xs: Vec<f64> = Vec::new();
        let mut ws: Vec<f64> = Vec::new();
        for i in order {
            if weights[i] == 0.0 {
                continue;
            }
            if xs.last() == Some(&atoms[i]) {
                *ws.last_mut().unwrap() += weights[i];
            } else {
                xs.push(atoms[i]);
                ws.push(weights[i]);
            }
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        Ok(Self::build(Repr1D::Atomic { atoms: xs, weights: ws }))
    }

    /// Density with constant value on each of `n` equal cells, given the
    /// cell masses. Every cell must carry positive mass.
    pub fn from_cell_masses(cell_masses: Vec<f64>) -> Result<Self> {
        if cell_masses.is_empty() {
            return Err(invalid("density needs at least one cell"));
        }
        if cell_masses.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(invalid("cell masses must be positive"));
        }
        let total: f64 = cell_masses.iter().sum();
        let n = cell_masses.len();
        let knots = (0..=n).map(|j| j as f64 / n as f64).collect();
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut s = 0.0;
        for p in &cell_masses {
            s += p / total;
            cdf.push(s);
        }
        cdf[n] = 1.0;
        Ok(Self::build(Repr1D::Density { knots, cdf }))
    }

    /// Density proportional to `f`, integrated cell by cell.
    pub fn from_density(f: impl Fn(f64) -> f64, cells: usize) -> Result<Self> {
        let h = 1.0 / cells as f64;
        let masses = (0..cells)
            .map(|j| gauss_legendre(&f, j as f64 * h, (j + 1) as f64 * h))
            .collect();
        Self::from_cell_masses(masses)
    }

    pub fn uniform(cells: usize) -> Self {
        Self::from_cell_masses(vec![1.0; cells.max(1)]).expect("uniform cells are valid")
    }

    pub fn repr(&self) -> &Repr1D {
        &self.repr
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.repr, Repr1D::Atomic { .. })
    }

    /// Atoms and weights, for atomic measures.
    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr1D::Atomic { atoms, weights } => Some((atoms, weights)),
            _ => None,
        }
    }

    /// Knots and CDF values, for densities.
    pub fn knots(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr1D::Density { knots, cdf } => Some((knots, cdf)),
            _ => None,
        }
    }

    /// `(length, mass)` of every piece of a density.
    fn pieces(&self) -> Option<impl Iterator<Item = (f64, f64)> + '_> {
        let (k, c) = self.knots()?;
        Some(k.windows(2).zip(c.windows(2)).map(|(x, f)| (x[1] - x[0], f[1] - f[0])))
    }

    /// Density value at `x`, for densities.
    pub fn density(&self, x: f64) -> Option<f64> {
        let (k, c) = self.knots()?;
        let j = k.partition_point(|v| *v <= x).clamp(1, k.len() - 1);
        Some((c[j] - c[j - 1]) / (k[j] - k[j - 1]))
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.repr {
            Repr1D::Atomic { atoms, .. } => {
                let n = atoms.partition_point(|a| *a <= x);
                if n == 0 {
                    0.0
                } else {
                    self.cumulative[n - 1]
                }
            }
            Repr1D::Density { knots, cdf } => interpolate(knots, cdf, x),
        }
    }

    /// Left-continuous quantile `inf {x : F(x) >= t}`.
    pub fn quantile(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let t = t.min(1.0);
        match &self.repr {
            Repr1D::Atomic { atoms, .. } => {
                let j = self.cumulative.partition_point(|c| *c < t).min(atoms.len() - 1);
                atoms[j]
            }
            Repr1D::Density { knots, cdf } => interpolate(cdf, knots, t),
        }
    }

    /// Affine pieces `(t_lo, t_hi, slope, value_at_t_lo)` of the quantile.
    fn quantile_pieces(&self) -> Vec<(f64, f64, f64, f64)> {
        match &self.repr {
            Repr1D::Atomic { atoms, .. } => {
                let mut out = Vec::with_capacity(atoms.len());
                let mut lo = 0.0;
                for (x, hi) in atoms.iter().zip(&self.cumulative) {
                    if *hi > lo {
                        out.push((lo, *hi, 0.0, *x));
                    }
                    lo = *hi;
                }
                out
            }
            Repr1D::Density { knots, cdf } => (1..knots.len())
                .map(|j| {
                    let slope = (knots[j] - knots[j - 1]) / (cdf[j] - cdf[j - 1]);
                    (cdf[j - 1], cdf[j], slope, knots[j - 1])
                })
                .collect(),
        }
    }

    /// Push-forward under a map of `[0, 1]`; atomic measures only.
    pub fn pushforward(&self, h: &Diffeo1D) -> Result<Self> {
        let (atoms, weights) = self.atoms().ok_or_else(|| invalid("push-forward needs an atomic measure"))?;
        let moved: Vec<f64> = atoms.iter().map(|x| h.eval(*x).clamp(0.0, 1.0)).collect();
        Self::atomic(&moved, weights)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        match &self.repr {
            Repr1D::Atomic { atoms, weights } => atoms.iter().zip(weights).map(|(x, w)| w * f(*x)).sum(),
            Repr1D::Density { knots, cdf } => (1..knots.len())
                .map(|j| {
                    let eta = (cdf[j] - cdf[j - 1]) / (knots[j] - knots[j - 1]);
                    eta * gauss_legendre(&f, knots[j - 1], knots[j])
                })
                .sum(),
        }
    }
}

/// `(F_mu)_* m`: for atoms `x_1 < ... < x_k` this puts mass `x_{j+1} - x_j`
/// at the cumulative weight `C_j` (with `x_0 = 0`, `x_{k+1} = 1`, `C_0 = 0`).
/// For a density the CDF and quantile trade places, so the knots and CDF
/// values swap.
pub fn conjugate_1d(mu: &QuantileMeasure1D) -> QuantileMeasure1D {
    match &mu.repr {
        Repr1D::Atomic { atoms, .. } => {
            let k = atoms.len();
            let mut pos = Vec::with_capacity(k + 1);
            let mut w = Vec::with_capacity(k + 1);
            let mut push = |x: f64, gap: f64| {
                if gap > 0.0 {
                    pos.push(x);
                    w.push(gap);
                }
            };
            push(0.0, atoms[0]);
            for j in 0..k {
                let next = if j + 1 < k { atoms[j + 1] } else { 1.0 };
                push(mu.cumulative[j], next - atoms[j]);
            }
            QuantileMeasure1D::build(Repr1D::Atomic { atoms: pos, weights: w })
        }
        Repr1D::Density { knots, cdf } => QuantileMeasure1D::build(Repr1D::Density {
            knots: cdf.clone(),
            cdf: knots.clone(),
        }),
    }
}

/// `Ent(mu | m) = int eta log eta`, exact for the piecewise-constant
/// density; infinite for atomic measures.
pub fn entropy_1d(mu: &QuantileMeasure1D) -> f64 {
    match mu.pieces() {
        None => f64::INFINITY,
        Some(p) => p.map(|(dx, df)| df * (df / dx).ln()).sum(),
    }
}

/// `Ent(m | mu) = -int log eta dm`; requires the density to stay above `floor`.
pub fn reverse_entropy_1d(mu: &QuantileMeasure1D, floor: f64) -> Result<f64> {
    let p = mu
        .pieces()
        .ok_or_else(|| invalid("reverse entropy of an atomic measure is infinite"))?;
    if !(floor > 0.0) {
        return Err(invalid("floor must be positive"));
    }
    let mut s = 0.0;
    for (j, (dx, df)) in p.enumerate() {
        let eta = df / dx;
        if eta < floor {
            return Err(invalid(format!(
                "density {eta:.3e} below floor {floor:.3e} on piece {j}"
            )));
        }
        s -= dx * eta.ln();
    }
    Ok(s)
}

/// Maximal open intervals of zero mass, including the boundary gaps when
/// they are non-empty.
pub fn gaps_1d(mu: &QuantileMeasure1D) -> Result<Vec<(f64, f64)>> {
    let (atoms, _) = mu.atoms().ok_or_else(|| invalid("gaps are defined for atomic measures"))?;
    let mut out = Vec::with_capacity(atoms.len() + 1);
    let mut prev = 0.0;
    for &x in atoms {
        if x > prev {
            out.push((prev, x));
        }
        prev = x;
    }
    if prev < 1.0 {
        out.push((prev, 1.0));
    }
    Ok(out)
}

/// Exact `W_2` on `[0, 1]` as the `L^2` distance of the quantile functions.
pub fn w2_1d(mu: &QuantileMeasure1D, nu: &QuantileMeasure1D) -> f64 {
    let a = mu.quantile_pieces();
    let b = nu.quantile_pieces();
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut t = 0.0;
    while i < a.len() && j < b.len() {
        let end = a[i].1.min(b[j].1);
        if end > t {
            // difference of two affine functions on [t, end]
            let fa = |s: f64| a[i].3 + a[i].2 * (s - a[i].0);
            let fb = |s: f64| b[j].3 + b[j].2 * (s - b[j].0);
            let d0 = fa(t) - fb(t);
            let d1 = fa(end) - fb(end);
            total += (end - t) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            t = end;
        }
        if a[i].1 <= end {
            i += 1;
        }
        if b[j].1 <= end {
            j += 1;
        }
    }
    total.max(0.0).sqrt()
}

/// Increasing diffeomorphism of `[0, 1]` fixing the endpoints.
#[derive(Clone)]
pub struct Diffeo1D {
    name: String,
    h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dh: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Diffeo1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Diffeo1D").field("name", &self.name).finish()
    }
}

impl Diffeo1D {
    /// Wraps `h` and its derivative after checking monotonicity on a
    /// `10^4` grid and the endpoint conditions.
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let d = Self {
            name: name.into(),
            h: Arc::new(h),
            dh: Arc::new(dh),
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if (self.eval(0.0)).abs() > 1e-12 || (self.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(invalid("a diffeomorphism of [0, 1] must fix 0 and 1"));
        }
        let n = 10_000;
        let mut prev = self.eval(0.0);
        for i in 1..=n {
            let x = i as f64 / n as f64;
            let v = self.eval(x);
            if !(v > prev) || !(self.derivative(x) > 0.0) {
                return Err(invalid(format!("map is not strictly increasing near {x}")));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            h: Arc::new(|x| x),
            dh: Arc::new(|_| 1.0),
        }
    }

    /// `h(x) = x + a x (1 - x)`, a diffeomorphism for `|a| < 1`.
    pub fn quadratic(a: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(invalid("quadratic diffeomorphism needs |a| < 1"));
        }
        Self::new(format!("quadratic({a})"), move |x| x + a * x * (1.0 - x), move |x| 1.0 + a * (1.0 - 2.0 * x))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.dh)(x)
    }

    /// Inverse map by bisection, derivative by the inverse function rule.
    pub fn inverse(&self) -> Self {
        let fwd = self.clone();
        let inv = move |y: f64| {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if fwd.eval(mid) < y {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        let inv = Arc::new(inv);
        let inv2 = inv.clone();
        let fwd2 = self.clone();
        Self {
            name: format!("inverse({})", self.name),
            h: inv,
            dh: Arc::new(move |y| 1.0 / fwd2.derivative(inv2(y))),
        }
    }

    /// `|h(I)|` for `I = (a, b)`, by quadrature of `h'` so that short
    /// intervals keep full relative precision.
    fn image_length(&self, a: f64, b: f64) -> f64 {
        gauss_legendre(|x| self.derivative(x), a, b)
    }
}

/// Logarithm of `X_h^beta(mu) Y_h(mu)`, with
/// `X = exp(beta int log h' dmu)` and
/// `Y = prod_gaps sqrt(h'(I-) h'(I+)) / (|h(I)| / |I|)`.
pub fn log_cov_density(h: &Diffeo1D, beta: f64, mu: &QuantileMeasure1D) -> Result<f64> {
    let (atoms, weights) = mu.atoms().ok_or_else(|| invalid("change of variables needs an atomic measure"))?;
    let log_x: f64 = beta
        * atoms
            .iter()
            .zip(weights)
            .map(|(x, w)| w * h.derivative(*x).ln())
            .sum::<f64>();
    let mut log_y = 0.0;
    for (a, b) in gaps_1d(mu)? {
        let secant = h.image_length(a, b) / (b - a);
        log_y += 0.5 * (h.derivative(a).ln() + h.derivative(b).ln()) - secant.ln();
    }
    Ok(log_x + log_y)
}

/// `X_h^beta(mu) Y_h(mu)`.
pub fn cov_density(h: &Diffeo1D, beta: f64, mu: &QuantileMeasure1D) -> Result<f64> {
    Ok(log_cov_density(h, beta, mu)?.exp())
}

/// One exact draw of the entropic measure on `[0, 1]`, up to the
/// stick-breaking truncation.
pub fn entropic_sample_1d<R: Rng + ?Sized>(
    beta: f64,
    cfg: &StickBreakingConfig,
    rng: &mut R,
) -> Result<QuantileMeasure1D> {
    let mut c = *cfg;
    c.beta = beta;
    let nu = stick_breaking(&c, Domain::Interval, rng)?;
    let locs: Vec<f64> = nu.locations().to_vec();
    let q = QuantileMeasure1D::atomic(&locs, nu.weights())?;
    Ok(conjugate_1d(&q))
}

/// Draw `index` of a run seeded with `seed`.
pub fn entropic_draw_1d(beta: f64, seed: u64, index: u64) -> Result<QuantileMeasure1D> {
    let mut r = rng::stream(seed, index, Purpose::Measure);
    entropic_sample_1d(beta, &StickBreakingConfig::default(), &mut r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvarianceResult {
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    pub h: String,
    /// Mean of `u(mu)`.
    pub lhs: f64,
    /// Mean of `u(h_* mu) X Y`.
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    /// `sqrt(lhs_stderr^2 + rhs_stderr^2)`.
    pub combined_stderr: f64,
    /// Standard error of the per-sample difference; both sides share samples.
    pub paired_stderr: f64,
}

impl QuasiInvarianceResult {
    /// `|lhs - rhs| <= bands * combined_stderr`.
    pub fn within(&self, bands: f64) -> bool {
        (self.lhs - self.rhs).abs() <= bands * self.combined_stderr
    }
}

/// Monte Carlo check of `E[u(mu)] = E[u(h_* mu) X_h(mu) Y_h(mu)]` under the
/// entropic measure on `[0, 1]`.
pub fn quasi_invariance_test(
    h: &Diffeo1D,
    beta: f64,
    test_fn: impl Fn(&QuantileMeasure1D) -> f64 + Sync,
    n: usize,
    seed: u64,
) -> Result<QuasiInvarianceResult> {
    if n < 2 {
        return Err(invalid("need at least two samples"));
    }
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mu = entropic_draw_1d(beta, seed, i)?;
            let l = test_fn(&mu);
            let r = test_fn(&mu.pushforward(h)?) * cov_density(h, beta, &mu)?;
            Ok((l, r))
        })
        .collect::<Result<_>>()?;
    let l: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let r: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (ml, mr, md) = (mean_stderr(&l), mean_stderr(&r), mean_stderr(&d));
    Ok(QuasiInvarianceResult {
        beta,
        n,
        seed,
        h: h.name().to_string(),
        lhs: ml.mean,
        rhs: mr.mean,
        lhs_stderr: ml.stderr,
        rhs_stderr: mr.stderr,
        combined_stderr: (ml.stderr.powi(2) + mr.stderr.powi(2)).sqrt(),
        paired_stderr: md.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_is_fixed() {
        let m = QuantileMeasure1D::uniform(1000);
        let c = conjugate_1d(&m);
        assert!(w2_1d(&m, &c) < 1e-12);
        assert_abs_diff_eq!(entropy_1d(&m), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(reverse_entropy_1d(&m, 1e-3).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_atoms_conjugate() {
        let mu = QuantileMeasure1D::atomic(&[0.0, 0.5], &[0.5, 0.5]).unwrap();
        let c = conjugate_1d(&mu);
        let (a, w) = c.atoms().unwrap();
        assert_eq!(a, &[0.5, 1.0]);
        assert_eq!(w, &[0.5, 0.5]);
    }

    #[test]
    fn entropy_of_linear_density() {
        let mu = QuantileMeasure1D::from_density(|x| 2.0 * x, DENSITY_GRID).unwrap();
        assert_abs_diff_eq!(entropy_1d(&mu), 2f64.ln() - 0.5, epsilon = 1e-4);
        let atomic = QuantileMeasure1D::atomic(&[0.3], &[1.0]).unwrap();
        assert_eq!(entropy_1d(&atomic), f64::INFINITY);
    }

    #[test]
    fn linear_density_double_conjugate() {
        let mu = QuantileMeasure1D::from_density(|x| 2.0 * x, DENSITY_GRID).unwrap();
        let back = conjugate_1d(&conjugate_1d(&mu));
        assert!(w2_1d(&mu, &back) <= 1e-6);
        assert!(reverse_entropy_1d(&mu, 1e-3).is_err());
    }

    #[test]
    fn reverse_entropy_of_affine_density() {
        let mu = QuantileMeasure1D::from_density(|x| 0.5 + x, DENSITY_GRID).unwrap();
        // -int_0^1 log(1/2 + x) dx in closed form
        let exact = -(1.5 * 1.5f64.ln() - 1.5 - (0.5 * 0.5f64.ln() - 0.5));
        assert_abs_diff_eq!(reverse_entropy_1d(&mu, 0.1).unwrap(), exact, epsilon = 1e-7);
    }

    #[test]
    fn gaps_examples() {
        let d = QuantileMeasure1D::atomic(&[0.5], &[1.0]).unwrap();
        assert_eq!(gaps_1d(&d).unwrap(), vec![(0.0, 0.5), (0.5, 1.0)]);
        let two = QuantileMeasure1D::atomic(&[0.25, 0.75], &[0.5, 0.5]).unwrap();
        let g = gaps_1d(&two).unwrap();
        assert_eq!(g, vec![(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)]);
        assert_abs_diff_eq!(g.iter().map(|(a, b)| b - a).sum::<f64>(), 1.0);
    }

    #[test]
    fn cov_density_identity_and_dirac() {
        let mu = QuantileMeasure1D::atomic(&[0.2, 0.7], &[0.4, 0.6]).unwrap();
        assert_abs_diff_eq!(cov_density(&Diffeo1D::identity(), 3.0, &mu).unwrap(), 1.0, epsilon = 1e-14);

        let h = Diffeo1D::quadratic(0.1).unwrap();
        let beta = 2.0;
        let dirac = QuantileMeasure1D::atomic(&[0.5], &[1.0]).unwrap();
        let hp = |x: f64| 1.0 + 0.1 * (1.0 - 2.0 * x);
        let hh = |x: f64| x + 0.1 * x * (1.0 - x);
        let x = hp(0.5).powf(beta);
        let y = (hp(0.0) * hp(0.5)).sqrt() / (hh(0.5) / 0.5) * (hp(0.5) * hp(1.0)).sqrt() / ((1.0 - hh(0.5)) / 0.5);
        assert_abs_diff_eq!(cov_density(&h, beta, &dirac).unwrap(), x * y, epsilon = 1e-12);
    }

    #[test]
    fn cov_density_chain_rule() {
        let h = Diffeo1D::quadratic(0.1).unwrap();
        let hinv = h.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mu = entropic_sample_1d(2.0, &StickBreakingConfig::default(), &mut rng).unwrap();
            let a = cov_density(&h, 2.0, &mu).unwrap();
            let b = cov_density(&hinv, 2.0, &mu.pushforward(&h).unwrap()).unwrap();
            assert_abs_diff_eq!(a * b, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn entropic_sample_structure() {
        let mut r1 = rng::stream(5, 0, Purpose::Measure);
        let mut r2 = rng::stream(5, 0, Purpose::Measure);
        let cfg = StickBreakingConfig::new(3.0);
        let nu = stick_breaking(&cfg, Domain::Interval, &mut r1).unwrap();
        let mu = entropic_sample_1d(3.0, &cfg, &mut r2).unwrap();
        let q = QuantileMeasure1D::atomic(nu.locations(), nu.weights()).unwrap();
        let (xs, ws) = q.atoms().unwrap();
        let (ys, gs) = mu.atoms().unwrap();
        // atoms at cumulative masses, weights are the gaps between atoms of nu
        let mut c = 0.0;
        let mut expect_pos = vec![0.0];
        for w in ws {
            c += w;
            expect_pos.push(c);
        }
        let mut expect_gap = vec![xs[0]];
        for i in 0..xs.len() {
            expect_gap.push(if i + 1 < xs.len() { xs[i + 1] } else { 1.0 } - xs[i]);
        }
        assert_eq!(ys.len(), expect_pos.len());
        for (a, b) in ys.iter().zip(&expect_pos) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in gs.iter().zip(&expect_gap) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn quasi_invariance_identity_is_exact() {
        let r = quasi_invariance_test(
            &Diffeo1D::identity(),
            2.0,
            |m| m.integrate(|x| (2.0 * std::f64::consts::PI * x).sin()),
            200,
            1,
        )
        .unwrap();
        assert_eq!(r.lhs, r.rhs);
    }

    #[test]
    fn rejects_non_monotone_maps() {
        use std::f64::consts::TAU;
        let wiggle = |a: f64| Diffeo1D::new("wiggle", move |x| x + a * (TAU * x).sin() / TAU, move |x| 1.0 + a * (TAU * x).cos());
        assert!(wiggle(0.5).is_ok());
        assert!(wiggle(1.5).is_err());
        assert!(Diffeo1D::quadratic(1.5).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mu = QuantileMeasure1D::atomic(&[0.2, 0.6], &[0.3, 0.7]).unwrap();
        let back: QuantileMeasure1D = serde_json::from_str(&serde_json::to_string(&mu).unwrap()).unwrap();
        assert_eq!(back, mu);
        assert_eq!(back.cdf(0.5), 0.3);
        let d = QuantileMeasure1D::from_density(|x| 0.5 + x, 100).unwrap();
        let back: QuantileMeasure1D = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn inverse_map_and_reciprocity() {
        let mu = QuantileMeasure1D::from_density(|x| 1.0 + 0.5 * (std::f64::consts::TAU * x).sin(), DENSITY_GRID).unwrap();
        let c = conjugate_1d(&mu);
        for i in 1..200 {
            let x = i as f64 / 200.0 + 1e-4;
            assert_abs_diff_eq!(mu.quantile(mu.cdf(x)), x, epsilon = 1e-12);
            // density of the conjugate at x is 1 / eta(g(x)) with g the quantile of mu
            let rho = c.density(x).unwrap();
            let eta = mu.density(mu.quantile(x)).unwrap();
            assert!((rho * eta - 1.0).abs() < 1e-3, "x {x}: {rho} * {eta}");
        }
    }

    #[test]
    fn tiny_beta_gives_dominant_atom() {
        let mut r = rng::stream(11, 0, Purpose::Measure);
        let mu = entropic_sample_1d(1e-3, &StickBreakingConfig::default(), &mut r).unwrap();
        let max = mu.atoms().unwrap().1.iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.9, "{max}");
    }

    #[test]
    fn quantile_conventions() {
        let mu = QuantileMeasure1D::atomic(&[0.2, 0.6], &[0.3, 0.7]).unwrap();
        assert_eq!(mu.cdf(0.2), 0.3);
        assert_eq!(mu.cdf(0.19), 0.0);
        assert_eq!(mu.quantile(0.3), 0.2);
        assert_eq!(mu.quantile(0.300001), 0.6);
        assert_eq!(mu.quantile(0.0), 0.0);
    }
}
