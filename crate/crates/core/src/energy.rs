//! Cylinder functions on the space of measures, their Otto-Wasserstein
//! gradient norm, Monte Carlo estimates of the pre-energy and the lower
//! bounds on the relaxed energy, and the isometry invariance test.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugation::{sample_entropic_range, successful, ConjugationConfig, SkeletonCloud};
use crate::error::{invalid, Result};
use crate::stats::{ks_two_sample, mean_stderr, KsOutcome};
use crate::torus::{min_lift, torus_dist, IsometryFamily, TorusPoint};

/// Outer function `F: R^k -> R` of a cylinder function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outer {
    /// `F(s) = s_1`, for `k = 1`.
    Identity,
    /// `F(s) = c`.
    Constant(f64),
    /// `F(s) = s_1^2`, for `k = 1`.
    Square,
    /// `F(s) = s_1 s_2`, for `k = 2`.
    Product,
    /// `F(s) = sum s_i^2`.
    SumOfSquares,
}

impl Outer {
    fn arity_ok(&self, k: usize) -> bool {
        match self {
            Outer::Identity | Outer::Square => k == 1,
            Outer::Product => k == 2,
            Outer::Constant(_) | Outer::SumOfSquares => k >= 1,
        }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            Outer::Identity => s[0],
            Outer::Constant(c) => *c,
            Outer::Square => s[0] * s[0],
            Outer::Product => s[0] * s[1],
            Outer::SumOfSquares => s.iter().map(|v| v * v).sum(),
        }
    }

    pub fn grad(&self, s: &[f64]) -> Vec<f64> {
        match self {
            Outer::Identity => vec![1.0],
            Outer::Constant(_) => vec![0.0; s.len()],
            Outer::Square => vec![2.0 * s[0]],
            Outer::Product => vec![s[1], s[0]],
            Outer::SumOfSquares => s.iter().map(|v| 2.0 * v).collect(),
        }
    }

    fn id(&self) -> String {
        match self {
            Outer::Identity => "id".into(),
            Outer::Constant(c) => format!("const({c})"),
            Outer::Square => "sq".into(),
            Outer::Product => "prod".into(),
            Outer::SumOfSquares => "sumsq".into(),
        }
    }
}

/// Inner test function `V: T^n -> R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inner {
    /// `sin(2 pi freq x_axis)`.
    Sin { freq: u32, axis: usize },
    /// `cos(2 pi freq x_axis)`.
    Cos { freq: u32, axis: usize },
    /// Distance of the `axis` coordinate to 0 on the circle. The gradient is
    /// `+1` on the set where the coordinate is `0` or `1/2`.
    Sawtooth { axis: usize },
    /// Fourier partial sum of the centred sawtooth, odd harmonics up to
    /// `2 terms - 1`.
    SmoothSawtooth { axis: usize, terms: u32 },
}

impl Inner {
    fn axis(&self) -> usize {
        match self {
            Inner::Sin { axis, .. } | Inner::Cos { axis, .. } | Inner::Sawtooth { axis } | Inner::SmoothSawtooth { axis, .. } => {
                *axis
            }
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let c = x.coords()[self.axis()];
        match self {
            Inner::Sin { freq, .. } => (TAU * *freq as f64 * c).sin(),
            Inner::Cos { freq, .. } => (TAU * *freq as f64 * c).cos(),
            Inner::Sawtooth { .. } => min_lift(c).abs(),
            Inner::SmoothSawtooth { terms, .. } => {
                -2.0 / (PI * PI)
                    * (0..*terms)
                        .map(|j| {
                            let k = (2 * j + 1) as f64;
                            (TAU * k * c).cos() / (k * k)
                        })
                        .sum::<f64>()
            }
        }
    }

    /// Partial derivative along the function's axis; the other is zero.
    pub fn axis_derivative(&self, x: &TorusPoint) -> f64 {
        let c = x.coords()[self.axis()];
        match self {
            Inner::Sin { freq, .. } => TAU * *freq as f64 * (TAU * *freq as f64 * c).cos(),
            Inner::Cos { freq, .. } => -TAU * *freq as f64 * (TAU * *freq as f64 * c).sin(),
            Inner::Sawtooth { .. } => {
                if min_lift(c) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Inner::SmoothSawtooth { terms, .. } => {
                4.0 / PI
                    * (0..*terms)
                        .map(|j| {
                            let k = (2 * j + 1) as f64;
                            (TAU * k * c).sin() / k
                        })
                        .sum::<f64>()
            }
        }
    }

    pub fn grad(&self, x: &TorusPoint) -> [f64; 2] {
        let mut g = [0.0; 2];
        g[self.axis()] = self.axis_derivative(x);
        g
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Inner::Sin { freq, .. } | Inner::Cos { freq, .. } => TAU * *freq as f64,
            Inner::Sawtooth { .. } => 1.0,
            Inner::SmoothSawtooth { terms, .. } => 4.0 / PI * (0..*terms).map(|j| 1.0 / (2 * j + 1) as f64).sum::<f64>(),
        }
    }

    fn id(&self) -> String {
        match self {
            Inner::Sin { freq, axis } => format!("sin{freq}x{}", axis + 1),
            Inner::Cos { freq, axis } => format!("cos{freq}x{}", axis + 1),
            Inner::Sawtooth { axis } => format!("saw x{}", axis + 1),
            Inner::SmoothSawtooth { axis, terms } => format!("smoothsaw{terms}x{}", axis + 1),
        }
    }
}

/// A functional on measures, evaluated on point clouds.
pub trait MeasureFunctional: Sync {
    fn value(&self, points: &[TorusPoint]) -> f64;
    fn id(&self) -> String;
}

/// `f(mu) = F(int V_1 dmu, ..., int V_k dmu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub outer: Outer,
    pub inner: Vec<Inner>,
    /// Family with `f o Phi_1 = -f`, when certified.
    pub antisymmetry: Option<IsometryFamily>,
}

impl CylinderFunction {
    pub fn new(outer: Outer, inner: Vec<Inner>) -> Result<Self> {
        if inner.is_empty() || !outer.arity_ok(inner.len()) {
            return Err(invalid(format!("outer function {} does not take {} arguments", outer.id(), inner.len())));
        }
        Ok(Self {
            outer,
            inner,
            antisymmetry: None,
        })
    }

    /// `int V dmu`.
    pub fn linear(v: Inner) -> Self {
        Self::new(Outer::Identity, vec![v]).expect("identity takes one argument")
    }

    /// Certifies `V_i o Phi_1 = -V_i` on a `100 x 100` grid within `1e-8`,
    /// and that `F` is odd on random arguments.
    pub fn with_antisymmetry(mut self, family: IsometryFamily) -> Result<Self> {
        let dim = family.dim();
        let per: usize = if dim == 1 { 10_000 } else { 100 };
        let pts: Vec<TorusPoint> = (0..per.pow(dim as u32))
            .map(|i| {
                let c = [(i % per) as f64 / per as f64 + 1e-3, (i / per) as f64 / per as f64 + 1e-3];
                TorusPoint::new(&c[..dim]).expect("grid point in the torus")
            })
            .collect();
        for v in &self.inner {
            if v.axis() >= dim {
                return Err(invalid("test function axis exceeds the family dimension"));
            }
            let worst = pts
                .iter()
                .map(|x| (v.eval(&family.apply(x, 1.0)) + v.eval(x)).abs())
                .fold(0.0, f64::max);
            if worst > 1e-8 {
                return Err(invalid(format!("{} is not antisymmetric: defect {worst:.3e}", v.id())));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let s: Vec<f64> = (0..self.inner.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            if (self.outer.eval(&neg) + self.outer.eval(&s)).abs() > 1e-12 {
                return Err(invalid(format!("outer function {} is not odd", self.outer.id())));
            }
        }
        self.antisymmetry = Some(family);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.inner.len()
    }

    /// Cloud averages of the inner functions.
    pub fn inner_means(&self, points: &[TorusPoint]) -> Vec<f64> {
        let n = points.len() as f64;
        self.inner
            .iter()
            .map(|v| points.iter().map(|x| v.eval(x)).sum::<f64>() / n)
            .collect()
    }
}

impl MeasureFunctional for CylinderFunction {
    fn value(&self, points: &[TorusPoint]) -> f64 {
        self.outer.eval(&self.inner_means(points))
    }

    fn id(&self) -> String {
        let parts: Vec<String> = self.inner.iter().map(Inner::id).collect();
        format!("{}({})", self.outer.id(), parts.join(";"))
    }
}

/// Built-in cylinder functions used by the energy report.
pub fn catalog() -> Vec<CylinderFunction> {
    let c = |o, v: Vec<Inner>| CylinderFunction::new(o, v).expect("catalog entries are well formed");
    vec![
        CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 }),
        CylinderFunction::linear(Inner::Cos { freq: 1, axis: 0 }),
        CylinderFunction::linear(Inner::Sawtooth { axis: 0 }),
        CylinderFunction::linear(Inner::SmoothSawtooth { axis: 0, terms: 4 }),
        c(Outer::Square, vec![Inner::Sin { freq: 1, axis: 1 }]),
        c(Outer::Product, vec![Inner::Sin { freq: 1, axis: 0 }, Inner::Cos { freq: 1, axis: 1 }]),
        c(Outer::SumOfSquares, vec![Inner::Cos { freq: 2, axis: 0 }, Inner::Sin { freq: 1, axis: 1 }]),
    ]
}

/// `||grad_W f||^2(mu) = sum_ij d_iF d_jF int <grad V_i, grad V_j> dmu`, with
/// integrals replaced by cloud averages.
pub fn otto_grad_norm_sq(f: &CylinderFunction, points: &[TorusPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("empty cloud"));
    }
    let g = f.outer.grad(&f.inner_means(points));
    let total: f64 = points
        .iter()
        .map(|x| {
            let mut v = [0.0; 2];
            for (gi, vi) in g.iter().zip(&f.inner) {
                let d = vi.grad(x);
                v[0] += gi * d[0];
                v[1] += gi * d[1];
            }
            v[0] * v[0] + v[1] * v[1]
        })
        .sum();
    Ok(total / points.len() as f64)
}

/// A set of entropic clouds shared by several estimators.
#[derive(Debug, Clone)]
pub struct CloudEnsemble {
    pub beta: f64,
    pub dim: usize,
    pub seed: u64,
    pub clouds: Vec<SkeletonCloud>,
    pub failed: usize,
}

impl CloudEnsemble {
    pub fn draw(beta: f64, dim: usize, n: usize, seed: u64, cfg: &ConjugationConfig) -> Result<Self> {
        Self::draw_range(beta, dim, 0..n as u64, seed, cfg)
    }

    /// Draws with sample indices `indices`; disjoint ranges are independent.
    pub fn draw_range(
        beta: f64,
        dim: usize,
        indices: std::ops::Range<u64>,
        seed: u64,
        cfg: &ConjugationConfig,
    ) -> Result<Self> {
        if !(beta > 0.0) || cfg.n_points == 0 {
            return Err(invalid("need beta > 0 and at least one point per measure"));
        }
        let (clouds, failed) = successful(sample_entropic_range(beta, dim, indices, seed, cfg));
        if clouds.is_empty() {
            return Err(invalid(format!("all {failed} entropic draws failed")));
        }
        Ok(Self {
            beta,
            dim,
            seed,
            clouds,
            failed,
        })
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    PreEnergy,
    KeyBound,
    AntisymBound,
    LipBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub estimator_tag: EstimatorTag,
    pub f_id: String,
    pub beta: f64,
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
    pub seed: u64,
}

fn estimate(tag: EstimatorTag, f_id: String, ens: &CloudEnsemble, samples: &[f64]) -> EnergyEstimate {
    let e = mean_stderr(samples);
    EnergyEstimate {
        estimator_tag: tag,
        f_id,
        beta: ens.beta,
        n: samples.len(),
        value: e.mean,
        stderr: e.stderr,
        seed: ens.seed,
    }
}

/// `E^0_W(f) = 1/2 int ||grad_W f||^2 dP^beta`.
pub fn estimate_pre_energy(f: &CylinderFunction, ens: &CloudEnsemble) -> Result<EnergyEstimate> {
    if ens.len() < 30 {
        return Err(invalid("the pre-energy estimate needs at least 30 samples"));
    }
    let v: Vec<f64> = ens
        .clouds
        .par_iter()
        .map(|c| Ok(0.5 * otto_grad_norm_sq(f, &c.points)?))
        .collect::<Result<_>>()?;
    Ok(estimate(EstimatorTag::PreEnergy, MeasureFunctional::id(f), ens, &v))
}

/// Applies `Phi_t` to every point.
pub fn pushforward_points(points: &[TorusPoint], family: &IsometryFamily, t: f64) -> Vec<TorusPoint> {
    points.iter().map(|p| family.apply(p, t)).collect()
}

pub fn pushforward_cloud(cloud: &SkeletonCloud, family: &IsometryFamily, t: f64) -> SkeletonCloud {
    SkeletonCloud {
        points: pushforward_points(&cloud.points, family, t),
        ..cloud.clone()
    }
}

/// Negative control for the invariance test: only points with first
/// coordinate below `1/2` are moved.
pub fn half_pushforward_points(points: &[TorusPoint], family: &IsometryFamily, t: f64) -> Vec<TorusPoint> {
    points
        .iter()
        .map(|p| if p.coords()[0] < 0.5 { family.apply(p, t) } else { *p })
        .collect()
}

fn check_family(family: &IsometryFamily, ens: &CloudEnsemble) -> Result<f64> {
    let l = family.lipschitz();
    if !(l > 0.0) {
        return Err(invalid("the isometry family must have a positive Lipschitz constant"));
    }
    if family.dim() != ens.dim {
        return Err(invalid("family and samples live on different tori"));
    }
    Ok(l)
}

/// `1/(2 L^2) int |f((Phi_1)_* mu) - f(mu)|^2 dP^beta`.
pub fn key_lower_bound(f: &dyn MeasureFunctional, family: &IsometryFamily, ens: &CloudEnsemble) -> Result<EnergyEstimate> {
    let l = check_family(family, ens)?;
    let c = 1.0 / (2.0 * l * l);
    let v: Vec<f64> = ens
        .clouds
        .par_iter()
        .map(|cl| {
            let d = f.value(&pushforward_points(&cl.points, family, 1.0)) - f.value(&cl.points);
            c * (d * d)
        })
        .collect();
    Ok(estimate(EstimatorTag::KeyBound, f.id(), ens, &v))
}

/// `2/L^2 int f^2 dP^beta` for `f` with `f o Phi_1 = -f`, checked directly on
/// the first 100 samples within `1e-8`.
pub fn antisym_lower_bound(f: &dyn MeasureFunctional, family: &IsometryFamily, ens: &CloudEnsemble) -> Result<EnergyEstimate> {
    let l = check_family(family, ens)?;
    for cl in ens.clouds.iter().take(100) {
        let defect = (f.value(&pushforward_points(&cl.points, family, 1.0)) + f.value(&cl.points)).abs();
        if defect > 1e-8 {
            return Err(invalid(format!("{} is not antisymmetric: defect {defect:.3e}", f.id())));
        }
    }
    // written as c (2f)^2 so that it agrees with the key bound up to rounding
    let c = 1.0 / (2.0 * l * l);
    let v: Vec<f64> = ens
        .clouds
        .par_iter()
        .map(|cl| {
            let d = 2.0 * f.value(&cl.points);
            c * (d * d)
        })
        .collect();
    Ok(estimate(EstimatorTag::AntisymBound, f.id(), ens, &v))
}

/// `W_2` from a cloud to a Dirac mass, exact: every point moves to `x`.
pub fn w2_to_dirac(points: &[TorusPoint], x: &TorusPoint) -> Result<f64> {
    let mut s = 0.0;
    for p in points {
        s += torus_dist(p, x)?.powi(2);
    }
    Ok((s / points.len() as f64).sqrt())
}

/// `(eta / 8) Lip(V)^2` with `eta` the frequency of clouds within `eps` of
/// `delta_{x0}`. Requires `|V(x1) - V(x0)| >= Lip(V) (d(x0, x1) / 2 + 2 eps)`.
pub fn lip_lower_bound(v: &Inner, x0: &TorusPoint, x1: &TorusPoint, eps: f64, ens: &CloudEnsemble) -> Result<EnergyEstimate> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let lip = v.lipschitz();
    let gap = (v.eval(x1) - v.eval(x0)).abs();
    let need = lip * (0.5 * torus_dist(x0, x1)? + 2.0 * eps);
    if gap < need {
        return Err(invalid(format!(
            "|V(x1) - V(x0)| = {gap} is below Lip(V) (d/2 + 2 eps) = {need}"
        )));
    }
    let hits: Vec<f64> = ens
        .clouds
        .par_iter()
        .map(|c| Ok(if w2_to_dirac(&c.points, x0)? < eps { 1.0 } else { 0.0 }))
        .collect::<Result<_>>()?;
    let scale = lip * lip / 8.0;
    let scaled: Vec<f64> = hits.iter().map(|h| h * scale).collect();
    Ok(estimate(EstimatorTag::LipBound, MeasureFunctional::id(&CylinderFunction::linear(*v)), ens, &scaled))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOutcome {
    pub f_id: String,
    pub t: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Two-sample KS test between `{f(mu_j)}` on `a` and `{f(push(mu'_j))}` on `b`.
pub fn invariance_test(
    f: &dyn MeasureFunctional,
    push: impl Fn(&[TorusPoint]) -> Vec<TorusPoint> + Sync,
    t: f64,
    a: &CloudEnsemble,
    b: &CloudEnsemble,
) -> InvarianceOutcome {
    let fa: Vec<f64> = a.clouds.par_iter().map(|c| f.value(&c.points)).collect();
    let fb: Vec<f64> = b.clouds.par_iter().map(|c| f.value(&push(&c.points))).collect();
    let KsOutcome {
        statistic,
        p_value,
        pass,
    } = ks_two_sample(&fa, &fb);
    InvarianceOutcome {
        f_id: f.id(),
        t,
        n_a: fa.len(),
        n_b: fb.len(),
        statistic,
        p_value,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpRow {
    pub beta: f64,
    pub eps: f64,
    pub n: usize,
    /// Frequency of clouds with mass above `1 - eps` in `0 < x_1 < 1/2 - eps/2`.
    pub p_strip: f64,
    pub p_strip_stderr: f64,
    /// Same for `-1/2 < x_1 < -eps/2`, read in centred coordinates.
    pub p_mirror: f64,
    pub p_mirror_stderr: f64,
    /// `1/2 - eps`.
    pub threshold: f64,
    pub strip_ok: bool,
    pub mirror_ok: bool,
    /// `1/2 (1 - 2 eps)^4`, valid when both strips pass.
    pub implied_bound: f64,
    pub pre_energy: f64,
    pub pre_energy_stderr: f64,
    pub seed: u64,
}

impl SharpRow {
    pub fn certified(&self) -> bool {
        self.strip_ok && self.mirror_ok
    }
}

fn strip_mass(points: &[TorusPoint], lo: f64, hi: f64) -> f64 {
    points
        .iter()
        .filter(|p| {
            let c = min_lift(p.coords()[0]);
            c > lo && c < hi
        })
        .count() as f64
        / points.len() as f64
}

/// Strip probabilities for the sawtooth `V(x) = |x_1|` and the lower bound
/// they imply, with the pre-energy alongside.
pub fn sharp_example_report(eps_list: &[f64], ens: &CloudEnsemble) -> Result<Vec<SharpRow>> {
    if eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(invalid("eps must lie in (0, 1)"));
    }
    let pre = if ens.len() >= 30 {
        estimate_pre_energy(&CylinderFunction::linear(Inner::Sawtooth { axis: 0 }), ens)?
    } else {
        return Err(invalid("the sharp example needs at least 30 samples"));
    };
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let hit = |lo: f64, hi: f64| -> Vec<f64> {
                ens.clouds
                    .iter()
                    .map(|c| if strip_mass(&c.points, lo, hi) > 1.0 - eps { 1.0 } else { 0.0 })
                    .collect()
            };
            let a = mean_stderr(&hit(0.0, 0.5 - 0.5 * eps));
            let b = mean_stderr(&hit(-0.5, -0.5 * eps));
            let threshold = 0.5 - eps;
            SharpRow {
                beta: ens.beta,
                eps,
                n: ens.len(),
                p_strip: a.mean,
                p_strip_stderr: a.stderr,
                p_mirror: b.mean,
                p_mirror_stderr: b.stderr,
                threshold,
                strip_ok: a.mean >= threshold - 3.0 * a.stderr,
                mirror_ok: b.mean >= threshold - 3.0 * b.stderr,
                implied_bound: 0.5 * (1.0 - 2.0 * eps).max(0.0).powi(4),
                pre_energy: pre.value,
                pre_energy_stderr: pre.stderr,
                seed: ens.seed,
            }
        })
        .collect();
    Ok(rows)
}

/// Writes estimates as CSV rows `estimator_tag,f_id,beta,n,value,stderr,seed`.
pub fn write_estimates<W: Write>(out: W, rows: &[EnergyEstimate]) -> Result<()> {
    crate::metrics::write_rows(out, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid_cloud(per: usize) -> Vec<TorusPoint> {
        (0..per * per)
            .map(|i| TorusPoint::new(&[((i % per) as f64 + 0.5) / per as f64, ((i / per) as f64 + 0.5) / per as f64]).unwrap())
            .collect()
    }

    fn random_cloud(seed: u64, n: usize) -> Vec<TorusPoint> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| TorusPoint::new(&[r.random(), r.random()]).unwrap()).collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for f in catalog() {
            for _ in 0..50 {
                let s: Vec<f64> = (0..f.k()).map(|_| r.random_range(-1.0..1.0)).collect();
                let g = f.outer.grad(&s);
                for i in 0..f.k() {
                    let mut p = s.clone();
                    let mut m = s.clone();
                    p[i] += h;
                    m[i] -= h;
                    let fd = (f.outer.eval(&p) - f.outer.eval(&m)) / (2.0 * h);
                    assert_abs_diff_eq!(g[i], fd, epsilon = 1e-5);
                }
                for v in &f.inner {
                    let x = [r.random::<f64>(), r.random::<f64>()];
                    let a = v.axis();
                    if let Inner::Sawtooth { .. } = v {
                        let l = min_lift(x[a]).abs();
                        if !(1e-3..=0.5 - 1e-3).contains(&l) {
                            continue;
                        }
                    }
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] = (x[a] + h).rem_euclid(1.0);
                    xm[a] = (x[a] - h).rem_euclid(1.0);
                    let fd = (v.eval(&TorusPoint::new(&xp).unwrap()) - v.eval(&TorusPoint::new(&xm).unwrap())) / (2.0 * h);
                    assert_abs_diff_eq!(v.axis_derivative(&TorusPoint::new(&x).unwrap()), fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn grad_norm_examples() {
        let cloud = random_cloud(1, 300);
        let saw = CylinderFunction::linear(Inner::Sawtooth { axis: 0 });
        assert_eq!(otto_grad_norm_sq(&saw, &cloud).unwrap(), 1.0);
        let c = CylinderFunction::new(Outer::Constant(3.0), vec![Inner::Sin { freq: 1, axis: 0 }]).unwrap();
        assert_eq!(otto_grad_norm_sq(&c, &cloud).unwrap(), 0.0);
        let sin = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
        assert_abs_diff_eq!(otto_grad_norm_sq(&sin, &grid_cloud(64)).unwrap(), 2.0 * PI * PI, epsilon = 1e-9);
    }

    /// For `F = id` the norm is the cloud mean of `|grad V|^2`, and it is the
    /// first-order rate of change of `f` along the velocity field `grad V`.
    #[test]
    fn grad_norm_is_first_variation() {
        let cloud = random_cloud(2, 400);
        for f in catalog().into_iter().filter(|f| f.outer != Outer::Constant(0.0)) {
            let g = f.outer.grad(&f.inner_means(&cloud));
            let field = |x: &TorusPoint| {
                let mut v = [0.0; 2];
                for (gi, vi) in g.iter().zip(&f.inner) {
                    let d = vi.grad(x);
                    v[0] += gi * d[0];
                    v[1] += gi * d[1];
                }
                v
            };
            let h = 1e-7;
            let moved: Vec<TorusPoint> = cloud
                .iter()
                .map(|x| {
                    let v = field(x);
                    crate::torus::exp_map(x, &[h * v[0], h * v[1]]).unwrap()
                })
                .collect();
            let rate = (f.value(&moved) - f.value(&cloud)) / h;
            let norm = otto_grad_norm_sq(&f, &cloud).unwrap();
            if matches!(f.inner[0], Inner::Sawtooth { .. }) {
                continue;
            }
            assert!((rate - norm).abs() < 1e-4 * (1.0 + norm), "{}: {rate} vs {norm}", f.id());
        }
    }

    #[test]
    fn antisymmetry_certificates() {
        let half = IsometryFamily::from_displacement(&[0.5, 0.0]).unwrap();
        assert!(CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 }).with_antisymmetry(half).is_ok());
        assert!(CylinderFunction::linear(Inner::SmoothSawtooth { axis: 0, terms: 5 }).with_antisymmetry(half).is_ok());
        assert!(CylinderFunction::linear(Inner::Cos { freq: 2, axis: 0 }).with_antisymmetry(half).is_err());
        assert!(CylinderFunction::linear(Inner::Sawtooth { axis: 0 }).with_antisymmetry(half).is_err());
        let sq = CylinderFunction::new(Outer::Square, vec![Inner::Sin { freq: 1, axis: 0 }]).unwrap();
        assert!(sq.with_antisymmetry(half).is_err());
    }

    fn fake_ensemble(n: usize) -> CloudEnsemble {
        CloudEnsemble {
            beta: 1.0,
            dim: 2,
            seed: 0,
            clouds: (0..n)
                .map(|i| SkeletonCloud {
                    dim: 2,
                    points: random_cloud(100 + i as u64, 50),
                    source_beta: Some(1.0),
                    atom_count: 1,
                    seed: 0,
                    index: i as u64,
                    solver_residual: 0.0,
                    solver_iterations: 0,
                    merged_mass: 0.0,
                })
                .collect(),
            failed: 0,
        }
    }

    #[test]
    fn bounds_on_synthetic_clouds() {
        let ens = fake_ensemble(40);
        let half = IsometryFamily::from_displacement(&[0.5, 0.0]).unwrap();
        let sin = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
        let key = key_lower_bound(&sin, &half, &ens).unwrap();
        let anti = antisym_lower_bound(&sin, &half, &ens).unwrap();
        assert!(key.value > 0.0);
        assert!((key.value - anti.value).abs() <= 1e-12 * key.value);
        let konst = CylinderFunction::new(Outer::Constant(1.0), vec![Inner::Sin { freq: 1, axis: 0 }]).unwrap();
        assert_eq!(key_lower_bound(&konst, &half, &ens).unwrap().value, 0.0);
        let cos = CylinderFunction::linear(Inner::Cos { freq: 2, axis: 0 });
        assert!(antisym_lower_bound(&cos, &half, &ens).is_err());
        let zero = IsometryFamily::from_displacement(&[0.0, 0.0]).unwrap();
        assert!(key_lower_bound(&sin, &zero, &ens).is_err());
        let pre = estimate_pre_energy(&CylinderFunction::linear(Inner::Sawtooth { axis: 0 }), &ens).unwrap();
        assert_eq!((pre.value, pre.stderr), (0.5, 0.0));
    }

    #[test]
    fn lip_bound_precondition() {
        let ens = fake_ensemble(30);
        let v = Inner::Sawtooth { axis: 0 };
        let x0 = TorusPoint::new(&[0.0, 0.0]).unwrap();
        let x1 = TorusPoint::new(&[0.5, 0.0]).unwrap();
        assert!(lip_lower_bound(&v, &x0, &x1, 0.3, &ens).is_err());
        let b = lip_lower_bound(&v, &x0, &x1, 0.1, &ens).unwrap();
        // uniform random clouds are far from any Dirac mass
        assert_eq!((b.value, b.stderr), (0.0, 0.0));
    }

    #[test]
    fn pushforward_examples() {
        let cloud = random_cloud(3, 100);
        let fam = IsometryFamily::from_displacement(&[0.3, -0.2]).unwrap();
        assert_eq!(pushforward_points(&cloud, &fam, 0.0), cloud);
        let a = pushforward_points(&pushforward_points(&cloud, &fam, 0.25), &fam, 0.5);
        let b = pushforward_points(&cloud, &fam, 0.75);
        for (p, q) in a.iter().zip(&b) {
            assert!(torus_dist(p, q).unwrap() < 1e-12);
        }
        for t in [0.1, 0.4] {
            let moved = pushforward_points(&cloud, &fam, t);
            let m = |pts: &[TorusPoint]| {
                crate::measure::AtomicMeasure::empirical(
                    crate::measure::Domain::Torus(2),
                    pts.iter().flat_map(|p| p.coords().to_vec()).collect(),
                )
                .unwrap()
            };
            let w = crate::metrics::w2(&m(&cloud), &m(&moved)).unwrap();
            assert!(w <= fam.lipschitz() * t + 1e-12);
        }
    }

    #[test]
    fn invariance_identity_and_control() {
        let ens = fake_ensemble(200);
        let f = CylinderFunction::linear(Inner::Cos { freq: 1, axis: 0 });
        let fam = IsometryFamily::from_displacement(&[1.0, 0.0]).unwrap();
        let same = invariance_test(&f, |p| pushforward_points(p, &fam, 0.0), 0.0, &ens, &ens);
        assert_eq!(same.statistic, 0.0);
        let broken = invariance_test(&f, |p| half_pushforward_points(p, &fam, 0.37), 0.37, &ens, &ens);
        assert!(!broken.pass);
    }

    #[test]
    fn sharp_report_shapes() {
        let ens = fake_ensemble(30);
        let rows = sharp_example_report(&[0.1, 0.49], &ens).unwrap();
        assert_eq!(rows[0].pre_energy, 0.5);
        assert_abs_diff_eq!(rows[0].implied_bound, 0.5 * 0.8f64.powi(4), epsilon = 1e-15);
        assert!(rows[1].implied_bound < 1e-6);
        assert_eq!(rows[1].p_strip, 0.0);
    }
}
