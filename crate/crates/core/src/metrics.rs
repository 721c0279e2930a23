//! Wasserstein distances between atomic measures and the Monte Carlo
//! diagnostics built on them: mean value, the two beta limits, full support
//! and the large-deviation scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugation::{sample_entropic, successful, ConjugationConfig, SkeletonCloud};
use crate::error::{invalid, Result};
use crate::measure::{stick_breaking, AtomicMeasure, AxisBox, Domain, StickBreakingConfig};
use crate::one_dim::{entropic_draw_1d, entropy_1d, w2_1d, QuantileMeasure1D};
use crate::rng::{self, Purpose};
use crate::stats::{mean_stderr, wilson_interval, Z_99};

/// Largest atom count accepted by [`w2_discrete`].
pub const MAX_ATOMS: usize = 2000;

/// Cloud size used when a cloud stands in for its measure inside `W_2`.
pub const CLOUD_SUBSAMPLE: usize = 500;

/// An optimal coupling in sparse form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source: AtomicMeasure,
    pub target: AtomicMeasure,
    /// `(i, j, q_ij)` for the positive entries of the coupling.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        self.entries.iter().for_each(|(i, _, q)| r[*i] += q);
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        self.entries.iter().for_each(|(_, j, q)| c[*j] += q);
        c
    }

    /// `sum q_ij d^2(x_i, y_j)` recomputed from the entries.
    pub fn recomputed_cost(&self) -> f64 {
        let d = self.source.domain();
        self.entries
            .iter()
            .map(|(i, j, q)| q * d.dist_sq(self.source.location(*i), self.target.location(*j)))
            .sum()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.target.len()]; self.source.len()];
        self.entries.iter().for_each(|(i, j, q)| m[*i][*j] += q);
        m
    }
}

#[derive(PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Exact min-cost transportation by successive shortest paths with
/// Johnson potentials. Nodes `0..n` are sources, `n..n+m` sinks.
fn transport(cost: &[f64], supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = supply.len();
    let m = demand.len();
    let c = |i: usize, j: usize| cost[i * m + j];
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0f64; n * m];
    // sources with positive flow into each sink (the backward residual arcs)
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut pot = vec![0.0f64; n + m];
    for j in 0..m {
        pot[n + j] = (0..n).map(|i| c(i, j)).fold(f64::INFINITY, f64::min);
    }
    const EPS: f64 = 1e-15;
    let mut dist = vec![f64::INFINITY; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    loop {
        if !sup.iter().any(|s| *s > EPS) || !dem.iter().any(|d| *d > EPS) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        let mut heap = BinaryHeap::new();
        for i in 0..n {
            if sup[i] > EPS {
                dist[i] = 0.0;
                heap.push(Label(0.0, i));
            }
        }
        let mut sink = usize::MAX;
        while let Some(Label(d, v)) = heap.pop() {
            if done[v] || d > dist[v] {
                continue;
            }
            done[v] = true;
            if v >= n {
                let j = v - n;
                if dem[j] > EPS {
                    sink = v;
                    break;
                }
                for &i in &back[j] {
                    let rc = (-c(i, j) + pot[v] - pot[i]).max(0.0);
                    if d + rc < dist[i] {
                        dist[i] = d + rc;
                        prev[i] = v;
                        heap.push(Label(dist[i], i));
                    }
                }
            } else {
                for j in 0..m {
                    let w = n + j;
                    if done[w] {
                        continue;
                    }
                    let rc = (c(v, j) + pot[v] - pot[w]).max(0.0);
                    if d + rc < dist[w] {
                        dist[w] = d + rc;
                        prev[w] = v;
                        heap.push(Label(dist[w], w));
                    }
                }
            }
        }
        if sink == usize::MAX {
            break;
        }
        let dt = dist[sink];
        for v in 0..n + m {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut amount = dem[sink - n];
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(sup[v]);
        let origin = v;
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                let j = v - n;
                if flow[u * m + j] == 0.0 {
                    back[j].push(u);
                }
                flow[u * m + j] += amount;
            } else {
                let j = u - n;
                let f = &mut flow[v * m + j];
                *f -= amount;
                if *f <= EPS {
                    *f = 0.0;
                    back[j].retain(|x| *x != v);
                }
            }
            v = u;
        }
        sup[origin] = if sup[origin] - amount <= EPS { 0.0 } else { sup[origin] - amount };
        let j = sink - n;
        dem[j] = if dem[j] - amount <= EPS { 0.0 } else { dem[j] - amount };
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if flow[i * m + j] > 0.0 {
                out.push((i, j, flow[i * m + j]));
            }
        }
    }
    out
}

/// Exact quadratic Wasserstein distance between two atomic measures on the
/// same domain, with an optimal plan.
pub fn w2_discrete(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<(f64, TransportPlan)> {
    if mu.domain() != nu.domain() {
        return Err(invalid("measures live on different domains"));
    }
    if mu.len() > MAX_ATOMS || nu.len() > MAX_ATOMS {
        return Err(invalid(format!("at most {MAX_ATOMS} atoms per measure")));
    }
    let (a, b): (f64, f64) = (mu.weights().iter().sum(), nu.weights().iter().sum());
    if (a - b).abs() > 1e-9 {
        return Err(invalid(format!("total masses differ: {a} vs {b}")));
    }
    let d = mu.domain();
    let m = nu.len();
    let mut cost = vec![0.0; mu.len() * m];
    cost.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            *c = d.dist_sq(mu.location(i), nu.location(j));
        }
    });
    let entries = transport(&cost, mu.weights(), nu.weights());
    let total: f64 = entries.iter().map(|(i, j, q)| q * cost[i * m + j]).sum();
    let plan = TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        entries,
        cost: total,
    };
    Ok((total.max(0.0).sqrt(), plan))
}

/// `W_2` distance only.
pub fn w2(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    Ok(w2_discrete(mu, nu)?.0)
}

/// Minimiser of `y -> sum w_i d^2(x_i, y)` on the circle and its value.
/// With the coordinates cut open at a point, the objective is bounded by the
/// variance of the unrolled sample, with equality at the optimal cut.
fn circle_barycenter(xs: &[f64], w: &[f64]) -> (f64, f64) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    let (mut s1, mut s2) = (0.0, 0.0);
    for &i in &order {
        s1 += w[i] * xs[i];
        s2 += w[i] * xs[i] * xs[i];
    }
    let mut best = (s1, s2 - s1 * s1);
    // move the first k sorted points one turn to the right
    for &i in &order {
        let x = xs[i];
        s1 += w[i];
        s2 += w[i] * (2.0 * x + 1.0);
        let var = s2 - s1 * s1;
        if var < best.1 {
            best = (s1, var);
        }
    }
    (best.0.rem_euclid(1.0).min(1.0 - f64::EPSILON / 2.0), best.1.max(0.0))
}

/// The Dirac mass closest to `mu` in `W_2`.
pub fn best_dirac(mu: &AtomicMeasure) -> Result<AtomicMeasure> {
    let dim = mu.dim();
    let mut loc = Vec::with_capacity(dim);
    for a in 0..dim {
        let xs: Vec<f64> = (0..mu.len()).map(|i| mu.location(i)[a]).collect();
        match mu.domain() {
            Domain::Torus(_) => loc.push(circle_barycenter(&xs, mu.weights()).0),
            Domain::Interval => loc.push(xs.iter().zip(mu.weights()).map(|(x, w)| x * w).sum::<f64>()),
        }
    }
    AtomicMeasure::dirac(mu.domain(), &loc)
}

/// Equal-weight measure on at most `max_points` cloud points, chosen without
/// replacement from the cloud's auxiliary stream.
pub fn cloud_measure(cloud: &SkeletonCloud, max_points: usize) -> Result<AtomicMeasure> {
    if cloud.is_empty() {
        return Err(invalid("empty cloud"));
    }
    let pts: Vec<f64> = if cloud.len() <= max_points {
        cloud.points.iter().flat_map(|p| p.coords().to_vec()).collect()
    } else {
        let mut r = rng::stream(cloud.seed, cloud.index, Purpose::Aux);
        let mut idx = sample_indices(&mut r, cloud.len(), max_points).into_vec();
        idx.sort_unstable();
        idx.iter().flat_map(|i| cloud.points[*i].coords().to_vec()).collect()
    };
    AtomicMeasure::empirical(Domain::Torus(cloud.dim), pts)?.merged_duplicates()
}

/// `W_2` between two disjoint subsamples of the same cloud: the error made
/// by letting a finite cloud stand in for its measure.
pub fn cloud_self_distance(cloud: &SkeletonCloud, size: usize) -> Result<f64> {
    if cloud.len() < 2 * size {
        return Err(invalid("cloud too small for two disjoint subsamples"));
    }
    let mut r = rng::stream(cloud.seed, cloud.index, Purpose::Aux);
    let idx = sample_indices(&mut r, cloud.len(), 2 * size).into_vec();
    let take = |s: &[usize]| -> Result<AtomicMeasure> {
        AtomicMeasure::empirical(
            Domain::Torus(cloud.dim),
            s.iter().flat_map(|i| cloud.points[*i].coords().to_vec()).collect(),
        )?
        .merged_duplicates()
    };
    w2(&take(&idx[..size])?, &take(&idx[size..])?)
}

/// Which random measure a diagnostic samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// The entropic measure, through conjugate clouds.
    Entropic,
    /// The Dirichlet-Ferguson measure itself.
    DirichletFerguson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub cell: usize,
    /// The box as a product of half-open intervals.
    pub region: String,
    pub empirical_mean: f64,
    pub expected: f64,
    pub stderr: f64,
    pub z: f64,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub law: Law,
    pub rows: Vec<MeanRow>,
    pub failed_samples: usize,
}

impl MeanCheck {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

fn mean_rows(values: &[Vec<f64>], partition: &[AxisBox], beta: f64, seed: u64) -> Vec<MeanRow> {
    partition
        .iter()
        .enumerate()
        .map(|(c, b)| {
            let col: Vec<f64> = values.iter().map(|v| v[c]).collect();
            let est = mean_stderr(&col);
            let expected = b.volume();
            let z = if est.stderr > 0.0 {
                (est.mean - expected) / est.stderr
            } else if est.mean == expected {
                0.0
            } else {
                f64::INFINITY
            };
            MeanRow {
                cell: c,
                region: b
                    .lo
                    .iter()
                    .zip(&b.hi)
                    .map(|(l, h)| format!("[{l},{h})"))
                    .collect::<Vec<_>>()
                    .join("x"),
                empirical_mean: est.mean,
                expected,
                stderr: est.stderr,
                z,
                n: col.len(),
                beta,
                seed,
            }
        })
        .collect()
}

/// Empirical `E[mu(A)]` against `m(A)` for every box of a partition.
pub fn mean_measure_check(
    law: Law,
    beta: f64,
    n: usize,
    partition: &[AxisBox],
    cfg: &ConjugationConfig,
    seed: u64,
) -> Result<MeanCheck> {
    if n < 100 {
        return Err(invalid("the mean check needs at least 100 samples"));
    }
    let dim = partition.first().ok_or_else(|| invalid("empty partition"))?.dim();
    let (values, failed): (Vec<Vec<f64>>, usize) = match law {
        Law::Entropic => {
            let (clouds, failed) = successful(sample_entropic(beta, dim, n, seed, cfg)?);
            let v = clouds
                .iter()
                .map(|c| {
                    partition
                        .iter()
                        .map(|b| c.points.iter().filter(|p| b.contains(p.coords())).count() as f64 / c.len() as f64)
                        .collect()
                })
                .collect();
            (v, failed)
        }
        Law::DirichletFerguson => {
            let cfg = StickBreakingConfig { beta, seed, ..Default::default() };
            let v = (0..n as u64)
                .into_par_iter()
                .map(|i| -> Result<Vec<f64>> {
                    let mut r = rng::stream(seed, i, Purpose::Measure);
                    let nu = stick_breaking(&cfg, Domain::Torus(dim), &mut r)?;
                    Ok(partition.iter().map(|b| nu.mass_in(b)).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            (v, 0)
        }
    };
    if values.len() < 2 {
        return Err(invalid("too few successful samples"));
    }
    Ok(MeanCheck {
        law,
        rows: mean_rows(&values, partition, beta, seed),
        failed_samples: failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaLimitRow {
    pub beta: f64,
    /// Mean `W_2` from the cloud to its closest Dirac mass.
    pub dirac_proximity: f64,
    pub dirac_stderr: f64,
    /// Mean `W_2` from the cloud to the uniform grid measure.
    pub uniform_proximity: f64,
    pub uniform_stderr: f64,
    pub n: usize,
    pub failed: usize,
    pub seed: u64,
}

/// Side length of the grid standing in for the uniform measure.
pub const UNIFORM_REFERENCE: usize = 16;

/// Both proximity statistics of one cloud.
pub fn proximities(cloud: &SkeletonCloud, reference: &AtomicMeasure) -> Result<(f64, f64)> {
    let mu = cloud_measure(cloud, CLOUD_SUBSAMPLE)?;
    let dirac = best_dirac(&mu)?;
    Ok((w2(&mu, &dirac)?, w2(&mu, reference)?))
}

/// Per beta, mean distance of entropic clouds to the nearest Dirac and to
/// the uniform measure. The same seed is used at every beta.
pub fn beta_limit_diagnostic(
    betas: &[f64],
    dim: usize,
    n: usize,
    cfg: &ConjugationConfig,
    seed: u64,
) -> Result<Vec<BetaLimitRow>> {
    let reference = AtomicMeasure::uniform_grid(Domain::Torus(dim), if dim == 1 { 256 } else { UNIFORM_REFERENCE })?;
    betas
        .iter()
        .map(|&beta| {
            let (clouds, failed) = successful(sample_entropic(beta, dim, n, seed, cfg)?);
            let pr: Vec<(f64, f64)> = clouds
                .par_iter()
                .map(|c| proximities(c, &reference))
                .collect::<Result<_>>()?;
            let a: Vec<f64> = pr.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pr.iter().map(|p| p.1).collect();
            let (ea, eb) = (mean_stderr(&a), mean_stderr(&b));
            Ok(BetaLimitRow {
                beta,
                dirac_proximity: ea.mean,
                dirac_stderr: ea.stderr,
                uniform_proximity: eb.mean,
                uniform_stderr: eb.stderr,
                n: pr.len(),
                failed,
                seed,
            })
        })
        .collect()
}

/// Hit counts of `W_2`-balls around a target, on one set of distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportProbe {
    pub beta: f64,
    pub distances: Vec<f64>,
    pub failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitFrequency {
    pub beta: f64,
    pub eps: f64,
    pub hits: usize,
    pub n: usize,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
}

impl SupportProbe {
    /// Frequency of samples strictly closer than `eps`.
    pub fn at(&self, eps: f64) -> HitFrequency {
        let hits = self.distances.iter().filter(|d| **d < eps).count();
        let n = self.distances.len();
        let (lo, hi) = wilson_interval(hits, n, Z_99);
        HitFrequency {
            beta: self.beta,
            eps,
            hits,
            n,
            frequency: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            wilson_lo: lo,
            wilson_hi: hi,
            seed: self.seed,
        }
    }
}

/// Distances from `n` entropic clouds to `target`; query with
/// [`SupportProbe::at`] for any radius.
pub fn support_probe(
    target: &AtomicMeasure,
    beta: f64,
    n: usize,
    cfg: &ConjugationConfig,
    seed: u64,
) -> Result<SupportProbe> {
    let dim = match target.domain() {
        Domain::Torus(d) => d,
        Domain::Interval => return Err(invalid("support probe works on the torus")),
    };
    let (clouds, failed) = successful(sample_entropic(beta, dim, n, seed, cfg)?);
    let distances = clouds
        .par_iter()
        .map(|c| w2(&cloud_measure(c, CLOUD_SUBSAMPLE)?, target))
        .collect::<Result<_>>()?;
    Ok(SupportProbe {
        beta,
        distances,
        failed,
        seed,
    })
}

/// Target of a large-deviation scan.
#[derive(Debug, Clone)]
pub enum LdpTarget {
    /// Atomic target on the torus, probed with entropic clouds.
    Torus(AtomicMeasure),
    /// Target on `[0, 1]`, probed with exact one-dimensional samples.
    Interval(QuantileMeasure1D),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub beta: f64,
    pub eps: f64,
    pub hits: usize,
    pub n: usize,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// `(1/beta) log` of the hit frequency, or of the Wilson upper limit when
    /// there are no hits.
    pub rate_estimate: f64,
    /// Set when there were no hits and `rate_estimate` is only an upper bound
    /// on the log-probability scale.
    pub bound_only: bool,
    /// `-Ent(target | m)` when the target has a density.
    pub target_rate: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpScanResult {
    pub eps: f64,
    pub rows: Vec<LdpRow>,
    /// `-Ent(target | m)` when the target has a density.
    pub target_rate: Option<f64>,
}

impl LdpScanResult {
    /// Whether the rate estimates increase with beta.
    pub fn increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].rate_estimate > w[0].rate_estimate)
    }
}

fn ldp_row(beta: f64, eps: f64, hits: usize, n: usize, seed: u64) -> LdpRow {
    let (lo, hi) = wilson_interval(hits, n, Z_99);
    let freq = hits as f64 / n as f64;
    let (rate, bound_only) = if hits > 0 { (freq.ln() / beta, false) } else { (hi.ln() / beta, true) };
    LdpRow {
        beta,
        eps,
        hits,
        n,
        frequency: freq,
        wilson_lo: lo,
        wilson_hi: hi,
        rate_estimate: rate,
        bound_only,
        target_rate: None,
        seed,
    }
}

/// `(1/beta) log P(W_2(mu, target) < eps)` for increasing betas.
pub fn ldp_scan(
    target: &LdpTarget,
    eps: f64,
    betas: &[f64],
    n: usize,
    cfg: &ConjugationConfig,
    seed: u64,
) -> Result<LdpScanResult> {
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("betas must be strictly increasing"));
    }
    if n == 0 || !(eps > 0.0) {
        return Err(invalid("need n > 0 and eps > 0"));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let hits = match target {
            LdpTarget::Torus(t) => support_probe(t, beta, n, cfg, seed)?.at(eps).hits,
            LdpTarget::Interval(t) => (0..n as u64)
                .into_par_iter()
                .map(|i| -> Result<usize> { Ok(usize::from(w2_1d(&entropic_draw_1d(beta, seed, i)?, t) < eps)) })
                .try_reduce(|| 0, |a, b| Ok(a + b))?,
        };
        rows.push(ldp_row(beta, eps, hits, n, seed));
    }
    let target_rate = match target {
        LdpTarget::Interval(t) if !t.is_atomic() => Some(-entropy_1d(t)),
        _ => None,
    };
    rows.iter_mut().for_each(|r| r.target_rate = target_rate);
    Ok(LdpScanResult { eps, rows, target_rate })
}

/// Writes serialisable rows as CSV with a header.
pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::min_lift;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle_objective(xs: &[f64], w: &[f64], y: f64) -> f64 {
        xs.iter().zip(w).map(|(x, wi)| wi * min_lift(x - y).powi(2)).sum()
    }

    fn random_measure(rng: &mut ChaCha8Rng, domain: Domain, k: usize) -> AtomicMeasure {
        let locs = (0..k * domain.dim()).map(|_| rng.random::<f64>()).collect();
        let w = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        AtomicMeasure::normalized(domain, locs, w).unwrap()
    }

    fn check_plan(plan: &TransportPlan) {
        for (a, b) in plan.row_sums().iter().zip(plan.source.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        for (a, b) in plan.col_sums().iter().zip(plan.target.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(plan.entries.iter().all(|e| e.2 > 0.0));
        assert_abs_diff_eq!(plan.cost, plan.recomputed_cost(), epsilon = 1e-9);
    }

    #[test]
    fn dirac_pair_and_self() {
        let d = Domain::Torus(2);
        let a = AtomicMeasure::dirac(d, &[0.1, 0.2]).unwrap();
        let b = AtomicMeasure::dirac(d, &[0.9, 0.5]).unwrap();
        assert_abs_diff_eq!(w2(&a, &b).unwrap(), (0.04f64 + 0.09).sqrt(), epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, d, 30);
        assert_abs_diff_eq!(w2(&mu, &mu).unwrap(), 0.0, epsilon = 1e-12);
    }

    /// Brute force over all couplings is infeasible, so compare against the
    /// assignment optimum for equal weights, enumerated over permutations.
    #[test]
    fn matches_permutation_optimum() {
        let d = Domain::Torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let k = 5;
            let a: Vec<f64> = (0..2 * k).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..2 * k).map(|_| rng.random()).collect();
            let mu = AtomicMeasure::empirical(d, a.clone()).unwrap();
            let nu = AtomicMeasure::empirical(d, b.clone()).unwrap();
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..k).collect();
            permutations(&mut perm, 0, &mut |p| {
                let c: f64 = (0..k).map(|i| d.dist_sq(&a[2 * i..2 * i + 2], &b[2 * p[i]..2 * p[i] + 2])).sum::<f64>() / k as f64;
                best = best.min(c);
            });
            let (w, plan) = w2_discrete(&mu, &nu).unwrap();
            check_plan(&plan);
            assert_abs_diff_eq!(w * w, best, epsilon = 1e-12);
        }
    }

    fn permutations(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            permutations(p, i + 1, f);
            p.swap(i, j);
        }
    }

    #[test]
    fn interval_matches_quantile_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (ka, kb) = (1 + rng.random_range(0..40), 1 + rng.random_range(0..40));
            let mu = random_measure(&mut rng, Domain::Interval, ka);
            let nu = random_measure(&mut rng, Domain::Interval, kb);
            let (w, plan) = w2_discrete(&mu, &nu).unwrap();
            check_plan(&plan);
            let q = |m: &AtomicMeasure| QuantileMeasure1D::atomic(m.locations(), m.weights()).unwrap();
            assert_abs_diff_eq!(w, w2_1d(&q(&mu), &q(&nu)), epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let a = AtomicMeasure::dirac(Domain::Torus(2), &[0.1, 0.2]).unwrap();
        let b = AtomicMeasure::dirac(Domain::Torus(1), &[0.1]).unwrap();
        assert!(w2_discrete(&a, &b).is_err());
        let big = AtomicMeasure::uniform_grid(Domain::Torus(2), 45).unwrap();
        assert!(w2_discrete(&big, &a).is_err());
    }

    #[test]
    fn circle_barycenter_is_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let k = 1 + rng.random_range(0..12);
            let xs: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let (y, v) = circle_barycenter(&xs, &w);
            assert_abs_diff_eq!(circle_objective(&xs, &w, y), v, epsilon = 1e-12);
            let brute = (0..20_000)
                .map(|i| circle_objective(&xs, &w, i as f64 / 20_000.0))
                .fold(f64::INFINITY, f64::min);
            assert!(v <= brute + 1e-12);
            assert!(brute - v < 1e-6);
        }
    }

    #[test]
    fn best_dirac_of_wrapped_pair() {
        let mu = AtomicMeasure::empirical(Domain::Torus(1), vec![0.95, 0.05]).unwrap();
        let d = best_dirac(&mu).unwrap();
        assert!(min_lift(d.location(0)[0]).abs() < 1e-12);
        assert_abs_diff_eq!(w2(&mu, &d).unwrap(), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn dirichlet_mean_check_passes() {
        let mc = mean_measure_check(
            Law::DirichletFerguson,
            5.0,
            2000,
            &AxisBox::quadrants(),
            &ConjugationConfig::new(2),
            9,
        )
        .unwrap();
        assert!(mc.max_abs_z() <= 4.0, "{mc:?}");
        let total: f64 = mc.rows.iter().map(|r| r.empirical_mean).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn interval_scan_records_bounds() {
        let t = LdpTarget::Interval(QuantileMeasure1D::atomic(&[0.5], &[1.0]).unwrap());
        let r = ldp_scan(&t, 0.01, &[50.0, 100.0], 200, &ConjugationConfig::new(1), 3).unwrap();
        assert!(r.rows.iter().all(|row| row.hits == 0 && row.bound_only && row.rate_estimate.is_finite()));
        assert!(r.target_rate.is_none());
        assert!(ldp_scan(&t, 0.1, &[2.0, 1.0], 10, &ConjugationConfig::new(1), 3).is_err());
    }
}
