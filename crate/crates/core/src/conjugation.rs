//! The conjugation map on measures of the torus.
//!
//! A solved power diagram carries the c-convex potential
//! `phi(x) = max_i [-c_i - d^2(x, z_i) / 2]` with `c_i = -psi_i / 2`. The
//! conjugate of `nu` is the law of `argmin_x [d^2(x, y) / 2 + phi(x)]` for
//! `y` uniform. Lifted to the plane that objective is convex and piecewise
//! linear with the lifted power cells as pieces, so its minimiser is a
//! vertex of the periodic power diagram. [`ConjugateMap`] enumerates those
//! vertices once per diagram; [`conjugate_point`] is the direct grid search.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{AtomicMeasure, Domain, StickBreakingConfig};
use crate::rng::{self, Purpose};
use crate::sdot::{
    cell_bounding_boxes, dist_sq, embed, for_each_crossing, lifted, solve_laguerre, sq, LaguerreDiagram,
    PowerSearch, SolveConfig, P2,
};
use crate::torus::{TorusPoint, MAX_DIM};

/// `phi(x) = max_i [-c_i - d^2(x, z_i) / 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CConvexPotential {
    sites: Vec<TorusPoint>,
    constants: Vec<f64>,
}

impl CConvexPotential {
    pub fn new(sites: Vec<TorusPoint>, constants: Vec<f64>) -> Result<Self> {
        if sites.is_empty() || sites.len() != constants.len() {
            return Err(invalid("a potential needs equally many sites and constants, at least one"));
        }
        let dim = sites[0].dim();
        if sites.iter().any(|s| s.dim() != dim) {
            return Err(invalid("sites must share one dimension"));
        }
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(invalid("potential constants must be finite"));
        }
        Ok(Self { sites, constants })
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn sites(&self) -> &[TorusPoint] {
        &self.sites
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// Power weights `psi_i = -2 c_i` of the equivalent diagram.
    pub fn dual_weights(&self) -> Vec<f64> {
        self.constants.iter().map(|c| -2.0 * c).collect()
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let xe = embed(x);
        self.sites
            .iter()
            .zip(&self.constants)
            .map(|(z, c)| -c - 0.5 * dist_sq(&xe, &embed(z)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index attaining the maximum, ties to the lowest index.
    pub fn argmax(&self, x: &TorusPoint) -> usize {
        let xe = embed(x);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (z, c)) in self.sites.iter().zip(&self.constants).enumerate() {
            let v = -c - 0.5 * dist_sq(&xe, &embed(z));
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    }

    /// The potential `phi + lambda`.
    pub fn shifted(&self, lambda: f64) -> Self {
        Self {
            sites: self.sites.clone(),
            constants: self.constants.iter().map(|c| c - lambda).collect(),
        }
    }
}

/// Potential carried by a solved diagram.
pub fn potential_from_diagram(diag: &LaguerreDiagram) -> Result<CConvexPotential> {
    if !diag.is_solved() {
        return Err(invalid(format!(
            "diagram is not solved (residual {:.3e}, tolerance {:.3e})",
            diag.residual, diag.mass_tol
        )));
    }
    CConvexPotential::new(diag.sites.clone(), diag.dual_weights.iter().map(|p| -0.5 * p).collect())
}

fn grid_points(dim: usize, res: usize) -> impl Iterator<Item = P2> {
    let ny = if dim == 2 { res } else { 1 };
    let h = 1.0 / res as f64;
    (0..res * ny).map(move |idx| {
        let (ix, iy) = (idx % res, idx / res);
        [(ix as f64 + 0.5) * h, if dim == 2 { (iy as f64 + 0.5) * h } else { 0.0 }]
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn check_search(phi: &CConvexPotential, y: &TorusPoint, search_grid: usize) -> Result<()> {
    if search_grid < 64 {
        return Err(invalid("search_grid must be at least 64"));
    }
    if y.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Minimiser and minimum of `x -> d^2(x, y) / 2 + phi(x)`: grid search followed
/// by one golden-section pass along each axis.
fn conjugate_search(phi: &CConvexPotential, y: &TorusPoint, search_grid: usize) -> (P2, f64) {
    let dim = phi.dim();
    let sites: Vec<P2> = phi.sites.iter().map(embed).collect();
    let psi = phi.dual_weights();
    let search = PowerSearch::new(dim, &sites, &psi);
    let ye = embed(y);
    let objective = |x: &P2| 0.5 * dist_sq(x, &ye) - 0.5 * search.nearest(x).1;
    let mut best = ([0.0; 2], f64::INFINITY);
    for x in grid_points(dim, search_grid) {
        let v = objective(&x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let h = 1.0 / search_grid as f64;
    for axis in 0..dim {
        let base = best.0;
        let line = |t: f64| {
            let mut x = base;
            x[axis] = crate::torus::wrap_unit(t);
            objective(&x)
        };
        let (t, v) = golden_min(line, base[axis] - h, base[axis] + h, 60);
        if v < best.1 {
            best.0[axis] = crate::torus::wrap_unit(t);
            best.1 = v;
        }
    }
    best
}

/// `phi^c(y) = -inf_x [d^2(x, y) / 2 + phi(x)]`.
pub fn phi_conj_eval(phi: &CConvexPotential, y: &TorusPoint, search_grid: usize) -> Result<f64> {
    check_search(phi, y, search_grid)?;
    Ok(-conjugate_search(phi, y, search_grid).1)
}

/// `argmin_x [d^2(x, y) / 2 + phi(x)]` by grid search with local refinement.
pub fn conjugate_point(phi: &CConvexPotential, y: &TorusPoint, search_grid: usize) -> Result<TorusPoint> {
    check_search(phi, y, search_grid)?;
    let (x, _) = conjugate_search(phi, y, search_grid);
    Ok(TorusPoint::from_raw(x, phi.dim()))
}

/// Discrete c-transform of a function sampled at the midpoints of a
/// `res`-per-axis grid: `out(y) = -min_x [d^2(x, y) / 2 + values(x)]`.
pub fn c_transform_on_grid(dim: usize, res: usize, values: &[f64]) -> Result<Vec<f64>> {
    let pts: Vec<P2> = grid_points(dim, res).collect();
    if values.len() != pts.len() {
        return Err(Error::DimensionMismatch {
            expected: pts.len(),
            found: values.len(),
        });
    }
    Ok(pts
        .par_iter()
        .map(|y| {
            -pts.iter()
                .zip(values)
                .map(|(x, v)| 0.5 * dist_sq(x, y) + v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Evaluates the c-transform of grid data at an arbitrary point.
pub fn c_transform_at(dim: usize, res: usize, values: &[f64], y: &TorusPoint) -> f64 {
    let ye = embed(y);
    -grid_points(dim, res)
        .zip(values)
        .map(|(x, v)| 0.5 * dist_sq(&x, &ye) + v)
        .fold(f64::INFINITY, f64::min)
}

/// Midpoints of a `res`-per-axis grid in row-major order (x fastest).
pub fn grid_midpoints(dim: usize, res: usize) -> Vec<TorusPoint> {
    grid_points(dim, res).map(|p| TorusPoint::from_raw(p, dim)).collect()
}

/// Exact conjugate map of a solved diagram, through its vertices.
#[derive(Debug, Clone)]
pub struct ConjugateMap {
    dim: usize,
    vertices: Vec<P2>,
    /// Common power `min_j [d^2(v, z_j) - psi_j]` at each vertex.
    powers: Vec<f64>,
}

impl ConjugateMap {
    pub fn from_diagram(diag: &LaguerreDiagram) -> Result<Self> {
        let dim = diag.dim;
        let sites = diag.site_array();
        let psi = &diag.dual_weights;
        let k = sites.len();
        let mut nbrs: Vec<BTreeSet<(u32, [i32; 2])>> = vec![BTreeSet::new(); k];
        for_each_crossing(diag.grid(), &sites, &diag.owner, |_, i, j, delta| {
            nbrs[i as usize].insert((j, delta));
            nbrs[j as usize].insert((i, [-delta[0], -delta[1]]));
        });
        let search = PowerSearch::new(dim, &sites, psi);
        let mut seen: HashSet<(i64, i64)> = HashSet::new();
        let mut vertices = Vec::new();
        let mut powers = Vec::new();
        let scale = (1u64 << 32) as f64;
        let mut push = |x: P2, own: usize| {
            let canon = [crate::torus::wrap_unit(x[0]), if dim == 2 { crate::torus::wrap_unit(x[1]) } else { 0.0 }];
            let p = sq(&x, &sites[own]) - psi[own];
            let (_, best) = search.nearest(&canon);
            if p - best > 1e-11 * (1.0 + p.abs()) {
                return;
            }
            let key = (
                ((canon[0] * scale).round() as i64).rem_euclid(1 << 32),
                ((canon[1] * scale).round() as i64).rem_euclid(1 << 32),
            );
            if seen.insert(key) {
                vertices.push(canon);
                powers.push(best);
            }
        };
        for i in 0..k {
            let a = sites[i];
            let list: Vec<_> = nbrs[i].iter().copied().collect();
            if dim == 1 {
                for &(j, d) in &list {
                    let b = lifted(&sites[j as usize], d);
                    let den = 2.0 * (a[0] - b[0]);
                    if den.abs() < 1e-14 {
                        continue;
                    }
                    let x = (a[0] * a[0] - b[0] * b[0] - psi[i] + psi[j as usize]) / den;
                    push([x, 0.0], i);
                }
                continue;
            }
            for (s, &(j, dj)) in list.iter().enumerate() {
                for &(l, dl) in &list[s + 1..] {
                    let b = lifted(&sites[j as usize], dj);
                    let c = lifted(&sites[l as usize], dl);
                    // 2 x . (a - b) = |a|^2 - |b|^2 - psi_i + psi_j, same for c
                    let m = [[2.0 * (a[0] - b[0]), 2.0 * (a[1] - b[1])], [2.0 * (a[0] - c[0]), 2.0 * (a[1] - c[1])]];
                    let r = [
                        sq(&a, &[0.0, 0.0]) - sq(&b, &[0.0, 0.0]) - psi[i] + psi[j as usize],
                        sq(&a, &[0.0, 0.0]) - sq(&c, &[0.0, 0.0]) - psi[i] + psi[l as usize],
                    ];
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    let norm = (m[0][0].abs() + m[0][1].abs()) * (m[1][0].abs() + m[1][1].abs());
                    if det.abs() <= 1e-12 * norm.max(1e-300) {
                        continue;
                    }
                    let x = [(r[0] * m[1][1] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - r[0] * m[1][0]) / det];
                    push(x, i);
                }
            }
        }
        if vertices.is_empty() {
            return Err(invalid("the diagram has no resolvable vertices"));
        }
        Ok(Self { dim, vertices, powers })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> Vec<TorusPoint> {
        self.vertices.iter().map(|v| TorusPoint::from_raw(*v, self.dim)).collect()
    }

    /// `argmin_x [d^2(x, y) / 2 + phi(x)]`, ties to the first vertex found.
    pub fn apply(&self, y: &TorusPoint) -> TorusPoint {
        let ye = embed(y);
        let mut best = (0, f64::INFINITY);
        for (i, (v, p)) in self.vertices.iter().zip(&self.powers).enumerate() {
            let val = dist_sq(v, &ye) - p;
            if val < best.1 {
                best = (i, val);
            }
        }
        TorusPoint::from_raw(self.vertices[best.0], self.dim)
    }

    /// `phi^c(y)`, exact for the diagram's potential.
    pub fn conjugate_value(&self, y: &TorusPoint) -> f64 {
        let ye = embed(y);
        let m = self
            .vertices
            .iter()
            .zip(&self.powers)
            .map(|(v, p)| dist_sq(v, &ye) - p)
            .fold(f64::INFINITY, f64::min);
        -0.5 * m
    }
}

/// Empirical sample of a conjugate measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonCloud {
    pub dim: usize,
    pub points: Vec<TorusPoint>,
    pub source_beta: Option<f64>,
    pub atom_count: usize,
    pub seed: u64,
    pub index: u64,
    pub solver_residual: f64,
    pub solver_iterations: usize,
    /// Mass of atoms too light for the quadrature grid, merged into their
    /// nearest heavy neighbour before solving.
    pub merged_mass: f64,
}

impl SkeletonCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Equal-weight atomic measure on the cloud points.
    pub fn to_measure(&self) -> Result<AtomicMeasure> {
        AtomicMeasure::empirical(
            Domain::Torus(self.dim),
            self.points.iter().flat_map(|p| p.coords().to_vec()).collect(),
        )
    }

    /// Distinct points with their frequencies.
    pub fn to_weighted_measure(&self) -> Result<AtomicMeasure> {
        let mut keyed: Vec<([u64; 2], TorusPoint)> = self
            .points
            .iter()
            .map(|p| {
                let r = p.raw();
                ([r[0].to_bits(), r[1].to_bits()], *p)
            })
            .collect();
        keyed.sort_by_key(|a| a.0);
        let mut locs = Vec::new();
        let mut w = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let mut j = i;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                j += 1;
            }
            locs.extend_from_slice(keyed[i].1.coords());
            w.push((j - i) as f64);
            i = j;
        }
        AtomicMeasure::normalized(Domain::Torus(self.dim), locs, w)
    }

    pub fn record(&self) -> CloudRecord {
        CloudRecord {
            index: self.index,
            seed: self.seed,
            beta: self.source_beta,
            dim: self.dim,
            atom_count: self.atom_count,
            n_points: self.points.len(),
            solver_residual: self.solver_residual,
            solver_iterations: self.solver_iterations,
            merged_mass: self.merged_mass,
        }
    }

    /// CSV with header `x,y` (or `x` on the circle).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.dim == 2 {
            w.write_record(["x", "y"])?;
        } else {
            w.write_record(["x"])?;
        }
        for p in &self.points {
            w.write_record(p.coords().iter().map(|c| format!("{c:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Vec<TorusPoint>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut pts = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let c: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| invalid(format!("bad coordinate {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            pts.push(TorusPoint::new(&c)?);
        }
        Ok(pts)
    }
}

/// Metadata line of a cloud in the JSON-lines index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudRecord {
    pub index: u64,
    pub seed: u64,
    pub beta: Option<f64>,
    pub dim: usize,
    pub atom_count: usize,
    pub n_points: usize,
    pub solver_residual: f64,
    pub solver_iterations: usize,
    pub merged_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugationConfig {
    pub solve: SolveConfig,
    /// Uniform points pushed through the conjugate map per measure.
    pub n_points: usize,
}

impl ConjugationConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            solve: SolveConfig::for_dim(dim),
            n_points: 5000,
        }
    }

    pub fn with_grid(mut self, res: usize) -> Self {
        self.solve.grid_res = res;
        self
    }

    pub fn with_points(mut self, n: usize) -> Self {
        self.n_points = n;
        self
    }
}

/// Everything produced by one conjugation: the solved diagram, its map and
/// the cloud.
#[derive(Debug, Clone)]
pub struct ConjugateSample {
    pub diagram: LaguerreDiagram,
    pub map: ConjugateMap,
    pub cloud: SkeletonCloud,
}

fn uniform_points<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Vec<TorusPoint> {
    (0..n)
        .map(|_| {
            let mut c = [0.0; MAX_DIM];
            for v in c.iter_mut().take(dim) {
                *v = rng.random::<f64>();
            }
            TorusPoint::from_raw(c, dim)
        })
        .collect()
}

/// Solves the diagram of `nu`, builds its conjugate map and pushes
/// `n_samples` uniform points through it.
pub fn conjugate_sample<R: Rng + ?Sized>(
    nu: &AtomicMeasure,
    n_samples: usize,
    cfg: &SolveConfig,
    rng: &mut R,
) -> Result<ConjugateSample> {
    let dim = match nu.domain() {
        Domain::Torus(n) => n,
        Domain::Interval => return Err(invalid("conjugate clouds are computed on the torus")),
    };
    let diagram = solve_laguerre(nu, cfg)?;
    let map = ConjugateMap::from_diagram(&diagram)?;
    let points = uniform_points(dim, n_samples, rng).iter().map(|y| map.apply(y)).collect();
    let cloud = SkeletonCloud {
        dim,
        points,
        source_beta: None,
        atom_count: nu.len(),
        seed: 0,
        index: 0,
        solver_residual: diagram.residual,
        solver_iterations: diagram.iterations,
        merged_mass: 0.0,
    };
    Ok(ConjugateSample { diagram, map, cloud })
}

/// Empirical approximation of the conjugate of `nu`.
pub fn sample_conjugate_measure<R: Rng + ?Sized>(
    nu: &AtomicMeasure,
    n_samples: usize,
    cfg: &SolveConfig,
    rng: &mut R,
) -> Result<SkeletonCloud> {
    Ok(conjugate_sample(nu, n_samples, cfg, rng)?.cloud)
}

/// Stick-breaking draw `index` of a run, with atoms below the grid
/// resolution merged away. Returns the measure and the merged mass.
pub fn resolvable_df_draw(
    beta: f64,
    dim: usize,
    seed: u64,
    index: u64,
    cfg: &ConjugationConfig,
    stick: &StickBreakingConfig,
) -> Result<(AtomicMeasure, f64)> {
    let mut sb = *stick;
    sb.beta = beta;
    sb.seed = seed;
    let mut r = rng::stream(seed, index, Purpose::Measure);
    let nu = crate::measure::stick_breaking(&sb, Domain::Torus(dim), &mut r)?;
    let min_w = 10.0 / cfg.solve.cells(dim) as f64;
    Ok(nu.merge_light_atoms(min_w))
}

/// One entropic draw with its diagram.
pub fn entropic_draw(beta: f64, dim: usize, seed: u64, index: u64, cfg: &ConjugationConfig) -> Result<ConjugateSample> {
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    let (nu, merged) = resolvable_df_draw(beta, dim, seed, index, cfg, &StickBreakingConfig::default())?;
    let mut r = rng::stream(seed, index, Purpose::Points);
    let mut s = conjugate_sample(&nu, cfg.n_points, &cfg.solve, &mut r)?;
    s.cloud.source_beta = Some(beta);
    s.cloud.seed = seed;
    s.cloud.index = index;
    s.cloud.merged_mass = merged;
    Ok(s)
}

/// Outcome of one entropic draw; failed solves are kept and reported.
#[derive(Debug, Clone)]
pub struct EntropicDraw {
    pub index: u64,
    pub outcome: std::result::Result<SkeletonCloud, String>,
}

/// `n_measure_samples` draws of the entropic measure on the torus, indices
/// `0..n`, evaluated in parallel with per-index streams.
pub fn sample_entropic(
    beta: f64,
    dim: usize,
    n_measure_samples: usize,
    seed: u64,
    cfg: &ConjugationConfig,
) -> Result<Vec<EntropicDraw>> {
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    if cfg.n_points == 0 {
        return Err(invalid("at least one point per measure is required"));
    }
    Ok(sample_entropic_range(beta, dim, 0..n_measure_samples as u64, seed, cfg))
}

/// Same as [`sample_entropic`] for an arbitrary index range.
pub fn sample_entropic_range(
    beta: f64,
    dim: usize,
    indices: std::ops::Range<u64>,
    seed: u64,
    cfg: &ConjugationConfig,
) -> Vec<EntropicDraw> {
    let idx: Vec<u64> = indices.collect();
    idx.par_iter()
        .map(|&index| EntropicDraw {
            index,
            outcome: entropic_draw(beta, dim, seed, index, cfg)
                .map(|s| s.cloud)
                .map_err(|e| e.to_string()),
        })
        .collect()
}

/// Successful clouds of a batch, and the number of failures.
pub fn successful(draws: Vec<EntropicDraw>) -> (Vec<SkeletonCloud>, usize) {
    let mut ok = Vec::new();
    let mut failed = 0;
    for d in draws {
        match d.outcome {
            Ok(c) => ok.push(c),
            Err(_) => failed += 1,
        }
    }
    (ok, failed)
}

/// A hole of the conjugate support: a power cell, its mass and the lifted
/// bounding box of its grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub site: usize,
    pub mass: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

pub fn hole_report(diag: &LaguerreDiagram) -> Vec<Hole> {
    cell_bounding_boxes(diag)
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| Hole {
            site: i,
            mass: diag.computed_masses[i],
            lo,
            hi,
        })
        .collect()
}

/// Fraction of points farther than `margin` from every cell boundary.
pub fn interior_fraction(diag: &LaguerreDiagram, points: &[TorusPoint], margin: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let inside = points.par_iter().filter(|p| diag.boundary_distance(p) > margin).count();
    inside as f64 / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{antipode, torus_dist};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tp(c: &[f64]) -> TorusPoint {
        TorusPoint::new(c).unwrap()
    }

    fn solved(nu: &AtomicMeasure, res: usize) -> LaguerreDiagram {
        solve_laguerre(nu, &SolveConfig::for_dim(nu.dim()).with_grid(res)).unwrap()
    }

    #[test]
    fn potential_argmax_matches_cell_index() {
        let nu = AtomicMeasure::new(Domain::Torus(2), vec![0.1309, 0.2113, 0.6071, 0.3349, 0.4213, 0.7906], vec![0.5, 0.3, 0.2])
            .unwrap();
        let d = solved(&nu, 128);
        let phi = potential_from_diagram(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let x = tp(&[rng.random(), rng.random()]);
            assert_eq!(phi.argmax(&x), d.cell_index(&x));
        }
    }

    #[test]
    fn unsolved_diagram_is_rejected() {
        let d = LaguerreDiagram::with_weights(vec![tp(&[0.0]), tp(&[0.5])], vec![0.1, 0.0], vec![0.5, 0.5], 64)
            .unwrap();
        assert!(potential_from_diagram(&d).is_err());
    }

    #[test]
    fn symmetric_sites_share_constants() {
        let nu = AtomicMeasure::new(Domain::Torus(1), vec![0.1, 0.6], vec![0.5, 0.5]).unwrap();
        let phi = potential_from_diagram(&solved(&nu, 1024)).unwrap();
        assert_abs_diff_eq!(phi.constants()[0], phi.constants()[1], epsilon = 1e-12);
    }

    /// Conjugate of `-d^2(., z) / 2` on the torus, coordinate by coordinate:
    /// `sum_a (|delta_a| - delta_a^2) / 2` with `delta = y - z` minimally lifted.
    fn dirac_conjugate(y: &TorusPoint, z: &TorusPoint) -> f64 {
        y.displacement_from(z)[..y.dim()].iter().map(|d| 0.5 * (d.abs() - d * d)).sum()
    }

    #[test]
    fn single_site_conjugate_value() {
        let z = tp(&[0.3, 0.8]);
        let phi = CConvexPotential::new(vec![z], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let y = tp(&[rng.random(), rng.random()]);
            assert_abs_diff_eq!(phi_conj_eval(&phi, &y, 128).unwrap(), dirac_conjugate(&y, &z), epsilon = 1e-4);
        }
    }

    #[test]
    fn conjugate_shift_rule() {
        let phi = CConvexPotential::new(vec![tp(&[0.2]), tp(&[0.7])], vec![0.01, -0.02]).unwrap();
        let y = tp(&[0.41]);
        let a = phi_conj_eval(&phi, &y, 256).unwrap();
        let b = phi_conj_eval(&phi.shifted(0.3), &y, 256).unwrap();
        assert_abs_diff_eq!(b, a - 0.3, epsilon = 1e-12);
    }

    #[test]
    fn double_conjugate_recovers_potential() {
        let phi = CConvexPotential::new(vec![tp(&[0.2, 0.3]), tp(&[0.7, 0.6]), tp(&[0.4, 0.9])], vec![0.0, 0.01, -0.015])
            .unwrap();
        let res = 64;
        let pts = grid_midpoints(2, res);
        let phi_vals: Vec<f64> = pts.iter().map(|x| phi.eval(x)).collect();
        let conj = c_transform_on_grid(2, res, &phi_vals).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let x = tp(&[rng.random(), rng.random()]);
            let back = c_transform_at(2, res, &conj, &x);
            assert!((back - phi.eval(&x)).abs() <= 2.0 / res as f64);
        }
    }

    #[test]
    fn dirac_maps_to_antipode() {
        let z = tp(&[0.37, 0.81]);
        let phi = CConvexPotential::new(vec![z], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let y = tp(&[rng.random(), rng.random()]);
            let x = conjugate_point(&phi, &y, 128).unwrap();
            assert!(torus_dist(&x, &antipode(&z)).unwrap() <= 2.0 / 128.0);
        }
        let nu = AtomicMeasure::dirac(Domain::Torus(2), z.coords()).unwrap();
        let map = ConjugateMap::from_diagram(&solved(&nu, 64)).unwrap();
        assert_eq!(map.len(), 1);
        assert!(torus_dist(&map.apply(&tp(&[0.1, 0.1])), &antipode(&z)).unwrap() < 1e-12);
    }

    #[test]
    fn two_atoms_on_circle_conjugate_to_quarter_points() {
        let nu = AtomicMeasure::new(Domain::Torus(1), vec![0.0, 0.5], vec![0.5, 0.5]).unwrap();
        let d = solved(&nu, 4096);
        let map = ConjugateMap::from_diagram(&d).unwrap();
        let mut v: Vec<f64> = map.vertices().iter().map(|p| p.coords()[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v.len(), 2);
        assert_abs_diff_eq!(v[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.75, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = sample_conjugate_measure(&nu, 10_000, &SolveConfig::for_dim(1).with_grid(4096), &mut rng).unwrap();
        let hits = cloud.points.iter().filter(|p| (p.coords()[0] - 0.25).abs() < 1e-9).count();
        assert!((hits as f64 / 1e4 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn vertex_map_agrees_with_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = 12;
        let locs: Vec<f64> = (0..2 * k).map(|_| rng.random()).collect();
        let w: Vec<f64> = (0..k).map(|_| 0.5 + rng.random::<f64>()).collect();
        let nu = AtomicMeasure::normalized(Domain::Torus(2), locs, w).unwrap();
        let d = solved(&nu, 256);
        let phi = potential_from_diagram(&d).unwrap();
        let map = ConjugateMap::from_diagram(&d).unwrap();
        for _ in 0..40 {
            let y = tp(&[rng.random(), rng.random()]);
            let fast = map.apply(&y);
            let slow = conjugate_point(&phi, &y, 256).unwrap();
            let objective = |x: &TorusPoint| 0.5 * crate::torus::torus_dist_sq(x, &y).unwrap() + phi.eval(x);
            // the vertex is exact; the grid search can only be worse
            assert!(objective(&fast) <= objective(&slow) + 1e-12);
            assert!(objective(&slow) - objective(&fast) <= 1e-3, "{fast:?} vs {slow:?}");
            assert_abs_diff_eq!(map.conjugate_value(&y), phi_conj_eval(&phi, &y, 256).unwrap(), epsilon = 1e-3);
            assert!(d.boundary_distance(&fast) < 1e-9);
        }
    }

    #[test]
    fn hole_report_masses_match_quadrature() {
        let nu = AtomicMeasure::new(Domain::Torus(2), vec![0.1309, 0.2113, 0.6071, 0.3349], vec![0.6, 0.4]).unwrap();
        let d = solved(&nu, 64);
        let holes = hole_report(&d);
        let masses: Vec<f64> = holes.iter().map(|h| h.mass).collect();
        assert_eq!(masses, d.computed_masses);
        let one = hole_report(&solved(&AtomicMeasure::dirac(Domain::Torus(2), &[0.5, 0.5]).unwrap(), 32));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].mass, 1.0);
    }

    #[test]
    fn weighted_cloud_measure_counts_duplicates() {
        let cloud = SkeletonCloud {
            dim: 1,
            points: vec![tp(&[0.25]), tp(&[0.75]), tp(&[0.25]), tp(&[0.25])],
            source_beta: None,
            atom_count: 2,
            seed: 0,
            index: 0,
            solver_residual: 0.0,
            solver_iterations: 0,
            merged_mass: 0.0,
        };
        let m = cloud.to_weighted_measure().unwrap();
        assert_eq!(m.len(), 2);
        assert_abs_diff_eq!(m.weights()[0], 0.75);
    }
}
