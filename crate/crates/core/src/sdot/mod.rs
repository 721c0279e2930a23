//! Semi-discrete optimal transport from the uniform measure on the torus to
//! an atomic measure. Cell masses are integrated exactly along `x` on
//! `grid_res` rows; cell ownership of the grid midpoints feeds the geometry.
//!
//! The cell of site `i` is `{x : d^2(x, z_i) - psi_i <= d^2(x, z_j) - psi_j}`.
//! The weights `psi` maximise the concave dual
//! `Phi(psi) = sum_i lambda_i psi_i + int min_j [d^2(x, z_j) - psi_j] dm(x)`,
//! whose gradient is `lambda_i - m(cell_i)`.

mod rows;
mod search;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{AtomicMeasure, Domain};
use crate::torus::{min_lift, TorusPoint, MAX_DIM};

use rows::{row_quadrature, RowQuadrature};
pub(crate) use search::{dist_sq, lift_of, PowerSearch, P2};

/// Search direction of the dual ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentMethod {
    /// Damped Newton steps using the exact Hessian of the row quadrature.
    Newton,
    /// Plain gradient steps.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Quadrature rows and grid points per axis.
    pub grid_res: usize,
    /// Stopping tolerance on `max_i |m(cell_i) - lambda_i|`. `None` selects
    /// `1e-3 min_i lambda_i`.
    pub mass_tol: Option<f64>,
    pub max_iters: usize,
    /// First trial step of every line search.
    pub initial_step: f64,
    pub method: AscentMethod,
}

impl SolveConfig {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            grid_res: if dim == 1 { 8192 } else { 512 },
            mass_tol: None,
            max_iters: 10_000,
            initial_step: 1.0,
            method: AscentMethod::Newton,
        }
    }

    pub fn with_grid(mut self, grid_res: usize) -> Self {
        self.grid_res = grid_res;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_res < 16 {
            return Err(invalid("grid_res must be at least 16"));
        }
        if let Some(t) = self.mass_tol {
            if !(t > 0.0) {
                return Err(invalid("mass_tol must be positive"));
            }
        }
        if !(self.initial_step > 0.0) {
            return Err(invalid("initial_step must be positive"));
        }
        Ok(())
    }

    /// Number of quadrature cells for a torus of dimension `dim`.
    pub fn cells(&self, dim: usize) -> usize {
        self.grid_res.pow(dim as u32)
    }

    /// Tolerance actually used for a target with smallest weight `min_lambda`.
    pub fn resolved_mass_tol(&self, min_lambda: f64) -> f64 {
        self.mass_tol.unwrap_or(1e-3 * min_lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Grid {
    pub dim: usize,
    pub res: usize,
}

impl Grid {
    #[inline]
    pub fn nx(&self) -> usize {
        self.res
    }

    #[inline]
    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.res
        } else {
            1
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.res as f64
    }

    #[inline]
    pub fn center(&self, idx: usize) -> P2 {
        let ix = idx % self.nx();
        let iy = idx / self.nx();
        let h = self.h();
        [
            (ix as f64 + 0.5) * h,
            if self.dim == 2 { (iy as f64 + 0.5) * h } else { 0.0 },
        ]
    }

    /// Index of the quadrature cell containing `x`.
    #[inline]
    pub fn index_of(&self, x: &P2) -> usize {
        let ix = ((x[0] * self.res as f64) as usize).min(self.res - 1);
        if self.dim == 1 {
            ix
        } else {
            let iy = ((x[1] * self.res as f64) as usize).min(self.res - 1);
            iy * self.nx() + ix
        }
    }
}

pub(crate) struct Assignment {
    pub owner: Vec<u32>,
    pub counts: Vec<u64>,
}

pub(crate) fn assign(grid: Grid, sites: &[P2], psi: &[f64]) -> Assignment {
    let search = PowerSearch::new(grid.dim, sites, psi);
    let n = grid.len();
    let chunk = grid.nx().max(2048).min(n);
    let mut owner = vec![0u32; n];
    owner.par_chunks_mut(chunk).enumerate().for_each(|(c, out)| {
        for (o, slot) in out.iter_mut().enumerate() {
            *slot = search.nearest(&grid.center(c * chunk + o)).0;
        }
    });
    let mut counts = vec![0u64; sites.len()];
    for &o in &owner {
        counts[o as usize] += 1;
    }
    Assignment { owner, counts }
}

/// Calls `f(axis, i, j, delta)` for every pair of neighbouring grid points
/// lying in different lifted cells. `delta` is the lift of the copy of `z_j`
/// relative to the copy of `z_i`, in a common frame.
pub(crate) fn for_each_crossing(
    grid: Grid,
    sites: &[P2],
    owner: &[u32],
    mut f: impl FnMut(usize, u32, u32, [i32; 2]),
) {
    let nx = grid.nx();
    let ny = grid.ny();
    let lifts: Vec<[i32; 2]> = (0..grid.len())
        .map(|p| lift_of(&grid.center(p), &sites[owner[p] as usize]))
        .collect();
    for iy in 0..ny {
        for ix in 0..nx {
            let p = iy * nx + ix;
            let i = owner[p];
            let kp = lifts[p];
            let (qx, wx) = if ix + 1 == nx { (0, 1) } else { (ix + 1, 0) };
            let q = iy * nx + qx;
            let kq = lifts[q];
            let delta = [kq[0] + wx - kp[0], kq[1] - kp[1]];
            if owner[q] != i || delta != [0, 0] {
                f(0, i, owner[q], delta);
            }
            if grid.dim == 2 {
                let (qy, wy) = if iy + 1 == ny { (0, 1) } else { (iy + 1, 0) };
                let q = qy * nx + ix;
                let kq = lifts[q];
                let delta = [kq[0] - kp[0], kq[1] + wy - kp[1]];
                if owner[q] != i || delta != [0, 0] {
                    f(1, i, owner[q], delta);
                }
            }
        }
    }
}

/// Sparse symmetric `d m(cell) / d psi`, a weighted graph Laplacian.
struct Hessian {
    diag: Vec<f64>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl Hessian {
    fn assemble(k: usize, couplings: &[(u32, u32, f64)]) -> Self {
        let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
        for &(i, j, w) in couplings {
            *acc.entry((i, j)).or_insert(0.0) += w;
        }
        let mut diag = vec![0.0; k];
        let mut rows = vec![Vec::new(); k];
        let mut entries: Vec<_> = acc.into_iter().collect();
        entries.sort_by_key(|a| a.0);
        for ((i, j), w) in entries {
            diag[i as usize] += w;
            diag[j as usize] += w;
            rows[i as usize].push((j, w));
            rows[j as usize].push((i, w));
        }
        Self { diag, rows }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.diag[i] * x[i];
            for &(j, w) in &self.rows[i] {
                s -= w * x[j as usize];
            }
            *o = s;
        }
    }

    /// Jacobi-preconditioned conjugate gradients for `H d = g`, `g` summing to
    /// zero. The constant null space is projected out.
    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let k = g.len();
        let shift = 1e-12 * self.diag.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mean = g.iter().sum::<f64>() / k as f64;
        let b: Vec<f64> = g.iter().map(|v| v - mean).collect();
        let prec: Vec<f64> = self
            .diag
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / (d + shift) } else { 0.0 })
            .collect();
        let mut x = vec![0.0; k];
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&prec).map(|(a, p)| a * p).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; k];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return x;
        }
        for _ in 0..(4 * k + 50) {
            self.apply(&p, &mut ap);
            for (a, pv) in ap.iter_mut().zip(&p) {
                *a += shift * pv;
            }
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..k {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= 1e-10 * bnorm {
                break;
            }
            for i in 0..k {
                z[i] = r[i] * prec[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..k {
                p[i] = z[i] + beta * p[i];
            }
        }
        let m = x.iter().sum::<f64>() / k as f64;
        x.iter().map(|v| v - m).collect()
    }
}

/// Solved (or explicitly weighted) power diagram on the torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaguerreDiagram {
    pub dim: usize,
    pub sites: Vec<TorusPoint>,
    /// `psi_i`, normalised so that the first entry is zero.
    pub dual_weights: Vec<f64>,
    pub target_masses: Vec<f64>,
    pub computed_masses: Vec<f64>,
    pub grid_res: usize,
    /// `max_i |computed_i - target_i|`.
    pub residual: f64,
    pub mass_tol: f64,
    pub iterations: usize,
    pub method: AscentMethod,
    /// Dual value after every accepted iterate, starting with the initial one.
    pub dual_history: Vec<f64>,
    #[serde(skip)]
    pub(crate) owner: Vec<u32>,
    #[serde(skip)]
    pub(crate) min_integral: f64,
}

impl LaguerreDiagram {
    /// Diagram with prescribed weights, quadrature evaluated but no solve.
    /// `target_masses` only feeds the residual.
    pub fn with_weights(
        sites: Vec<TorusPoint>,
        dual_weights: Vec<f64>,
        target_masses: Vec<f64>,
        grid_res: usize,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(invalid("a diagram needs at least one site"));
        }
        if dual_weights.len() != sites.len() || target_masses.len() != sites.len() {
            return Err(Error::DimensionMismatch {
                expected: sites.len(),
                found: dual_weights.len().min(target_masses.len()),
            });
        }
        let dim = sites[0].dim();
        if sites.iter().any(|s| s.dim() != dim) {
            return Err(invalid("sites must share one dimension"));
        }
        if grid_res < 16 {
            return Err(invalid("grid_res must be at least 16"));
        }
        let mut d = Self {
            dim,
            sites,
            dual_weights,
            target_masses,
            computed_masses: Vec::new(),
            grid_res,
            residual: f64::INFINITY,
            mass_tol: 0.0,
            iterations: 0,
            method: AscentMethod::Newton,
            dual_history: Vec::new(),
            owner: Vec::new(),
            min_integral: 0.0,
        };
        d.refresh();
        Ok(d)
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid {
            dim: self.dim,
            res: self.grid_res,
        }
    }

    pub(crate) fn site_array(&self) -> Vec<P2> {
        self.sites.iter().map(embed).collect()
    }

    fn refresh(&mut self) {
        let sites = self.site_array();
        let q = row_quadrature(self.grid(), &sites, &self.dual_weights, false);
        self.computed_masses = q.masses;
        self.residual = max_abs_diff(&self.computed_masses, &self.target_masses);
        self.owner = assign(self.grid(), &sites, &self.dual_weights).owner;
        self.min_integral = q.min_integral;
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_solved(&self) -> bool {
        self.residual <= self.mass_tol
    }

    /// Power `d^2(x, z_i) - psi_i`.
    #[inline]
    pub fn power(&self, i: usize, x: &TorusPoint) -> f64 {
        dist_sq(&embed(x), &embed(&self.sites[i])) - self.dual_weights[i]
    }

    /// Owner of `x`: the site of least power, ties to the lowest index.
    pub fn cell_index(&self, x: &TorusPoint) -> usize {
        let mut best = 0;
        let mut bv = f64::INFINITY;
        for i in 0..self.len() {
            let v = self.power(i, x);
            if v < bv {
                bv = v;
                best = i;
            }
        }
        best
    }

    /// Row-quadrature cell masses; recomputed from scratch.
    pub fn cell_masses(&self) -> Vec<f64> {
        row_quadrature(self.grid(), &self.site_array(), &self.dual_weights, false).masses
    }

    /// Dual functional `sum_i lambda_i psi_i + int min_j [d^2 - psi_j] dm`
    /// under the row quadrature.
    pub fn dual_value(&self) -> f64 {
        dual_of(&self.target_masses, &self.dual_weights, self.min_integral)
    }

    /// Site owning each quadrature point, in row-major order (x fastest).
    pub fn grid_owners(&self) -> &[u32] {
        &self.owner
    }

    /// Exact distance from `x` to the boundary of the lifted power cell that
    /// contains it. Contacts between two copies of the same cell count as
    /// boundary, so for a single site the boundary is the cut locus of `z`.
    pub fn boundary_distance(&self, x: &TorusPoint) -> f64 {
        let sites = self.site_array();
        let xe = embed(x);
        let own = self.cell_index(x);
        let own_lift = lift_of(&xe, &sites[own]);
        let a_own = lifted(&sites[own], own_lift);
        let p_own = sq(&xe, &a_own) - self.dual_weights[own];
        let range: &[i32] = &[-1, 0, 1];
        let yr: &[i32] = if self.dim == 2 { range } else { &[0] };
        let mut best = f64::INFINITY;
        for (j, z) in sites.iter().enumerate() {
            let base = lift_of(&xe, z);
            for &ox in range {
                for &oy in yr {
                    let l = [base[0] + ox, base[1] + oy];
                    if j == own && l == own_lift {
                        continue;
                    }
                    let a = lifted(z, l);
                    let gap = sq(&xe, &a) - self.dual_weights[j] - p_own;
                    let sep = sq(&a, &a_own).sqrt();
                    if sep > 0.0 {
                        best = best.min(gap.max(0.0) / (2.0 * sep));
                    }
                }
            }
        }
        best
    }

    /// Serializable summary.
    pub fn record(&self) -> DiagramRecord {
        DiagramRecord {
            dim: self.dim,
            sites: self.sites.iter().map(|s| s.coords().to_vec()).collect(),
            dual_weights: self.dual_weights.clone(),
            target_masses: self.target_masses.clone(),
            computed_masses: self.computed_masses.clone(),
            grid_res: self.grid_res,
            residual: self.residual,
            mass_tol: self.mass_tol,
            iterations: self.iterations,
            method: self.method,
            dual_value: self.dual_value(),
        }
    }
}

/// JSON export of a diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramRecord {
    pub dim: usize,
    pub sites: Vec<Vec<f64>>,
    pub dual_weights: Vec<f64>,
    pub target_masses: Vec<f64>,
    pub computed_masses: Vec<f64>,
    pub grid_res: usize,
    pub residual: f64,
    pub mass_tol: f64,
    pub iterations: usize,
    pub method: AscentMethod,
    pub dual_value: f64,
}

#[inline]
pub(crate) fn embed(p: &TorusPoint) -> P2 {
    let r = p.raw();
    let mut out = [0.0; MAX_DIM];
    out[..p.dim()].copy_from_slice(&r[..p.dim()]);
    out
}

#[inline]
pub(crate) fn lifted(z: &P2, l: [i32; 2]) -> P2 {
    [z[0] + l[0] as f64, z[1] + l[1] as f64]
}

#[inline]
pub(crate) fn sq(a: &P2, b: &P2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dual_of(lambda: &[f64], psi: &[f64], min_integral: f64) -> f64 {
    lambda.iter().zip(psi).map(|(l, p)| l * p).sum::<f64>() + min_integral
}

/// Raises the weights of empty cells until each owns at least one grid point,
/// never taking the last point of another cell.
fn fill_empty_cells(grid: Grid, sites: &[P2], psi: &mut [f64]) -> Result<()> {
    let bump = 1e-6 * grid.h() * grid.h();
    for _ in 0..200 {
        let a = assign(grid, sites, psi);
        let empty: Vec<usize> = (0..sites.len()).filter(|&i| a.counts[i] == 0).collect();
        if empty.is_empty() {
            return Ok(());
        }
        let mut counts = a.counts.clone();
        for i in empty {
            let z = sites[i];
            let centre = grid.index_of(&z);
            let (cx, cy) = (centre % grid.nx(), centre / grid.nx());
            let ys: Vec<isize> = if grid.dim == 2 { vec![-1, 0, 1] } else { vec![0] };
            let mut choice: Option<(usize, f64)> = None;
            for dy in &ys {
                for dx in [-1isize, 0, 1] {
                    let ix = (cx as isize + dx).rem_euclid(grid.nx() as isize) as usize;
                    let iy = (cy as isize + dy).rem_euclid(grid.ny() as isize) as usize;
                    let p = iy * grid.nx() + ix;
                    let o = a.owner[p] as usize;
                    if counts[o] <= 1 || o == i {
                        continue;
                    }
                    let x = grid.center(p);
                    let need = (dist_sq(&x, &z) - psi[i]) - (dist_sq(&x, &sites[o]) - psi[o]);
                    if choice.is_none_or(|(_, n)| need < n) {
                        choice = Some((p, need));
                    }
                }
            }
            if let Some((p, need)) = choice {
                psi[i] += need.max(0.0) + bump;
                counts[a.owner[p] as usize] -= 1;
            }
        }
    }
    Err(invalid("could not give every site a non-empty cell"))
}

/// Dual ascent for the cell weights of `nu` against the uniform measure.
pub fn solve_laguerre(nu: &AtomicMeasure, cfg: &SolveConfig) -> Result<LaguerreDiagram> {
    cfg.validate()?;
    let dim = match nu.domain() {
        Domain::Torus(n) => n,
        Domain::Interval => return Err(invalid("the transport solver works on the torus")),
    };
    let grid = Grid {
        dim,
        res: cfg.grid_res,
    };
    let n = grid.len();
    let lambda = nu.weights().to_vec();
    let k = lambda.len();
    let min_lambda = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_lambda < 10.0 / n as f64 {
        return Err(invalid(format!(
            "atom weight {min_lambda:.3e} is below the resolvable limit 10/N = {:.3e}",
            10.0 / n as f64
        )));
    }
    let tol = cfg.resolved_mass_tol(min_lambda);
    let sites_tp = nu.torus_points();
    let sites: Vec<P2> = sites_tp.iter().map(embed).collect();

    let coarse = cfg.grid_res / 2;
    let warm = k > 1
        && coarse >= if dim == 1 { 1024 } else { 128 }
        && min_lambda >= 10.0 / coarse.pow(dim as u32) as f64;
    let mut psi = if k == 1 {
        vec![0.0]
    } else if warm {
        // coarse-to-fine: the half-resolution optimum is a close starting point
        let c = SolveConfig {
            grid_res: coarse,
            mass_tol: None,
            ..*cfg
        };
        solve_laguerre(nu, &c)
            .map(|d| d.dual_weights)
            .unwrap_or_else(|_| vec![0.0; k])
    } else {
        vec![0.0; k]
    };
    fill_empty_cells(grid, &sites, &mut psi)?;
    let mut cur = row_quadrature(grid, &sites, &psi, true);
    let mut dual = dual_of(&lambda, &psi, cur.min_integral);
    let mut history = vec![dual];
    let mut iterations = 0;
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut residual = f64::INFINITY;

    while iterations <= cfg.max_iters {
        let g: Vec<f64> = lambda.iter().zip(&cur.masses).map(|(l, mi)| l - mi).collect();
        residual = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if residual <= tol {
            converged = true;
            break;
        }
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;
        let g2 = norm2(&g);
        let accepted = match cfg.method {
            AscentMethod::Newton => {
                let d = Hessian::assemble(k, &cur.couplings).solve(&g);
                newton_line_search(grid, &sites, &lambda, &psi, &d, dual, g2, cfg.initial_step)
                    .or_else(|| gradient_line_search(grid, &sites, &lambda, &psi, &g, dual, &mut step, cfg.initial_step))
            }
            AscentMethod::Gradient => {
                gradient_line_search(grid, &sites, &lambda, &psi, &g, dual, &mut step, cfg.initial_step)
            }
        };
        match accepted {
            Some((p, q, v)) => {
                psi = p;
                cur = q;
                dual = v;
                history.push(dual);
            }
            None => break,
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual,
            tolerance: tol,
        });
    }
    let shift = psi[0];
    for p in psi.iter_mut() {
        *p -= shift;
    }
    // the shift raises every power by the same constant
    let owner = assign(grid, &sites, &psi).owner;
    Ok(LaguerreDiagram {
        dim,
        sites: sites_tp,
        dual_weights: psi,
        residual: max_abs_diff(&cur.masses, &lambda),
        target_masses: lambda,
        computed_masses: cur.masses,
        grid_res: cfg.grid_res,
        mass_tol: tol,
        iterations,
        method: cfg.method,
        dual_history: history,
        owner,
        min_integral: cur.min_integral + shift,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

type Trial = (Vec<f64>, RowQuadrature, f64);

fn evaluate(grid: Grid, sites: &[P2], lambda: &[f64], psi: &[f64], d: &[f64], tau: f64) -> Trial {
    let trial: Vec<f64> = psi.iter().zip(d).map(|(p, di)| p + tau * di).collect();
    let q = row_quadrature(grid, sites, &trial, true);
    let v = dual_of(lambda, &trial, q.min_integral);
    (trial, q, v)
}

fn gradient_norm(lambda: &[f64], q: &RowQuadrature) -> f64 {
    lambda
        .iter()
        .zip(&q.masses)
        .map(|(l, m)| (l - m) * (l - m))
        .sum::<f64>()
        .sqrt()
}

#[allow(clippy::too_many_arguments)]
fn newton_line_search(
    grid: Grid,
    sites: &[P2],
    lambda: &[f64],
    psi: &[f64],
    d: &[f64],
    dual: f64,
    g2: f64,
    first: f64,
) -> Option<Trial> {
    let mut tau = first;
    let mut best: Option<(f64, Trial)> = None;
    while tau >= 1e-10 {
        let (trial, q, v) = evaluate(grid, sites, lambda, psi, d, tau);
        if q.masses.iter().all(|m| *m > 0.0) && v >= dual {
            let g2t = gradient_norm(lambda, &q);
            if g2t <= (1.0 - 0.5 * tau) * g2 {
                return Some((trial, q, v));
            }
            if g2t < g2 && best.as_ref().is_none_or(|(b, _)| g2t < *b) {
                best = Some((g2t, (trial, q, v)));
            }
        }
        tau *= 0.5;
    }
    best.map(|(_, t)| t)
}

#[allow(clippy::too_many_arguments)]
fn gradient_line_search(
    grid: Grid,
    sites: &[P2],
    lambda: &[f64],
    psi: &[f64],
    g: &[f64],
    dual: f64,
    step: &mut f64,
    first: f64,
) -> Option<Trial> {
    let mut tau = (*step * 2.0).min(first);
    while tau >= 1e-12 {
        let (trial, q, v) = evaluate(grid, sites, lambda, psi, g, tau);
        if q.masses.iter().all(|m| *m > 0.0) && v > dual {
            *step = tau;
            return Some((trial, q, v));
        }
        tau *= 0.5;
    }
    None
}

/// Grid-aligned segments `[x0, y0, x1, y1]` separating quadrature points in
/// different lifted cells, merged into maximal runs. Contacts between two
/// copies of one cell are included. Two-dimensional diagrams only.
pub fn boundary_segments(diag: &LaguerreDiagram) -> Vec<[f64; 4]> {
    let grid = diag.grid();
    if grid.dim != 2 {
        return Vec::new();
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let h = grid.h();
    // vertical[ix][iy]: edge on the line x = (ix + 1) h between rows iy
    let mut vertical = vec![false; nx * ny];
    let mut horizontal = vec![false; nx * ny];
    let mut p = 0usize;
    let sites = diag.site_array();
    let lifts: Vec<[i32; 2]> = (0..grid.len())
        .map(|q| lift_of(&grid.center(q), &sites[diag.owner[q] as usize]))
        .collect();
    for iy in 0..ny {
        for ix in 0..nx {
            let here = (diag.owner[p], lifts[p]);
            let (qx, wx) = if ix + 1 == nx { (0, 1) } else { (ix + 1, 0) };
            let q = iy * nx + qx;
            if diag.owner[q] != here.0 || [lifts[q][0] + wx, lifts[q][1]] != here.1 {
                vertical[ix * ny + iy] = true;
            }
            let (qy, wy) = if iy + 1 == ny { (0, 1) } else { (iy + 1, 0) };
            let q = qy * nx + ix;
            if diag.owner[q] != here.0 || [lifts[q][0], lifts[q][1] + wy] != here.1 {
                horizontal[iy * nx + ix] = true;
            }
            p += 1;
        }
    }
    let mut out = Vec::new();
    let runs = |flags: &[bool], outer: usize, inner: usize, out: &mut Vec<[f64; 4]>, vertical: bool| {
        for a in 0..outer {
            let mut b = 0;
            while b < inner {
                if !flags[a * inner + b] {
                    b += 1;
                    continue;
                }
                let start = b;
                while b < inner && flags[a * inner + b] {
                    b += 1;
                }
                let line = ((a + 1) as f64 * h).min(1.0);
                let (s, e) = (start as f64 * h, b as f64 * h);
                out.push(if vertical { [line, s, line, e] } else { [s, line, e, line] });
            }
        }
    };
    runs(&vertical, nx, ny, &mut out, true);
    runs(&horizontal, ny, nx, &mut out, false);
    out
}

/// Lifted lower-left and upper-right corners of the grid points owned by a
/// cell, read in the frame of its site. Coordinates may leave `[0, 1)`.
pub fn cell_bounding_boxes(diag: &LaguerreDiagram) -> Vec<(Vec<f64>, Vec<f64>)> {
    let grid = diag.grid();
    let sites = diag.site_array();
    let mut lo = vec![[f64::INFINITY; 2]; diag.len()];
    let mut hi = vec![[f64::NEG_INFINITY; 2]; diag.len()];
    for (p, &o) in diag.owner.iter().enumerate() {
        let o = o as usize;
        let x = grid.center(p);
        for a in 0..diag.dim {
            let v = sites[o][a] + min_lift(x[a] - sites[o][a]);
            lo[o][a] = lo[o][a].min(v);
            hi[o][a] = hi[o][a].max(v);
        }
    }
    let half = 0.5 * grid.h();
    (0..diag.len())
        .map(|i| {
            (
                (0..diag.dim).map(|a| lo[i][a] - half).collect(),
                (0..diag.dim).map(|a| hi[i][a] + half).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tp(c: &[f64]) -> TorusPoint {
        TorusPoint::new(c).unwrap()
    }

    fn two_site(psi: [f64; 2]) -> LaguerreDiagram {
        LaguerreDiagram::with_weights(vec![tp(&[0.0]), tp(&[0.5])], psi.to_vec(), vec![0.5, 0.5], 1024)
            .unwrap()
    }

    #[test]
    fn cell_index_examples() {
        let single = LaguerreDiagram::with_weights(vec![tp(&[0.3, 0.4])], vec![0.0], vec![1.0], 32).unwrap();
        assert_eq!(single.cell_index(&tp(&[0.9, 0.1])), 0);
        let d = two_site([0.0, 0.0]);
        assert_eq!(d.cell_index(&tp(&[0.2])), 0);
        assert_eq!(d.cell_index(&tp(&[0.3])), 1);
        let d = two_site([0.09, 0.0]);
        assert_eq!(d.cell_index(&tp(&[0.3])), 0);
        // boundary where x^2 - 0.09 = (0.5 - x)^2
        let xb = (0.25 + 0.09) / 1.0;
        assert_abs_diff_eq!(xb, 0.34, epsilon = 1e-12);
        assert_eq!(d.cell_index(&tp(&[xb - 1e-9])), 0);
        assert_eq!(d.cell_index(&tp(&[xb + 1e-9])), 1);
    }

    #[test]
    fn cell_mass_examples() {
        let single = LaguerreDiagram::with_weights(vec![tp(&[0.3, 0.4])], vec![0.0], vec![1.0], 32).unwrap();
        assert_eq!(single.cell_masses(), vec![1.0]);
        assert_eq!(two_site([0.0, 0.0]).cell_masses(), vec![0.5, 0.5]);
        let quads = vec![tp(&[0.25, 0.25]), tp(&[0.75, 0.25]), tp(&[0.25, 0.75]), tp(&[0.75, 0.75])];
        let d = LaguerreDiagram::with_weights(quads, vec![0.0; 4], vec![0.25; 4], 64).unwrap();
        assert_eq!(d.cell_masses(), vec![0.25; 4]);
    }

    #[test]
    fn dual_value_closed_forms() {
        // single site: Phi = int d^2(x, z) dm = n / 12
        let d = LaguerreDiagram::with_weights(vec![tp(&[0.2])], vec![0.0], vec![1.0], 4096).unwrap();
        assert_abs_diff_eq!(d.dual_value(), 1.0 / 12.0, epsilon = 1e-6);
        // two antipodal sites on the circle: 4 int_0^{1/4} r^2 dr = 1/48
        assert_abs_diff_eq!(two_site([0.0, 0.0]).dual_value(), 1.0 / 48.0, epsilon = 1e-4);
    }

    fn solve(nu: &AtomicMeasure, res: usize) -> LaguerreDiagram {
        solve_laguerre(nu, &SolveConfig::for_dim(nu.dim()).with_grid(res)).unwrap()
    }

    #[test]
    fn single_atom_is_trivial() {
        let nu = AtomicMeasure::dirac(Domain::Torus(2), &[0.3, 0.7]).unwrap();
        let d = solve(&nu, 64);
        assert_eq!(d.dual_weights, vec![0.0]);
        assert_eq!(d.computed_masses, vec![1.0]);
    }

    #[test]
    fn symmetric_sites_have_equal_weights() {
        let nu = AtomicMeasure::new(Domain::Torus(2), vec![0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75], vec![0.25; 4])
            .unwrap();
        let d = solve(&nu, 128);
        for w in &d.dual_weights {
            assert_abs_diff_eq!(*w, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn circle_two_atoms_match_closed_form() {
        let nu = AtomicMeasure::new(Domain::Torus(1), vec![0.0, 0.5], vec![0.75, 0.25]).unwrap();
        let d = solve(&nu, 8192);
        assert!(d.residual <= d.mass_tol);
        assert!((d.computed_masses[0] - 0.75).abs() <= d.mass_tol);
        // the cell of the heavy site is the arc [-3/8, 3/8]: boundary at 3/8
        // requires (3/8)^2 - psi_0 = (1/8)^2 - psi_1
        let want = -(0.375f64.powi(2) - 0.125f64.powi(2));
        assert_abs_diff_eq!(d.dual_weights[1] - d.dual_weights[0], want, epsilon = 1e-3);
    }

    #[test]
    fn newton_and_gradient_agree() {
        let nu = AtomicMeasure::new(
            Domain::Torus(2),
            vec![0.113, 0.207, 0.631, 0.329, 0.417, 0.803, 0.859, 0.551],
            vec![0.4, 0.3, 0.2, 0.1],
        )
        .unwrap();
        let mut cfg = SolveConfig::for_dim(2).with_grid(96);
        let a = solve_laguerre(&nu, &cfg).unwrap();
        cfg.method = AscentMethod::Gradient;
        let b = solve_laguerre(&nu, &cfg).unwrap();
        for (x, y) in a.dual_weights.iter().zip(&b.dual_weights) {
            assert_abs_diff_eq!(x, y, epsilon = 2e-3);
        }
        for d in [&a, &b] {
            assert!(d.dual_history.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn rejects_unresolvable_atoms() {
        let nu = AtomicMeasure::new(Domain::Torus(2), vec![0.1, 0.1, 0.5, 0.5], vec![0.9999, 0.0001]).unwrap();
        let err = solve_laguerre(&nu, &SolveConfig::for_dim(2).with_grid(64)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn boundary_distance_single_site_is_cut_locus() {
        let d = LaguerreDiagram::with_weights(vec![tp(&[0.0, 0.0])], vec![0.0], vec![1.0], 32).unwrap();
        assert_abs_diff_eq!(d.boundary_distance(&tp(&[0.1, 0.2])), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d.boundary_distance(&tp(&[0.5, 0.5])), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_distance_two_sites() {
        let d = two_site([0.09, 0.0]);
        assert_abs_diff_eq!(d.boundary_distance(&tp(&[0.30])), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn bounding_boxes_cover_cells() {
        let d = LaguerreDiagram::with_weights(vec![tp(&[0.0, 0.0])], vec![0.0], vec![1.0], 32).unwrap();
        let b = cell_bounding_boxes(&d);
        assert_abs_diff_eq!(b[0].0[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b[0].1[1], 0.5, epsilon = 1e-12);
    }
}
