//! Finitely supported probability measures and the Dirichlet-Ferguson
//! sampler (stick-breaking with uniform base measure).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{self, Purpose};
use crate::torus::{min_lift, wrap_unit, TorusPoint, MAX_DIM};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Flat torus of the given dimension (1 or 2).
    Torus(usize),
    /// Closed unit interval with the Euclidean metric.
    Interval,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus(n) => *n,
            Domain::Interval => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Torus(n) if *n == 0 || *n > MAX_DIM => {
                Err(invalid(format!("unsupported torus dimension {n}")))
            }
            _ => Ok(()),
        }
    }

    /// Squared distance between two locations of this domain.
    #[inline]
    pub fn dist_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Domain::Torus(_) => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = min_lift(x - y);
                    d * d
                })
                .sum(),
            Domain::Interval => (a[0] - b[0]) * (a[0] - b[0]),
        }
    }

    fn valid_location(&self, c: f64) -> bool {
        match self {
            Domain::Torus(_) => (0.0..1.0).contains(&c),
            Domain::Interval => (0.0..=1.0).contains(&c),
        }
    }
}

/// A probability measure `sum_i w_i delta_{x_i}` with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    domain: Domain,
    /// Flattened coordinates, `domain.dim()` per atom.
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(domain: Domain, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        let dim = domain.dim();
        if weights.is_empty() {
            return Err(invalid("a probability measure needs at least one atom"));
        }
        if locations.len() != dim * weights.len() {
            return Err(invalid(format!(
                "{} coordinates for {} atoms in dimension {dim}",
                locations.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(invalid(format!("atom weights must be positive, found {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        if let Some(c) = locations.iter().find(|c| !domain.valid_location(**c)) {
            return Err(invalid(format!("location coordinate {c} outside the domain")));
        }
        Ok(Self {
            domain,
            locations,
            weights,
        })
    }

    /// Like [`AtomicMeasure::new`] but rescales the weights to unit mass and
    /// reduces torus coordinates modulo 1.
    pub fn normalized(domain: Domain, mut locations: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("total mass must be positive and finite"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        if let Domain::Torus(_) = domain {
            locations.iter_mut().for_each(|c| *c = wrap_unit(*c));
        }
        Self::new(domain, locations, weights)
    }

    pub fn dirac(domain: Domain, location: &[f64]) -> Result<Self> {
        Self::new(domain, location.to_vec(), vec![1.0])
    }

    /// Equal-weight empirical measure of the given points.
    pub fn empirical(domain: Domain, locations: Vec<f64>) -> Result<Self> {
        let k = locations.len() / domain.dim().max(1);
        Self::normalized(domain, locations, vec![1.0; k])
    }

    /// Uniform `per_axis^n` grid of cell centres, each with equal weight.
    pub fn uniform_grid(domain: Domain, per_axis: usize) -> Result<Self> {
        let dim = domain.dim();
        let mut locs = Vec::with_capacity(per_axis.pow(dim as u32) * dim);
        let c = |i: usize| (i as f64 + 0.5) / per_axis as f64;
        if dim == 1 {
            (0..per_axis).for_each(|i| locs.push(c(i)));
        } else {
            for i in 0..per_axis {
                for j in 0..per_axis {
                    locs.push(c(i));
                    locs.push(c(j));
                }
            }
        }
        Self::empirical(domain, locs)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    #[inline]
    pub fn location(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.locations[i * d..(i + 1) * d]
    }

    /// Atom location as a torus point (torus domains only).
    pub fn torus_point(&self, i: usize) -> TorusPoint {
        debug_assert!(matches!(self.domain, Domain::Torus(_)));
        let mut c = [0.0; MAX_DIM];
        c[..self.dim()].copy_from_slice(self.location(i));
        TorusPoint::from_raw(c, self.dim())
    }

    pub fn torus_points(&self) -> Vec<TorusPoint> {
        (0..self.len()).map(|i| self.torus_point(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.location(i), self.weights[i]))
    }

    /// `nu(B)` for a half-open box.
    pub fn mass_in(&self, b: &AxisBox) -> f64 {
        self.iter()
            .filter(|(x, _)| b.contains(x))
            .map(|(_, w)| w)
            .sum()
    }

    /// Integral of `f` against the measure.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Weights in non-increasing order (the size-ordered representation).
    pub fn size_ordered_weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    }

    /// Atoms re-ordered by non-increasing weight.
    pub fn sorted_by_weight(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]));
        self.permuted(&idx)
    }

    fn permuted(&self, idx: &[usize]) -> Self {
        let mut locations = Vec::with_capacity(self.locations.len());
        let mut weights = Vec::with_capacity(self.len());
        for &i in idx {
            locations.extend_from_slice(self.location(i));
            weights.push(self.weights[i]);
        }
        Self {
            domain: self.domain,
            locations,
            weights,
        }
    }

    /// Same measure with coincident atoms combined, atoms in lexicographic
    /// order of their coordinates.
    pub fn merged_duplicates(&self) -> Result<Self> {
        let dim = self.dim();
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| -> Vec<u64> { self.location(i).iter().map(|c| c.to_bits()).collect() };
        order.sort_by_key(|&i| key(i));
        let mut locs = Vec::with_capacity(self.locations.len());
        let mut w: Vec<f64> = Vec::with_capacity(self.len());
        let mut last: Option<Vec<u64>> = None;
        for i in order {
            let k = key(i);
            if last.as_ref() == Some(&k) {
                *w.last_mut().unwrap() += self.weights[i];
            } else {
                locs.extend_from_slice(&self.locations[i * dim..(i + 1) * dim]);
                w.push(self.weights[i]);
                last = Some(k);
            }
        }
        Self::normalized(self.domain, locs, w)
    }

    /// Push-forward under the translation `x -> x + v` (torus only).
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if !matches!(self.domain, Domain::Torus(_)) || v.len() != self.dim() {
            return Err(invalid("translation needs a torus measure of matching dimension"));
        }
        let d = self.dim();
        let locations = self
            .locations
            .iter()
            .enumerate()
            .map(|(i, c)| wrap_unit(c + v[i % d]))
            .collect();
        Ok(Self {
            domain: self.domain,
            locations,
            weights: self.weights.clone(),
        })
    }

    /// Merges atoms lighter than `min_weight` into their nearest heavy atom.
    ///
    /// Returns the merged measure and the total mass that was moved. When no
    /// atom reaches the threshold, the heaviest one absorbs everything.
    pub fn merge_light_atoms(&self, min_weight: f64) -> (Self, f64) {
        let heavy: Vec<usize> = (0..self.len())
            .filter(|&i| self.weights[i] >= min_weight)
            .collect();
        let heavy = if heavy.is_empty() {
            let best = (0..self.len())
                .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
                .unwrap_or(0);
            vec![best]
        } else {
            heavy
        };
        if heavy.len() == self.len() {
            return (self.clone(), 0.0);
        }
        let mut is_heavy = vec![false; self.len()];
        heavy.iter().for_each(|&i| is_heavy[i] = true);
        let mut new_w: Vec<f64> = heavy.iter().map(|&i| self.weights[i]).collect();
        let mut moved = 0.0;
        for (i, &h) in is_heavy.iter().enumerate() {
            if h {
                continue;
            }
            let target = (0..heavy.len())
                .min_by(|&a, &b| {
                    let da = self.domain.dist_sq(self.location(i), self.location(heavy[a]));
                    let db = self.domain.dist_sq(self.location(i), self.location(heavy[b]));
                    da.total_cmp(&db)
                })
                .expect("at least one heavy atom");
            new_w[target] += self.weights[i];
            moved += self.weights[i];
        }
        let mut locations = Vec::with_capacity(heavy.len() * self.dim());
        for &i in &heavy {
            locations.extend_from_slice(self.location(i));
        }
        let total: f64 = new_w.iter().sum();
        new_w.iter_mut().for_each(|w| *w /= total);
        (
            Self {
                domain: self.domain,
                locations,
                weights: new_w,
            },
            moved,
        )
    }
}

/// Half-open axis-aligned box `[lo, hi)` inside the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box corners must have equal, nonzero dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || *a < 0.0 || *b > 1.0) {
            return Err(invalid(format!("degenerate or out-of-range box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| {
                // the closed upper face of the unit cube belongs to the last box
                *v >= *a && (*v < *b || (*b == 1.0 && *v <= 1.0))
            })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn overlap_volume(&self, other: &AxisBox) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((a0, a1), (b0, b1))| (a1.min(*b1) - a0.max(*b0)).max(0.0))
            .product()
    }

    /// The four quadrants of the unit square.
    pub fn quadrants() -> Vec<AxisBox> {
        let h = [(0.0, 0.5), (0.5, 1.0)];
        let mut out = Vec::with_capacity(4);
        for (x0, x1) in h {
            for (y0, y1) in h {
                out.push(AxisBox {
                    lo: vec![x0, y0],
                    hi: vec![x1, y1],
                });
            }
        }
        out
    }

    /// `[0, 1/2)` and `[1/2, 1)` along the first axis, in dimension `dim`.
    pub fn halves(dim: usize) -> Vec<AxisBox> {
        let mut a = AxisBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        };
        let mut b = a.clone();
        a.hi[0] = 0.5;
        b.lo[0] = 0.5;
        vec![a, b]
    }
}

/// Checks that boxes are pairwise disjoint (up to null sets).
pub fn validate_partition(partition: &[AxisBox]) -> Result<()> {
    for (i, a) in partition.iter().enumerate() {
        for b in &partition[i + 1..] {
            if a.dim() != b.dim() {
                return Err(invalid("partition boxes have different dimensions"));
            }
            if a.overlap_volume(b) > 1e-15 {
                return Err(invalid(format!("overlapping boxes {a:?} and {b:?}")));
            }
        }
    }
    Ok(())
}

/// The vector `(nu(M_1), ..., nu(M_N))` for a disjoint box partition.
pub fn empirical_partition_vector(nu: &AtomicMeasure, partition: &[AxisBox]) -> Result<Vec<f64>> {
    validate_partition(partition)?;
    if partition.iter().any(|b| b.dim() != nu.dim()) {
        return Err(invalid("partition dimension does not match the measure"));
    }
    let mut out = vec![0.0; partition.len()];
    for (x, w) in nu.iter() {
        match partition.iter().position(|b| b.contains(x)) {
            Some(j) => out[j] += w,
            None => return Err(invalid(format!("atom at {x:?} is not covered by the partition"))),
        }
    }
    Ok(out)
}

/// Dirichlet parameters `(beta m(M_1), ..., beta m(M_N))` of the random
/// vector `(nu(M_1), ..., nu(M_N))`.
pub fn dirichlet_partition_law(beta: f64, cell_masses: &[f64]) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if cell_masses.is_empty() || cell_masses.iter().any(|m| !(*m > 0.0)) {
        return Err(invalid("cell masses must be positive"));
    }
    let total: f64 = cell_masses.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("cell masses sum to {total}, expected 1")));
    }
    Ok(cell_masses.iter().map(|m| beta * m).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickBreakingConfig {
    pub beta: f64,
    /// Stop once the unbroken remainder of the stick falls below this.
    pub tail_tol: f64,
    /// Cap on the number of atoms, including the remainder atom.
    pub max_atoms: usize,
    pub seed: u64,
}

impl Default for StickBreakingConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            tail_tol: 1e-8,
            max_atoms: 4096,
            seed: 0,
        }
    }
}

impl StickBreakingConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(invalid("tail_tol must lie in (0, 1)"));
        }
        if self.max_atoms == 0 {
            return Err(invalid("max_atoms must be at least 1"));
        }
        Ok(())
    }
}

/// `Beta(1, beta)` draw by inversion: `t = 1 - U^(1/beta)`.
#[inline]
pub fn beta_one_inverse_cdf(u: f64, beta: f64) -> f64 {
    1.0 - u.powf(1.0 / beta)
}

fn uniform_location<R: Rng + ?Sized>(domain: Domain, rng: &mut R, out: &mut Vec<f64>) {
    for _ in 0..domain.dim() {
        out.push(rng.random::<f64>());
    }
}

/// Truncated stick-breaking draw from the Dirichlet-Ferguson measure with
/// uniform base measure on `domain`.
///
/// Weights are `t_k prod_{i<k} (1 - t_i)` with `t_i ~ Beta(1, beta)` and the
/// locations are i.i.d. uniform. Breaking stops once the remainder drops
/// below `tail_tol` or `max_atoms - 1` sticks have been broken; the remainder
/// is then placed on one extra atom at a fresh uniform location.
pub fn stick_breaking<R: Rng + ?Sized>(
    cfg: &StickBreakingConfig,
    domain: Domain,
    rng: &mut R,
) -> Result<AtomicMeasure> {
    cfg.validate()?;
    domain.validate()?;
    let mut locations = Vec::new();
    let mut weights = Vec::new();
    let mut remainder = 1.0f64;
    let mut broken = 0usize;
    while remainder >= cfg.tail_tol && broken + 1 < cfg.max_atoms {
        let t = beta_one_inverse_cdf(rng.random::<f64>(), cfg.beta);
        let mut loc = Vec::with_capacity(domain.dim());
        uniform_location(domain, rng, &mut loc);
        broken += 1;
        let w = t * remainder;
        remainder *= 1.0 - t;
        if w > 0.0 {
            locations.extend(loc);
            weights.push(w);
        }
    }
    if remainder > 0.0 {
        uniform_location(domain, rng, &mut locations);
        weights.push(remainder);
    }
    AtomicMeasure::normalized(domain, locations, weights)
}

/// A stick-breaking sample together with the metadata persisted alongside it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureRecord {
    /// `[coords..., weight]` per atom.
    pub atoms: Vec<Vec<f64>>,
    pub beta: f64,
    pub seed: u64,
    pub index: u64,
    pub domain: Domain,
    /// How the infinite series was cut off.
    pub truncation: String,
    pub tail_tol: f64,
    pub max_atoms: usize,
}

impl MeasureRecord {
    pub fn from_measure(nu: &AtomicMeasure, cfg: &StickBreakingConfig, index: u64) -> Self {
        let atoms = nu
            .iter()
            .map(|(x, w)| {
                let mut row = x.to_vec();
                row.push(w);
                row
            })
            .collect();
        Self {
            atoms,
            beta: cfg.beta,
            seed: cfg.seed,
            index,
            domain: nu.domain(),
            truncation: "residual-atom".to_string(),
            tail_tol: cfg.tail_tol,
            max_atoms: cfg.max_atoms,
        }
    }

    pub fn to_measure(&self) -> Result<AtomicMeasure> {
        let dim = self.domain.dim();
        let mut locations = Vec::with_capacity(self.atoms.len() * dim);
        let mut weights = Vec::with_capacity(self.atoms.len());
        for row in &self.atoms {
            if row.len() != dim + 1 {
                return Err(invalid(format!("atom row {row:?} has wrong length")));
            }
            locations.extend_from_slice(&row[..dim]);
            weights.push(row[dim]);
        }
        AtomicMeasure::normalized(self.domain, locations, weights)
    }
}

/// `n` independent stick-breaking draws, sample `i` driven by stream
/// `(cfg.seed, i)`.
pub fn sample_df_batch(cfg: &StickBreakingConfig, domain: Domain, n: usize) -> Result<Vec<AtomicMeasure>> {
    cfg.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cfg.seed, i, Purpose::Measure);
            stick_breaking(cfg, domain, &mut r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn draw(beta: f64, domain: Domain, i: u64) -> AtomicMeasure {
        let cfg = StickBreakingConfig::new(beta);
        stick_breaking(&cfg, domain, &mut rng::stream(11, i, Purpose::Measure)).unwrap()
    }

    #[test]
    fn measure_validation() {
        let d = Domain::Torus(2);
        assert!(AtomicMeasure::new(d, vec![0.1, 0.2], vec![1.0]).is_ok());
        assert!(AtomicMeasure::new(d, vec![0.1, 0.2], vec![0.5]).is_err());
        assert!(AtomicMeasure::new(d, vec![0.1, 1.0], vec![1.0]).is_err());
        assert!(AtomicMeasure::new(d, vec![0.1], vec![1.0]).is_err());
        assert!(AtomicMeasure::new(d, vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 0.0]).is_err());
        assert!(AtomicMeasure::new(Domain::Interval, vec![1.0], vec![1.0]).is_ok());
        assert!(AtomicMeasure::new(Domain::Torus(3), vec![0.0; 3], vec![1.0]).is_err());
    }

    #[test]
    fn total_mass_is_one_and_weights_positive() {
        for beta in [1e-3, 0.5, 2.0, 50.0] {
            for i in 0..20 {
                let nu = draw(beta, Domain::Torus(2), i);
                let s: f64 = nu.weights().iter().sum();
                assert!((s - 1.0).abs() <= 1e-12);
                assert!(nu.weights().iter().all(|w| *w > 0.0));
                assert!(nu.len() <= 4096);
            }
        }
    }

    #[test]
    fn max_atoms_caps_the_draw() {
        let cfg = StickBreakingConfig {
            beta: 100.0,
            max_atoms: 5,
            ..Default::default()
        };
        let nu = stick_breaking(&cfg, Domain::Interval, &mut rng::stream(1, 0, Purpose::Measure)).unwrap();
        assert!(nu.len() <= 5);
        let cfg = StickBreakingConfig {
            beta: 100.0,
            max_atoms: 1,
            ..Default::default()
        };
        let nu = stick_breaking(&cfg, Domain::Interval, &mut rng::stream(1, 0, Purpose::Measure)).unwrap();
        assert_eq!(nu.weights(), &[1.0]);
    }

    #[test]
    fn determinism() {
        assert_eq!(draw(3.0, Domain::Torus(2), 5), draw(3.0, Domain::Torus(2), 5));
        assert_ne!(draw(3.0, Domain::Torus(2), 5), draw(3.0, Domain::Torus(2), 6));
    }

    #[test]
    fn small_beta_gives_dominant_first_atom() {
        let beta = 1e-3;
        let n = 10_000;
        let dominant = (0..n)
            .filter(|&i| draw(beta, Domain::Interval, i).weights()[0] > 0.99)
            .count();
        assert!(dominant as f64 >= 0.99 * n as f64, "{dominant}");
    }

    #[test]
    fn partition_law_examples() {
        assert_eq!(dirichlet_partition_law(3.0, &[0.5, 0.5]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(dirichlet_partition_law(1.0, &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(
            dirichlet_partition_law(2.0, &[0.25, 0.25, 0.5]).unwrap(),
            vec![0.5, 0.5, 1.0]
        );
        assert!(dirichlet_partition_law(2.0, &[0.25, 0.25]).is_err());
        assert!(dirichlet_partition_law(2.0, &[0.0, 1.0]).is_err());
        assert!(dirichlet_partition_law(0.0, &[1.0]).is_err());
    }

    #[test]
    fn partition_vector_examples() {
        let q = AxisBox::quadrants();
        let d = AtomicMeasure::dirac(Domain::Torus(2), &[0.1, 0.1]).unwrap();
        assert_eq!(empirical_partition_vector(&d, &q).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let four = AtomicMeasure::new(
            Domain::Torus(2),
            vec![0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75],
            vec![0.25; 4],
        )
        .unwrap();
        assert_eq!(empirical_partition_vector(&four, &q).unwrap(), vec![0.25; 4]);

        let overlapping = vec![
            AxisBox::new(vec![0.0, 0.0], vec![0.6, 1.0]).unwrap(),
            AxisBox::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap(),
        ];
        assert!(empirical_partition_vector(&four, &overlapping).is_err());
        let partial = vec![AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap()];
        assert!(empirical_partition_vector(&four, &partial).is_err());
    }

    #[test]
    fn partition_vector_sums_to_one() {
        let q = AxisBox::quadrants();
        for i in 0..50 {
            let nu = draw(4.0, Domain::Torus(2), i);
            let v = empirical_partition_vector(&nu, &q).unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn merging_light_atoms_preserves_mass() {
        let nu = draw(20.0, Domain::Torus(2), 3);
        let (merged, moved) = nu.merge_light_atoms(1e-2);
        assert!(merged.weights().iter().all(|w| *w >= 1e-2));
        assert_abs_diff_eq!(merged.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let light: f64 = nu.weights().iter().filter(|w| **w < 1e-2).sum();
        assert_abs_diff_eq!(moved, light, epsilon = 1e-12);
    }

    #[test]
    fn record_round_trip() {
        let cfg = StickBreakingConfig::new(2.0);
        let nu = draw(2.0, Domain::Torus(2), 0);
        let rec = MeasureRecord::from_measure(&nu, &cfg, 0);
        let line = serde_json::to_string(&rec).unwrap();
        let back: MeasureRecord = serde_json::from_str(&line).unwrap();
        let nu2 = back.to_measure().unwrap();
        assert_eq!(nu.locations(), nu2.locations());
        for (a, b) in nu.weights().iter().zip(nu2.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
