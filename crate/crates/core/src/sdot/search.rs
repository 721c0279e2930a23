//! Bucketed power-distance search over periodic sites.
//!
//! One-dimensional problems are embedded in the plane with every second
//! coordinate equal to zero, so a single code path serves both dimensions.

use crate::torus::min_lift;

pub(crate) type P2 = [f64; 2];

/// Squared torus distance of two embedded points.
#[inline]
pub(crate) fn dist_sq(a: &P2, b: &P2) -> f64 {
    let dx = min_lift(a[0] - b[0]);
    let dy = min_lift(a[1] - b[1]);
    dx * dx + dy * dy
}

/// Integer lift `k` such that `z + k` is the copy of `z` nearest to `x`
/// (in the frame where `x` has its canonical coordinates).
#[inline]
pub(crate) fn lift_of(x: &P2, z: &P2) -> [i32; 2] {
    let f = |a: f64, b: f64| {
        let d = a - b;
        (d - min_lift(d)).round() as i32
    };
    [f(x[0], z[0]), f(x[1], z[1])]
}

pub(crate) struct PowerSearch<'a> {
    sites: &'a [P2],
    psi: &'a [f64],
    dim: usize,
    nb: usize,
    buckets: Vec<Vec<u32>>,
    bucket_psi_max: Vec<f64>,
    psi_max: f64,
}

impl<'a> PowerSearch<'a> {
    pub(crate) fn new(dim: usize, sites: &'a [P2], psi: &'a [f64]) -> Self {
        let k = sites.len().max(1);
        let nb = if dim == 1 {
            (k / 2).clamp(1, 1 << 16)
        } else {
            ((k as f64 / 2.0).sqrt().round() as usize).clamp(1, 1024)
        };
        let rows = if dim == 1 { 1 } else { nb };
        let mut buckets = vec![Vec::new(); nb * rows];
        let mut bucket_psi_max = vec![f64::NEG_INFINITY; nb * rows];
        for (i, s) in sites.iter().enumerate() {
            let b = Self::bucket_of_static(dim, nb, s);
            buckets[b].push(i as u32);
            bucket_psi_max[b] = bucket_psi_max[b].max(psi[i]);
        }
        let psi_max = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            sites,
            psi,
            dim,
            nb,
            buckets,
            bucket_psi_max,
            psi_max,
        }
    }

    #[inline]
    fn axis_bucket(nb: usize, v: f64) -> usize {
        ((v * nb as f64) as usize).min(nb - 1)
    }

    #[inline]
    fn bucket_of_static(dim: usize, nb: usize, x: &P2) -> usize {
        let bx = Self::axis_bucket(nb, x[0]);
        if dim == 1 {
            bx
        } else {
            Self::axis_bucket(nb, x[1]) * nb + bx
        }
    }

    /// Lower bound on the distance from `v` to the arc `[b s, (b+1) s)`.
    #[inline]
    fn axis_gap(&self, v: f64, b: usize) -> f64 {
        let s = 1.0 / self.nb as f64;
        let lo = b as f64 * s;
        let hi = lo + s;
        if v >= lo && v < hi {
            0.0
        } else {
            min_lift(v - lo).abs().min(min_lift(v - hi).abs())
        }
    }

    #[inline]
    fn scan_bucket(&self, x: &P2, b: usize, best: &mut (u32, f64)) {
        for &j in &self.buckets[b] {
            let v = dist_sq(x, &self.sites[j as usize]) - self.psi[j as usize];
            if v < best.1 || (v == best.1 && j < best.0) {
                *best = (j, v);
            }
        }
    }

    #[inline]
    fn visit(&self, x: &P2, bx: usize, by: usize, best: &mut (u32, f64)) {
        let b = if self.dim == 1 { bx } else { by * self.nb + bx };
        if self.buckets[b].is_empty() {
            return;
        }
        let gx = self.axis_gap(x[0], bx);
        let lb = if self.dim == 1 {
            gx * gx
        } else {
            let gy = self.axis_gap(x[1], by);
            gx * gx + gy * gy
        };
        if lb - self.bucket_psi_max[b] > best.1 {
            return;
        }
        self.scan_bucket(x, b, best);
    }

    /// Site minimising `d^2(x, z_j) - psi_j`, ties to the lowest index,
    /// together with the minimal value.
    pub(crate) fn nearest(&self, x: &P2) -> (u32, f64) {
        let nb = self.nb as isize;
        let s = 1.0 / self.nb as f64;
        let cx = Self::axis_bucket(self.nb, x[0]) as isize;
        let cy = if self.dim == 1 {
            0
        } else {
            Self::axis_bucket(self.nb, x[1]) as isize
        };
        let wrap = |v: isize| v.rem_euclid(nb) as usize;
        let mut best = (u32::MAX, f64::INFINITY);
        let mut r: isize = 0;
        loop {
            if self.dim == 1 {
                self.visit(x, wrap(cx - r), 0, &mut best);
                if r > 0 {
                    self.visit(x, wrap(cx + r), 0, &mut best);
                }
            } else if r == 0 {
                self.visit(x, wrap(cx), wrap(cy), &mut best);
            } else {
                for d in -r..=r {
                    self.visit(x, wrap(cx + d), wrap(cy - r), &mut best);
                    self.visit(x, wrap(cx + d), wrap(cy + r), &mut best);
                }
                for d in (-r + 1)..r {
                    self.visit(x, wrap(cx - r), wrap(cy + d), &mut best);
                    self.visit(x, wrap(cx + r), wrap(cy + d), &mut best);
                }
            }
            if 2 * r + 1 >= nb {
                break;
            }
            let reach = r as f64 * s;
            if reach * reach - self.psi_max > best.1 {
                break;
            }
            r += 1;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(sites: &[P2], psi: &[f64], x: &P2) -> (u32, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        for (j, s) in sites.iter().enumerate() {
            let v = dist_sq(x, s) - psi[j];
            if v < best.1 {
                best = (j as u32, v);
            }
        }
        best
    }

    #[test]
    fn bucketed_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [1usize, 2] {
            for k in [1usize, 2, 7, 50, 300] {
                let sites: Vec<P2> = (0..k)
                    .map(|_| {
                        let a = rng.random::<f64>();
                        let b = if dim == 2 { rng.random::<f64>() } else { 0.0 };
                        [a, b]
                    })
                    .collect();
                let psi: Vec<f64> = (0..k).map(|_| 0.05 * rng.random::<f64>()).collect();
                let search = PowerSearch::new(dim, &sites, &psi);
                for _ in 0..500 {
                    let x = [rng.random::<f64>(), if dim == 2 { rng.random::<f64>() } else { 0.0 }];
                    assert_eq!(search.nearest(&x), brute(&sites, &psi, &x));
                }
            }
        }
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_of(&[0.9, 0.0], &[0.1, 0.0]), [1, 0]);
        assert_eq!(lift_of(&[0.1, 0.0], &[0.9, 0.0]), [-1, 0]);
        assert_eq!(lift_of(&[0.3, 0.6], &[0.2, 0.5]), [0, 0]);
    }
}
