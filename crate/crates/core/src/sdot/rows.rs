//! Cell masses that are exact along `x` and use the midpoint rule across
//! rows. On a horizontal line each power `|x - a|^2 + dy^2 - psi` differs from
//! `x^2` by an affine function of `x`, so the trace of the diagram on the line
//! is read off the lower envelope of lines. Masses are then piecewise linear
//! in the weights and the Hessian is exact.

use rayon::prelude::*;

use super::{Grid, P2};
use crate::torus::min_lift;

pub(crate) struct RowQuadrature {
    pub masses: Vec<f64>,
    /// `int min_j [d^2(x, z_j) - psi_j] dm(x)`.
    pub min_integral: f64,
    /// `(i, j, w)`: moving the boundary between cells `i` and `j`;
    /// `d m(cell_i) / d psi_j = -w` summed over entries.
    pub couplings: Vec<(u32, u32, f64)>,
}

const ROW_CHUNK: usize = 16;

struct Partial {
    masses: Vec<f64>,
    integral: f64,
    couplings: Vec<(u32, u32, f64)>,
}

pub(crate) fn row_quadrature(grid: Grid, sites: &[P2], psi: &[f64], couplings: bool) -> RowQuadrature {
    let k = sites.len();
    // lifted abscissae, sorted; ties go to the lower site index
    let mut lines: Vec<(f64, u32)> = Vec::with_capacity(3 * k);
    for (i, z) in sites.iter().enumerate() {
        for l in [-1.0, 0.0, 1.0] {
            lines.push((z[0] + l, i as u32));
        }
    }
    lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ny = grid.ny();
    let row_w = 1.0 / ny as f64;
    let starts: Vec<usize> = (0..ny).step_by(ROW_CHUNK).collect();
    let parts: Vec<Partial> = starts
        .par_iter()
        .map(|&start| {
            let mut p = Partial {
                masses: vec![0.0; k],
                integral: 0.0,
                couplings: Vec::new(),
            };
            let mut base = vec![0.0; k];
            let mut hull: Vec<(f64, f64, u32)> = Vec::with_capacity(lines.len());
            for r in start..(start + ROW_CHUNK).min(ny) {
                let y = if grid.dim == 2 { (r as f64 + 0.5) * row_w } else { 0.0 };
                for i in 0..k {
                    let dy = if grid.dim == 2 { min_lift(y - sites[i][1]) } else { 0.0 };
                    base[i] = dy * dy - psi[i];
                }
                envelope(&lines, &base, &mut hull);
                scan_row(&hull, row_w, couplings, &mut p);
            }
            p
        })
        .collect();
    let mut out = RowQuadrature {
        masses: vec![0.0; k],
        min_integral: 0.0,
        couplings: Vec::new(),
    };
    for p in parts {
        for (m, v) in out.masses.iter_mut().zip(&p.masses) {
            *m += v;
        }
        out.min_integral += p.integral;
        out.couplings.extend(p.couplings);
    }
    out
}

/// Lower envelope of `x -> -2 a x + a^2 + base_i` as `(a, c, site)` with
/// `c = a^2 + base_i`, in order of increasing `a` (left to right).
fn envelope(lines: &[(f64, u32)], base: &[f64], hull: &mut Vec<(f64, f64, u32)>) {
    hull.clear();
    for &(a, i) in lines {
        let c = a * a + base[i as usize];
        if let Some(&(ta, tc, _)) = hull.last() {
            if ta == a {
                if c < tc {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let (pa, pc, _) = hull[hull.len() - 2];
            let (ta, tc, _) = hull[hull.len() - 1];
            if crossing(pa, pc, a, c) <= crossing(pa, pc, ta, tc) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((a, c, i));
    }
}

/// Where the line with abscissa `q` takes over from the one with `p < q`.
#[inline]
fn crossing(pa: f64, pc: f64, qa: f64, qc: f64) -> f64 {
    (qc - pc) / (2.0 * (qa - pa))
}

fn scan_row(hull: &[(f64, f64, u32)], row_w: f64, couplings: bool, p: &mut Partial) {
    let mut left = f64::NEG_INFINITY;
    for m in 0..hull.len() {
        let (a, c, i) = hull[m];
        let right = if m + 1 < hull.len() {
            let (qa, qc, _) = hull[m + 1];
            crossing(a, c, qa, qc)
        } else {
            f64::INFINITY
        };
        let u = left.max(0.0);
        let v = right.min(1.0);
        if v > u {
            p.masses[i as usize] += (v - u) * row_w;
            let s = -2.0 * a;
            let int = (v * v * v - u * u * u) / 3.0 + 0.5 * s * (v * v - u * u) + c * (v - u);
            p.integral += int * row_w;
        }
        if couplings && right > 0.0 && right < 1.0 {
            let (qa, _, j) = hull[m + 1];
            if j != i {
                p.couplings.push((i.min(j), i.max(j), row_w / (2.0 * (qa - a))));
            }
        }
        left = right;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_antipodal_sites_on_the_circle() {
        let g = Grid { dim: 1, res: 16 };
        let q = row_quadrature(g, &[[0.0, 0.0], [0.5, 0.0]], &[0.0, 0.0], true);
        assert_abs_diff_eq!(q.masses[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.min_integral, 1.0 / 48.0, epsilon = 1e-15);
        // two boundaries, each moving at rate 1 / (2 * 1/2)
        let w: f64 = q.couplings.iter().map(|c| c.2).sum();
        assert_abs_diff_eq!(w, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn masses_are_linear_in_the_weight_gap() {
        let g = Grid { dim: 1, res: 16 };
        let sites = [[0.0, 0.0], [0.5, 0.0]];
        let a = row_quadrature(g, &sites, &[0.0, 0.0], true);
        let b = row_quadrature(g, &sites, &[0.01, 0.0], true);
        let w: f64 = a.couplings.iter().map(|c| c.2).sum();
        assert_abs_diff_eq!(b.masses[0] - a.masses[0], 0.01 * w, epsilon = 1e-12);
    }

    #[test]
    fn single_site_owns_everything() {
        let g = Grid { dim: 2, res: 32 };
        let q = row_quadrature(g, &[[0.3, 0.7]], &[0.0], true);
        assert_abs_diff_eq!(q.masses[0], 1.0, epsilon = 1e-12);
        assert!(q.couplings.is_empty());
        // int d^2 dm = 2/12, with the midpoint rule across rows
        assert_abs_diff_eq!(q.min_integral, 1.0 / 6.0, epsilon = 1e-3);
    }
}
