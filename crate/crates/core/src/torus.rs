//! Metric geometry of the flat torus `R^n / Z^n` for `n` in `{1, 2}`.
//!
//! Points are stored by their canonical representative in `[0, 1)^n`.
//! Displacements are always taken along the minimal lift, coordinate by
//! coordinate; at the cut locus (a coordinate offset of exactly `1/2`) the
//! positive lift is chosen so that gradients are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 2;

/// Reduces a real number to `[0, 1)`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    // v slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Minimal lift of a coordinate offset: the representative of `delta` modulo 1
/// in `(-1/2, 1/2]`.
#[inline]
pub fn min_lift(delta: f64) -> f64 {
    let r = delta - delta.round();
    if r <= -0.5 {
        r + 1.0
    } else if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl std::fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("TorusPoint").field(&self.coords()).finish()
    }
}

impl TorusPoint {
    /// Builds a point from arbitrary real coordinates, reducing them modulo 1.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(invalid(format!(
                "torus dimension must be 1 or 2, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("torus coordinates must be finite"));
        }
        let mut c = [0.0; MAX_DIM];
        for (dst, src) in c.iter_mut().zip(coords) {
            *dst = wrap_unit(*src);
        }
        Ok(Self {
            coords: c,
            dim: coords.len(),
        })
    }

    /// Infallible constructor for hot paths; the caller guarantees
    /// `dim` in `{1, 2}` and finite input.
    #[inline]
    pub(crate) fn from_raw(coords: [f64; MAX_DIM], dim: usize) -> Self {
        let mut c = [0.0; MAX_DIM];
        for i in 0..dim {
            c[i] = wrap_unit(coords[i]);
        }
        Self { coords: c, dim }
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(&vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub(crate) fn raw(&self) -> [f64; MAX_DIM] {
        self.coords
    }

    /// Minimal-lift displacement `self - other`, coordinatewise in `(-1/2, 1/2]`.
    #[inline]
    pub fn displacement_from(&self, other: &TorusPoint) -> [f64; MAX_DIM] {
        let mut d = [0.0; MAX_DIM];
        for (di, (a, b)) in d.iter_mut().zip(self.coords.iter().zip(&other.coords)).take(self.dim) {
            *di = min_lift(a - b);
        }
        d
    }

    #[inline]
    pub(crate) fn dist_sq_unchecked(&self, other: &TorusPoint) -> f64 {
        let d = self.displacement_from(other);
        d[..self.dim].iter().map(|v| v * v).sum()
    }
}

fn check_dims(x: &TorusPoint, y: &TorusPoint) -> Result<()> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch {
            expected: x.dim,
            found: y.dim,
        });
    }
    Ok(())
}

/// Geodesic distance `sqrt(sum_i min(|x_i - y_i|, 1 - |x_i - y_i|)^2)`.
pub fn torus_dist(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.dist_sq_unchecked(y).sqrt())
}

/// Squared geodesic distance.
pub fn torus_dist_sq(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.dist_sq_unchecked(y))
}

/// Gradient in `x` of `d^2(x, y)`, i.e. twice the minimal-lift displacement.
/// At the cut locus the positive lift is used, so the result has magnitude 1
/// in that coordinate.
pub fn torus_dist_sq_grad(x: &TorusPoint, y: &TorusPoint) -> Result<Vec<f64>> {
    check_dims(x, y)?;
    let d = x.displacement_from(y);
    Ok(d[..x.dim].iter().map(|v| 2.0 * v).collect())
}

/// Exponential map of the flat torus: `x + v mod 1`.
pub fn exp_map(x: &TorusPoint, v: &[f64]) -> Result<TorusPoint> {
    if v.len() != x.dim {
        return Err(Error::DimensionMismatch {
            expected: x.dim,
            found: v.len(),
        });
    }
    let mut c = x.coords;
    for i in 0..x.dim {
        c[i] += v[i];
    }
    Ok(TorusPoint::from_raw(c, x.dim))
}

/// The point at maximal distance: `z + (1/2, ..., 1/2)`.
pub fn antipode(z: &TorusPoint) -> TorusPoint {
    let mut c = z.coords;
    for v in c.iter_mut().take(z.dim) {
        *v += 0.5;
    }
    TorusPoint::from_raw(c, z.dim)
}

/// Translations `y -> y + t v`, `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryFamily {
    displacement: [f64; MAX_DIM],
    dim: usize,
    lipschitz: f64,
}

impl IsometryFamily {
    pub fn from_displacement(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(invalid("displacement must have dimension 1 or 2"));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(invalid("displacement must be finite"));
        }
        let mut d = [0.0; MAX_DIM];
        d[..v.len()].copy_from_slice(v);
        let lipschitz = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(Self {
            displacement: d,
            dim: v.len(),
            lipschitz,
        })
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lipschitz constant `L = |v|` of `t -> Phi_t(y)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Phi_t(y) = y + t v mod 1`.
    #[inline]
    pub fn apply(&self, y: &TorusPoint, t: f64) -> TorusPoint {
        debug_assert_eq!(y.dim, self.dim);
        let mut c = y.coords;
        for (ci, v) in c.iter_mut().zip(&self.displacement).take(self.dim) {
            *ci += t * v;
        }
        TorusPoint::from_raw(c, self.dim)
    }
}

/// The translation family carrying `x0` to `x1` along a minimal geodesic,
/// with `L = d(x0, x1)`.
pub fn translation_family(x0: &TorusPoint, x1: &TorusPoint) -> Result<IsometryFamily> {
    check_dims(x0, x1)?;
    let v = x1.displacement_from(x0);
    IsometryFamily::from_displacement(&v[..x0.dim])
}
