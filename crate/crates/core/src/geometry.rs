//! Hyperrectangles, Euclidean projection, and normal/tangent cones.
//!
//! The constraint set is always a box `K = prod_i [a_i, b_i]` with `a_i < b_i`.
//! Its product structure makes every cone object per-coordinate: the normal
//! cone at a point is a sign cone determined by which faces the point touches,
//! and the tangent cone is its polar. Both are represented losslessly by a
//! [`FaceSignature`] (one tag per coordinate) instead of generator lists.

use serde::{Deserialize, Serialize};

use crate::vecmath::check_dim;
use crate::{Error, Result};

/// A compact hyperrectangle `prod_i [lower_i, upper_i]` with strict bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    /// Builds a box, requiring `lower.len() == upper.len() >= 1`, finite
    /// bounds, and `lower[i] < upper[i]` strictly for every coordinate.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("box must have dimension >= 1".into()));
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "box bounds must be finite (coordinate {i})"
                )));
            }
            if a >= b {
                return Err(Error::InvalidParameter(format!(
                    "box requires lower < upper strictly, got [{a}, {b}] at coordinate {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Convenience constructor for `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn max_width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }

    fn min_width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min)
    }

    /// Default face-classification tolerance, `1e-9 * max_i (b_i - a_i)`.
    /// Iterates produced by projection land exactly on face values, so the
    /// tolerance only matters for externally supplied points.
    pub fn default_face_tol(&self) -> f64 {
        1e-9 * self.max_width()
    }

    /// Exact membership test (closed box).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (a, b))| *a <= *xi && *xi <= *b)
    }

    /// Euclidean projection onto the box: the per-coordinate clamp.
    /// Idempotent and nonexpansive; errors on dimension mismatch.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(xi, (a, b))| xi.clamp(*a, *b))
            .collect())
    }

    /// Classifies each coordinate of `x` against the faces of the box with
    /// tolerance `tol`. Requires `x` to lie in the box up to `tol` and
    /// `tol < min_i (b_i - a_i) / 2`, so no coordinate can be at both faces.
    pub fn face_signature(&self, x: &[f64], tol: f64) -> Result<FaceSignature> {
        check_dim(self.dim(), x.len())?;
        if !(tol >= 0.0) || tol >= 0.5 * self.min_width() {
            return Err(Error::InvalidParameter(format!(
                "face tolerance {tol} must lie in [0, min_width / 2)"
            )));
        }
        let mut tags = Vec::with_capacity(x.len());
        for (i, (xi, (a, b))) in x.iter().zip(self.lower.iter().zip(&self.upper)).enumerate() {
            if *xi < a - tol || *xi > b + tol || !xi.is_finite() {
                return Err(Error::OutsideBox { coord: i });
            }
            let tag = if (xi - a).abs() <= tol {
                FaceTag::AtLower
            } else if (xi - b).abs() <= tol {
                FaceTag::AtUpper
            } else {
                FaceTag::Interior
            };
            tags.push(tag);
        }
        Ok(FaceSignature { tags })
    }

    /// Face signature with the default tolerance.
    pub fn face_signature_default(&self, x: &[f64]) -> Result<FaceSignature> {
        self.face_signature(x, self.default_face_tol())
    }

    /// Uniform sample from the box (used by construction-time soft checks).
    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| rng.random_range(*a..=*b))
            .collect()
    }

    /// All `2^dim` corners. Only sensible for small dimensions.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        assert!(d <= 24, "corner enumeration limited to dim <= 24");
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Which face (if any) a coordinate of a point touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceTag {
    AtLower,
    AtUpper,
    Interior,
}

/// Per-coordinate face classification of a point of the box. This is the
/// finite representation of the normal cone `N_K(x)` and tangent cone
/// `T_K(x)`: for boxes both factor across coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceSignature {
    tags: Vec<FaceTag>,
}

impl FaceSignature {
    pub fn from_tags(tags: Vec<FaceTag>) -> Self {
        Self { tags }
    }

    pub fn tags(&self) -> &[FaceTag] {
        &self.tags
    }

    pub fn dim(&self) -> usize {
        self.tags.len()
    }

    /// True when some coordinate touches a face.
    pub fn any_face(&self) -> bool {
        self.tags.iter().any(|t| *t != FaceTag::Interior)
    }
}

/// Membership of `v` in the (outer) normal cone encoded by `sig`:
/// per coordinate, interior forces `v_i == 0`, a lower face forces
/// `v_i <= 0`, an upper face forces `v_i >= 0`. Exact comparisons.
pub fn in_normal_cone(v: &[f64], sig: &FaceSignature) -> Result<bool> {
    check_dim(sig.dim(), v.len())?;
    Ok(v.iter().zip(sig.tags()).all(|(vi, tag)| match tag {
        FaceTag::Interior => *vi == 0.0,
        FaceTag::AtLower => *vi <= 0.0,
        FaceTag::AtUpper => *vi >= 0.0,
    }))
}

/// Euclidean projection of `v` onto the tangent cone encoded by `sig`:
/// per coordinate, a lower face keeps only the inward part `max(v_i, 0)`,
/// an upper face keeps `min(v_i, 0)`, interior coordinates pass through.
pub fn project_tangent(v: &[f64], sig: &FaceSignature) -> Result<Vec<f64>> {
    check_dim(sig.dim(), v.len())?;
    Ok(v.iter()
        .zip(sig.tags())
        .map(|(vi, tag)| match tag {
            FaceTag::Interior => *vi,
            FaceTag::AtLower => vi.max(0.0),
            FaceTag::AtUpper => vi.min(0.0),
        })
        .collect())
}

/// Distance from `0` to the set `{c} + [lo, hi] + (-N)`, where `N` is the
/// one-coordinate normal cone arm selected by `tag`:
/// `-N = {0}` (interior), `[0, inf)` (lower face), `(-inf, 0]` (upper face).
///
/// `lo <= hi` may be `-inf`/`+inf` (extended cone arms); the returned
/// distance is always finite and nonnegative. This is the per-coordinate
/// residual of the composite stationarity inclusion.
pub fn dist_to_normal_cone_shifted(c: f64, lo: f64, hi: f64, tag: FaceTag) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || c.is_nan() {
        return Err(Error::InvalidParameter("NaN endpoint".into()));
    }
    if lo > hi {
        return Err(Error::BadInterval { lo, hi });
    }
    let set_lo = c + lo;
    let set_hi = c + hi;
    let d = match tag {
        // dist(0, [set_lo, set_hi])
        FaceTag::Interior => {
            if set_lo > 0.0 {
                set_lo
            } else if set_hi < 0.0 {
                -set_hi
            } else {
                0.0
            }
        }
        // dist(0, [set_lo, inf))
        FaceTag::AtLower => set_lo.max(0.0),
        // dist(0, (-inf, set_hi])
        FaceTag::AtUpper => (-set_hi).max(0.0),
    };
    Ok(d)
}
