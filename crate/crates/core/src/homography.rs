//! Projective 3×3 maps between chromaticity planes.
//!
//! A [`Homography3`] acts on homogeneous row vectors `[p, q, 1]·H` and is
//! only defined up to a non-zero scale. Values are kept in a canonical form
//! (unit Frobenius norm, largest-magnitude entry positive) so that two
//! equivalent maps compare equal.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::colorimetry::{rgi_matrix, rgi_matrix_inverse, Chromaticity};
use crate::error::{Error, Result};

/// Below this magnitude a mapped homogeneous third component is treated as zero.
pub const INFINITY_TOLERANCE: f64 = 1e-12;

/// `|det| / ‖H‖_F³` below this is singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Relative size of the second-smallest singular value of the normalized
/// design matrix below which a point configuration is degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Invertible 3×3 map up to scale, stored in canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography3(Matrix3<f64>);

/// Scale-free singularity test shared by [`Homography3`] and the solvers.
pub fn is_singular(m: &Matrix3<f64>) -> bool {
    let norm = m.norm();
    if !norm.is_finite() || norm == 0.0 {
        return true;
    }
    let det = m.determinant();
    !det.is_finite() || det.abs() < SINGULAR_TOLERANCE * norm.powi(3)
}

fn canonical(m: &Matrix3<f64>) -> Matrix3<f64> {
    let mut out = m / m.norm();
    let mut pivot = 0.0_f64;
    for v in out.iter() {
        if v.abs() > pivot.abs() {
            pivot = *v;
        }
    }
    if pivot < 0.0 {
        out.neg_mut();
    }
    out
}

impl Homography3 {
    /// Normalizes `m`; fails if it is singular or non-finite.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if is_singular(&m) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self(canonical(&m)))
    }

    pub fn identity() -> Self {
        Self(canonical(&Matrix3::identity()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    /// Maps a chromaticity: lift to `[p, q, 1]`, right-multiply, dehomogenize.
    pub fn apply(&self, c: &Chromaticity) -> Result<Chromaticity> {
        apply_matrix(&self.0, c)
    }

    /// `self` followed by `next`, i.e. the row-convention product `self·next`.
    pub fn then(&self, next: &Homography3) -> Result<Homography3> {
        Homography3::new(self.0 * next.0)
    }

    pub fn inverse(&self) -> Result<Homography3> {
        let inv = self.0.try_inverse().ok_or(Error::SingularMatrix)?;
        Homography3::new(inv)
    }

    /// Largest absolute entry difference against another homography.
    pub fn max_abs_diff(&self, other: &Homography3) -> f64 {
        (self.0 - other.0).amax()
    }
}

/// [`Homography3::apply`] on an unnormalized matrix.
pub fn apply_matrix(m: &Matrix3<f64>, c: &Chromaticity) -> Result<Chromaticity> {
    let h = c.homogeneous() * m;
    if h[2].is_nan() || h[2].abs() < INFINITY_TOLERANCE {
        return Err(Error::PointAtInfinity);
    }
    Ok(Chromaticity::new(h[0] / h[2], h[1] / h[2]))
}

pub fn apply_homography(h: &Homography3, c: &Chromaticity) -> Result<Chromaticity> {
    h.apply(c)
}

/// Source/target chromaticity correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaPair {
    pub src: Chromaticity,
    pub dst: Chromaticity,
}

impl ChromaPair {
    pub fn new(src: Chromaticity, dst: Chromaticity) -> Self {
        Self { src, dst }
    }
}

/// Similarity taking the points to zero centroid and mean distance √2,
/// returned in column-vector form.
fn isotropic_normalizer(points: impl Iterator<Item = Chromaticity> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(x, y), c| (x + c.p, y + c.q));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|c| ((c.p - cx).powi(2) + (c.q - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !mean_dist.is_finite() || mean_dist <= 0.0 {
        return Err(Error::DegenerateConfiguration);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s, 0.0, -s * cx, //
        0.0, s, -s * cy, //
        0.0, 0.0, 1.0,
    ))
}

fn transform_col(t: &Matrix3<f64>, c: &Chromaticity) -> (f64, f64) {
    let v = t * Vector3::new(c.p, c.q, 1.0);
    (v[0] / v[2], v[1] / v[2])
}

/// Normalized direct linear transform.
///
/// Solves for `H` with `[dst, 1] ∝ [src, 1]·H` for every pair, minimizing
/// the algebraic error of the stacked 2n×9 system. Exact for four pairs in
/// general position.
pub fn solve_dlt(pairs: &[ChromaPair]) -> Result<Homography3> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: pairs.len(),
        });
    }
    if pairs.iter().any(|p| !p.src.is_finite() || !p.dst.is_finite()) {
        return Err(Error::DegenerateConfiguration);
    }

    let t_src = isotropic_normalizer(pairs.iter().map(|p| p.src))?;
    let t_dst = isotropic_normalizer(pairs.iter().map(|p| p.dst))?;

    // Column form: x' ∝ G x with G = Hᵀ. Pad to at least 9 rows so the full
    // right singular basis is available.
    let rows = (2 * pairs.len()).max(9);
    let mut design = DMatrix::<f64>::zeros(rows, 9);
    for (i, pair) in pairs.iter().enumerate() {
        let (x, y) = transform_col(&t_src, &pair.src);
        let (u, v) = transform_col(&t_dst, &pair.dst);
        let r0 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        let r1 = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u];
        for j in 0..9 {
            design[(2 * i, j)] = r0[j];
            design[(2 * i + 1, j)] = r1[j];
        }
    }

    let svd = design.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateConfiguration)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let largest = sv[order[0]];
    let second_smallest = sv[order[7]];
    if largest.is_nan() || largest <= 0.0 || second_smallest < DEGENERACY_TOLERANCE * largest {
        return Err(Error::DegenerateConfiguration);
    }
    let null = v_t.row(order[8]);
    let g_norm = Matrix3::new(
        null[0], null[1], null[2], //
        null[3], null[4], null[5], //
        null[6], null[7], null[8],
    );

    let t_dst_inv = t_dst.try_inverse().ok_or(Error::DegenerateConfiguration)?;
    let g = t_dst_inv * g_norm * t_src;
    Homography3::new(g.transpose()).map_err(|_| Error::DegenerateConfiguration)
}

/// Largest reprojection distance of `pairs` under `h`.
pub fn max_reprojection_error(h: &Homography3, pairs: &[ChromaPair]) -> f64 {
    pairs
        .iter()
        .map(|p| match h.apply(&p.src) {
            Ok(m) => ((m.p - p.dst.p).powi(2) + (m.q - p.dst.q).powi(2)).sqrt(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Chromaticity homography induced by a row-convention RGB map `m`.
///
/// With `ρ·C ∝ [r, g, 1]`, the map `ρ → ρ·m` moves homogeneous chromaticities
/// by `C⁻¹·m·C`.
pub fn rgb_map_to_chroma_homography(m: &Matrix3<f64>) -> Result<Homography3> {
    if is_singular(m) {
        return Err(Error::SingularMatrix);
    }
    Homography3::new(rgi_matrix_inverse() * m * rgi_matrix())
}

/// Inverse of [`rgb_map_to_chroma_homography`]: `C·h·C⁻¹`, normalized.
pub fn chroma_homography_to_rgb_map(h: &Homography3) -> Result<Homography3> {
    Homography3::new(rgi_matrix() * h.matrix() * rgi_matrix_inverse())
}
