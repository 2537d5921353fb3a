//! RGB → XYZ correction solvers.
//!
//! All three solvers take a [`CorrespondenceSet`] of camera RGB rows `A` and
//! reference XYZ rows `B` and return a row-convention 3×3 matrix `H` with
//! `A·H ≈ B` (least squares) or `D·A·H ≈ B` for an unknown positive
//! diagonal shading `D` (alternating least squares and RANSAC).

mod als;
mod least_squares;
mod ransac;

pub use als::{solve_als, solve_diagonal, AlsConfig};
pub use least_squares::{least_squares_matrix, solve_least_squares};
pub use ransac::{ransac_residual, solve_ransac, RansacConfig};

use nalgebra::{DMatrix, Matrix3};

use crate::colorimetry::ColorTriple;
use crate::error::{Error, Result};
use crate::homography::Homography3;

/// Paired source (camera RGB) and target (XYZ) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    source: Vec<ColorTriple>,
    target: Vec<ColorTriple>,
}

impl CorrespondenceSet {
    /// Validates equal lengths, finiteness and positive source sums.
    pub fn new(source: Vec<ColorTriple>, target: Vec<ColorTriple>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} source rows vs {} target rows",
                source.len(),
                target.len()
            )));
        }
        if source.len() < 4 {
            return Err(Error::InsufficientPoints {
                needed: 4,
                got: source.len(),
            });
        }
        for (i, (a, b)) in source.iter().zip(target.iter()).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::DegenerateSample(format!("row {i} is not finite")));
            }
            if a.sum() <= 0.0 {
                return Err(Error::DegenerateSample(format!(
                    "source row {i} has non-positive sum"
                )));
            }
        }
        Ok(Self { source, target })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &[ColorTriple] {
        &self.source
    }

    pub fn target(&self) -> &[ColorTriple] {
        &self.target
    }

    /// Copy with every source row multiplied by its own factor.
    pub fn with_source_scaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.len() {
            return Err(Error::ShapeMismatch("one factor per row".into()));
        }
        let source = self
            .source
            .iter()
            .zip(factors)
            .map(|(a, k)| a.scaled(*k))
            .collect();
        Self::new(source, self.target.clone())
    }
}

/// Diagonal of a per-row shading matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadingDiagonal(Vec<f64>);

impl ShadingDiagonal {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig(
                "shading factors must be positive and finite".into(),
            ));
        }
        Ok(Self(d))
    }

    /// Fitted factors; a corrupted row can fit to a non-positive value.
    pub(crate) fn fitted(d: Vec<f64>) -> Self {
        Self(d)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LeastSquares,
    Als,
    Ransac,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::LeastSquares => "ls",
            Method::Als => "als",
            Method::Ransac => "ransac",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ls" => Some(Method::LeastSquares),
            "als" => Some(Method::Als),
            "ransac" => Some(Method::Ransac),
            _ => None,
        }
    }
}

/// Output of any solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: Method,
    /// Row-convention RGB → XYZ map. Carries an absolute scale for least
    /// squares and ALS; unit Frobenius norm for RANSAC.
    pub matrix: Matrix3<f64>,
    /// Accumulated shading (ALS only).
    pub shading: Option<ShadingDiagonal>,
    /// Consensus indices, ascending (RANSAC only).
    pub inliers: Option<Vec<usize>>,
    /// Per-iteration Frobenius residual (ALS only).
    pub residual_history: Vec<f64>,
    /// ALS iterations or RANSAC trials actually run.
    pub iterations: usize,
    /// False when ALS stopped at its iteration cap.
    pub converged: bool,
}

impl FitResult {
    /// Canonical projective representative of the fitted matrix.
    pub fn homography(&self) -> Result<Homography3> {
        Homography3::new(self.matrix)
    }
}

pub(crate) fn to_dmatrix(rows: &[ColorTriple]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].0[j])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Vec<ColorTriple> {
    (0..m.nrows())
        .map(|i| ColorTriple::new(m[(i, 0)], m[(i, 1)], m[(i, 2)]))
        .collect()
}

/// Row-wise `ρ·H`. Negative outputs are kept.
pub fn apply_correction(matrix: &Matrix3<f64>, rgbs: &[ColorTriple]) -> Vec<ColorTriple> {
    rgbs.iter().map(|r| r.transform(matrix)).collect()
}

/// Global exposure factor `k` for which `k·ρ·H` best matches the target
/// luminance: the median of per-row ratios `Y_target / Y_pred` over rows
/// where both are positive. Returns `None` when no row qualifies.
pub fn exposure_scale(matrix: &Matrix3<f64>, rgbs: &[ColorTriple], xyz: &[ColorTriple]) -> Option<f64> {
    let mut ratios: Vec<f64> = rgbs
        .iter()
        .zip(xyz)
        .filter_map(|(r, b)| {
            let pred = r.transform(matrix).luminance();
            let y = b.luminance();
            (pred > 0.0 && y > 0.0 && pred.is_finite() && y.is_finite()).then(|| y / pred)
        })
        .collect();
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    Some(if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ColorTriple> {
        vec![
            ColorTriple::new(0.2, 0.3, 0.4),
            ColorTriple::new(0.5, 0.1, 0.2),
            ColorTriple::new(0.3, 0.8, 0.1),
            ColorTriple::new(0.6, 0.6, 0.6),
        ]
    }

    #[test]
    fn correspondence_set_validation() {
        assert!(matches!(
            CorrespondenceSet::new(rows(), rows()[..3].to_vec()),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            CorrespondenceSet::new(rows()[..3].to_vec(), rows()[..3].to_vec()),
            Err(Error::InsufficientPoints { .. })
        ));
        let mut bad = rows();
        bad[1] = ColorTriple::new(-1.0, 0.2, 0.1);
        assert!(matches!(
            CorrespondenceSet::new(bad, rows()),
            Err(Error::DegenerateSample(_))
        ));
        let mut nan = rows();
        nan[2].0[1] = f64::NAN;
        assert!(CorrespondenceSet::new(rows(), nan).is_err());
    }

    #[test]
    fn shading_diagonal_validation() {
        assert!(ShadingDiagonal::new(vec![1.0, 0.5]).is_ok());
        assert!(ShadingDiagonal::new(vec![1.0, 0.0]).is_err());
        assert!(ShadingDiagonal::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn apply_correction_examples() {
        let input = rows();
        assert_eq!(apply_correction(&Matrix3::identity(), &input), input);
        let out = apply_correction(&crate::colorimetry::rgi_matrix(), &[ColorTriple::new(1.0, 2.0, 3.0)]);
        assert_eq!(out[0].0, [1.0, 2.0, 6.0]);
        let m = Matrix3::new(0.5, -0.2, 0.1, 0.3, 1.2, -0.4, 0.0, 0.7, 2.0);
        let rho = [0.3, 0.9, 0.4];
        let expected: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| rho[i] * m[(i, j)]).sum())
            .collect();
        let got = apply_correction(&m, &[ColorTriple(rho)])[0];
        for (g, e) in got.0.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-15);
        }
        let flip = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 1.0));
        assert_eq!(apply_correction(&flip, &[ColorTriple::new(1.0, 1.0, 1.0)])[0].0, [-1.0, 1.0, 1.0]);
    }

    #[test]
    fn exposure_scale_is_median_ratio() {
        let a = rows();
        let b: Vec<_> = a.iter().map(|r| r.scaled(3.0)).collect();
        assert!((exposure_scale(&Matrix3::identity(), &a, &b).unwrap() - 3.0).abs() < 1e-14);
        let mut corrupted = b.clone();
        corrupted[0] = corrupted[0].scaled(100.0);
        // median of [3, 3, 3, 300] = 3
        assert!((exposure_scale(&Matrix3::identity(), &a, &corrupted).unwrap() - 3.0).abs() < 1e-14);
        assert!(exposure_scale(&Matrix3::identity(), &a, &[ColorTriple::new(0.0, 0.0, 0.0); 4]).is_none());
    }
}
