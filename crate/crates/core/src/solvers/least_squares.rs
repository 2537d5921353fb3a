use nalgebra::{DMatrix, Matrix3};

use super::{to_dmatrix, CorrespondenceSet, FitResult, Method};
use crate::error::{Error, Result};

/// Ratio of smallest to largest singular value of the source matrix below
/// which it is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// Fails with `RankDeficient` unless the n×3 matrix has rank 3.
pub(crate) fn ensure_full_rank(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() < 3 {
        return Err(Error::RankDeficient);
    }
    let sv = a.singular_values();
    let max = sv.max();
    if max > 0.0 && sv.min() > RANK_TOLERANCE * max {
        Ok(())
    } else {
        Err(Error::RankDeficient)
    }
}

/// `argmin_H ‖a·H − b‖_F` for n×3 `a` and `b`, via SVD.
pub fn least_squares_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Matrix3<f64>> {
    if a.ncols() != 3 || b.ncols() != 3 || a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "expected n×3 operands, got {}×{} and {}×{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_full_rank(a)?;
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(Matrix3::from_fn(|i, j| x[(i, j)]))
}

/// Plain least-squares fit `A·H ≈ B`, with no shading model.
pub fn solve_least_squares(set: &CorrespondenceSet) -> Result<FitResult> {
    let matrix = least_squares_matrix(&to_dmatrix(set.source()), &to_dmatrix(set.target()))?;
    Ok(FitResult {
        method: Method::LeastSquares,
        matrix,
        shading: None,
        inliers: None,
        residual_history: Vec::new(),
        iterations: 1,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorimetry::ColorTriple;

    fn rows() -> Vec<ColorTriple> {
        vec![
            ColorTriple::new(0.2, 0.3, 0.4),
            ColorTriple::new(0.5, 0.1, 0.2),
            ColorTriple::new(0.3, 0.8, 0.1),
            ColorTriple::new(0.6, 0.6, 0.6),
            ColorTriple::new(0.9, 0.2, 0.7),
        ]
    }

    #[test]
    fn identity_when_target_equals_source() {
        let set = CorrespondenceSet::new(rows(), rows()).unwrap();
        let fit = solve_least_squares(&set).unwrap();
        assert!((fit.matrix - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn recovers_exact_linear_map() {
        let m = Matrix3::new(0.41, 0.21, 0.02, 0.36, 0.72, 0.12, 0.18, 0.07, 0.95);
        let b: Vec<_> = rows().iter().map(|r| r.transform(&m)).collect();
        let fit = solve_least_squares(&CorrespondenceSet::new(rows(), b).unwrap()).unwrap();
        assert!((fit.matrix - m).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_source() {
        // all rows share one chromaticity
        let a: Vec<_> = (1..=5).map(|k| ColorTriple::new(0.1, 0.2, 0.3).scaled(k as f64)).collect();
        let set = CorrespondenceSet::new(a.clone(), a).unwrap();
        assert!(matches!(solve_least_squares(&set), Err(Error::RankDeficient)));
    }
}
