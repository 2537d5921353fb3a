//! Alternating least squares for `D·A·H ≈ B`.
//!
//! Each iteration fits a per-row scale `Dⁱ` with `H` fixed, then a 3×3 `Hⁱ`
//! with `D` fixed, and folds both into the working copy
//! `Aⁱ = Dⁱ·Aⁱ⁻¹·Hⁱ`. Both half-steps are exact least-squares minimizations,
//! so the residual `‖Aⁱ − B‖_F` never increases. The accumulated factors are
//! `D = ∏ Dⁱ` and `H = H¹·H²···Hᵏ`.

use nalgebra::{DMatrix, Matrix3};

use super::least_squares::{ensure_full_rank, least_squares_matrix};
use super::{apply_correction, from_dmatrix, to_dmatrix, CorrespondenceSet, FitResult, Method, ShadingDiagonal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    /// Stop once `‖Aⁱ − Aⁱ⁻¹‖_F` falls below this.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iters: 2000,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-row scalar fit `d_i = (a_i·b_i) / (a_i·a_i)`.
pub fn solve_diagonal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<ShadingDiagonal> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch("A and B must have equal shape".into()));
    }
    let d = a
        .row_iter()
        .zip(b.row_iter())
        .enumerate()
        .map(|(i, (ai, bi))| {
            let norm2 = ai.dot(&ai);
            if norm2 > 0.0 && norm2.is_finite() {
                Ok(ai.dot(&bi) / norm2)
            } else {
                Err(Error::DegenerateSample(format!("row {i} is zero")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShadingDiagonal::fitted(d))
}

fn scale_rows(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut row, k) in out.row_iter_mut().zip(d) {
        row *= *k;
    }
    out
}

pub fn solve_als(set: &CorrespondenceSet, cfg: &AlsConfig) -> Result<FitResult> {
    cfg.validate()?;
    let a = to_dmatrix(set.source());
    let b = to_dmatrix(set.target());
    ensure_full_rank(&a)?;

    let mut current = a;
    let mut shading = vec![1.0; set.len()];
    let mut h_acc = Matrix3::identity();
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let d = solve_diagonal(&current, &b)?;
        let shaded = scale_rows(&current, d.values());
        let h = least_squares_matrix(&shaded, &b)?;
        let next = to_dmatrix(&apply_correction(&h, &from_dmatrix(&shaded)));

        history.push((&next - &b).norm());
        let step = (&next - &current).norm();

        for (acc, di) in shading.iter_mut().zip(d.values()) {
            *acc *= di;
        }
        h_acc *= h;
        current = next;

        if step < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        method: Method::Als,
        matrix: h_acc,
        shading: Some(ShadingDiagonal::fitted(shading)),
        inliers: None,
        iterations: history.len(),
        residual_history: history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorimetry::ColorTriple;
    use crate::homography::Homography3;

    fn rows() -> Vec<ColorTriple> {
        vec![
            ColorTriple::new(0.2, 0.3, 0.4),
            ColorTriple::new(0.5, 0.1, 0.2),
            ColorTriple::new(0.3, 0.8, 0.1),
            ColorTriple::new(0.6, 0.6, 0.6),
            ColorTriple::new(0.9, 0.2, 0.7),
            ColorTriple::new(0.1, 0.5, 0.9),
        ]
    }

    fn truth() -> Matrix3<f64> {
        Matrix3::new(1.1, 0.2, -0.1, 0.15, 0.85, 0.05, -0.05, 0.1, 1.2)
    }

    #[test]
    fn diagonal_examples() {
        let a = to_dmatrix(&rows());
        assert!(solve_diagonal(&a, &(&a * 2.0)).unwrap().values().iter().all(|d| (d - 2.0).abs() < 1e-15));
        assert!(solve_diagonal(&a, &a).unwrap().values().iter().all(|d| (d - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_matches_scalar_regression() {
        let a = to_dmatrix(&rows());
        let b = to_dmatrix(&rows().iter().map(|r| r.transform(&truth())).collect::<Vec<_>>());
        let d = solve_diagonal(&a, &b).unwrap();
        for i in 0..a.nrows() {
            // minimize Σ_j (k a_ij − b_ij)² by golden-section search
            let f = |k: f64| (0..3).map(|j| (k * a[(i, j)] - b[(i, j)]).powi(2)).sum::<f64>();
            let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let x1 = hi - g * (hi - lo);
                let x2 = lo + g * (hi - lo);
                if f(x1) < f(x2) {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            assert!((d.values()[i] - 0.5 * (lo + hi)).abs() < 1e-7);
        }
    }

    #[test]
    fn diagonal_rejects_zero_row() {
        let mut a = to_dmatrix(&rows());
        a.row_mut(2).fill(0.0);
        assert!(matches!(solve_diagonal(&a, &a), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn fixed_point_when_source_equals_target() {
        let set = CorrespondenceSet::new(rows(), rows()).unwrap();
        let fit = solve_als(&set, &AlsConfig::default()).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert!((fit.matrix - Matrix3::identity()).amax() < 1e-12);
        assert!(fit.shading.unwrap().values().iter().all(|d| (d - 1.0).abs() < 1e-12));
    }

    #[test]
    fn recovers_shaded_map() {
        let shading = [0.2, 0.9, 0.5, 0.35, 1.0, 0.7];
        let a: Vec<_> = rows().iter().zip(shading).map(|(r, s)| r.scaled(s)).collect();
        let b: Vec<_> = rows().iter().map(|r| r.transform(&truth())).collect();
        let fit = solve_als(&CorrespondenceSet::new(a.clone(), b.clone()).unwrap(), &AlsConfig::default()).unwrap();
        assert!(fit.converged, "{:?}", fit.residual_history);
        assert!(*fit.residual_history.last().unwrap() < 1e-8);
        let h = fit.homography().unwrap();
        assert!(h.max_abs_diff(&Homography3::new(truth()).unwrap()) < 1e-6);
        for w in fit.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        // D·A·H reproduces the last residual
        let d = fit.shading.unwrap();
        let rebuilt = to_dmatrix(&apply_correction(&fit.matrix, &from_dmatrix(&scale_rows(&to_dmatrix(&a), d.values()))));
        let r = (rebuilt - to_dmatrix(&b)).norm();
        assert!((r - fit.residual_history.last().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn unshaded_data_recovers_map() {
        let b: Vec<_> = rows().iter().map(|r| r.transform(&truth())).collect();
        let fit = solve_als(&CorrespondenceSet::new(rows(), b).unwrap(), &AlsConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.homography().unwrap().max_abs_diff(&Homography3::new(truth()).unwrap()) < 1e-8);
        // accumulated D is a multiple of the identity
        let d = fit.shading.unwrap();
        let d0 = d.values()[0];
        assert!(d.values().iter().all(|v| (v / d0 - 1.0).abs() < 1e-8));
    }

    #[test]
    fn stops_at_iteration_cap() {
        let shading = [0.2, 0.9, 0.5, 0.35, 1.0, 0.7];
        let a: Vec<_> = rows().iter().zip(shading).map(|(r, s)| r.scaled(s)).collect();
        let b: Vec<_> = rows().iter().map(|r| r.transform(&truth())).collect();
        let cfg = AlsConfig { epsilon: 1e-10, max_iters: 3 };
        let fit = solve_als(&CorrespondenceSet::new(a, b).unwrap(), &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
    }

    #[test]
    fn rejects_bad_config() {
        let set = CorrespondenceSet::new(rows(), rows()).unwrap();
        assert!(solve_als(&set, &AlsConfig { epsilon: 0.0, max_iters: 5 }).is_err());
        assert!(solve_als(&set, &AlsConfig { epsilon: 1e-8, max_iters: 0 }).is_err());
    }
}
