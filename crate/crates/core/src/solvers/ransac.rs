//! Random-sample consensus over chromaticity homographies.
//!
//! Each trial draws four correspondences, fits the rg → xy homography
//! exactly, and scores every row by its ΔE\*uv once the mapped chromaticity
//! has been brought to the reference luminance. Trial `t` draws from its own
//! ChaCha stream `(seed, t)`, so the outcome does not depend on evaluation
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorrespondenceSet, FitResult, Method};
use crate::colorimetry::{
    delta_e, luminance_align, to_chromaticity, xyz_to_luv, ColorTriple, LuvColor, WhitePoint,
};
use crate::error::{Error, Result};
use crate::homography::{chroma_homography_to_rgb_map, solve_dlt, ChromaPair, Homography3};

const SAMPLE_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Inlier cut-off in ΔE\*uv.
    pub inlier_threshold: f64,
    pub max_trials: usize,
    /// Stop as soon as a consensus covers this fraction of rows.
    pub min_consensus_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 2.0,
            max_trials: 2000,
            min_consensus_fraction: 0.8,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.inlier_threshold.is_finite() || self.inlier_threshold <= 0.0 {
            return Err(Error::InvalidConfig("inlier threshold must be positive".into()));
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig("max_trials must be at least 1".into()));
        }
        if !(self.min_consensus_fraction > 0.0 && self.min_consensus_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "min consensus fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// ΔE\*uv between `b` and the image of `a` under `h_chroma`, after the
/// mapped xy chromaticity is lifted to `[x, y, 1−x−y]` and rescaled to
/// `b`'s luminance. Unmappable inputs score `+∞`.
pub fn ransac_residual(h_chroma: &Homography3, a: &ColorTriple, b: &ColorTriple, white: &WhitePoint) -> f64 {
    match xyz_to_luv(b, white) {
        Ok(target) => residual_against(h_chroma, a, b, &target, white),
        Err(_) => f64::INFINITY,
    }
}

fn residual_against(
    h_chroma: &Homography3,
    a: &ColorTriple,
    b: &ColorTriple,
    target: &LuvColor,
    white: &WhitePoint,
) -> f64 {
    let score = || -> Result<f64> {
        let mapped = h_chroma.apply(&to_chromaticity(a)?)?;
        let fitted = luminance_align(&mapped.to_ray(), b)?;
        Ok(delta_e(&xyz_to_luv(&fitted, white)?, target))
    };
    match score() {
        Ok(r) if r.is_finite() => r,
        _ => f64::INFINITY,
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Mean residuals (ΔE*uv) closer than this are tied and fall back to trial order.
const RESIDUAL_TIE: f64 = 1e-6;

struct Consensus {
    trial: usize,
    model: Homography3,
    inliers: Vec<usize>,
    mean_residual: f64,
}

impl Consensus {
    /// Larger consensus wins, then lower mean residual, then earlier trial.
    fn beats(&self, other: &Consensus) -> bool {
        match self.inliers.len().cmp(&other.inliers.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                let diff = self.mean_residual - other.mean_residual;
                if diff.abs() <= RESIDUAL_TIE {
                    self.trial < other.trial
                } else {
                    diff < 0.0
                }
            }
        }
    }
}

fn score(
    set: &CorrespondenceSet,
    targets: &[LuvColor],
    model: Homography3,
    trial: usize,
    threshold: f64,
    white: &WhitePoint,
) -> Consensus {
    let mut inliers = Vec::new();
    let mut total = 0.0;
    let rows = set.source().iter().zip(set.target()).zip(targets);
    for (i, ((a, b), t)) in rows.enumerate() {
        let r = residual_against(&model, a, b, t, white);
        if r < threshold {
            inliers.push(i);
            total += r;
        }
    }
    let mean_residual = if inliers.is_empty() {
        f64::INFINITY
    } else {
        total / inliers.len() as f64
    };
    Consensus {
        trial,
        model,
        inliers,
        mean_residual,
    }
}

/// Chromaticity pairs for the given rows; `None` if any target row has no
/// chromaticity.
fn chroma_pairs(set: &CorrespondenceSet, rows: &[usize]) -> Option<Vec<ChromaPair>> {
    rows.iter()
        .map(|&i| {
            let src = to_chromaticity(&set.source()[i]).ok()?;
            let dst = to_chromaticity(&set.target()[i]).ok()?;
            Some(ChromaPair::new(src, dst))
        })
        .collect()
}

pub fn solve_ransac(set: &CorrespondenceSet, cfg: &RansacConfig, white: &WhitePoint) -> Result<FitResult> {
    cfg.validate()?;
    white.validate()?;
    let n = set.len();
    if n < SAMPLE_SIZE {
        return Err(Error::InsufficientPoints {
            needed: SAMPLE_SIZE,
            got: n,
        });
    }

    let targets = set
        .target()
        .iter()
        .map(|b| xyz_to_luv(b, white))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<Consensus> = None;
    let mut trials = 0;
    for trial in 0..cfg.max_trials {
        trials = trial + 1;
        let mut rng = trial_rng(cfg.seed, trial);
        let mut sample = rand::seq::index::sample(&mut rng, n, SAMPLE_SIZE).into_vec();
        sample.sort_unstable();

        let Some(pairs) = chroma_pairs(set, &sample) else {
            continue;
        };
        let model = match solve_dlt(&pairs) {
            Ok(h) => h,
            Err(Error::DegenerateConfiguration) => continue,
            Err(e) => return Err(e),
        };

        let candidate = score(set, &targets, model, trial, cfg.inlier_threshold, white);
        let done = candidate.inliers.len() as f64 / n as f64 >= cfg.min_consensus_fraction;
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
        if done {
            break;
        }
    }

    let best = best.ok_or(Error::NoValidSample)?;
    let refit = chroma_pairs(set, &best.inliers)
        .filter(|p| p.len() >= SAMPLE_SIZE)
        .and_then(|p| solve_dlt(&p).ok())
        .unwrap_or(best.model);
    let rgb = chroma_homography_to_rgb_map(&refit)?;

    Ok(FitResult {
        method: Method::Ransac,
        matrix: rgb.into_matrix(),
        shading: None,
        inliers: Some(best.inliers),
        residual_history: Vec::new(),
        iterations: trials,
        converged: true,
    })
}
