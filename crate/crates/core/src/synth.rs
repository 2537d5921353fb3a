//! Seeded synthetic charts.
//!
//! Flat matte patches seen by a camera under per-patch shading: clean source
//! rows `A₀`, a ground-truth map `M`, shading `s`, targets `B = A₀·M` and
//! observed sources `A = diag(s)·A₀`. Targets can then be perturbed with
//! proportional Gaussian noise and a fraction of rows replaced outright.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chart_io::PatchRecord;
use crate::colorimetry::{ColorTriple, WhitePoint};
use crate::error::{Error, Result};
use crate::homography::Homography3;
use crate::solvers::{CorrespondenceSet, ShadingDiagonal};

const SOURCE_RANGE: (f64, f64) = (0.05, 1.0);
const PERTURBATION: f64 = 0.3;
const MAX_CONDITION: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_patches: usize,
    pub seed: u64,
    pub shading_range: (f64, f64),
    /// Per-component standard deviation as a fraction of the target row norm.
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patches: 24,
            seed: 0,
            shading_range: (0.2, 1.0),
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.shading_range;
        if self.n_patches < 4 {
            return Err(Error::InvalidConfig("need at least 4 patches".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig("shading range must satisfy 0 < lo <= hi".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidConfig("outlier fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub config: SynthConfig,
    /// Observed (shaded) sources and measured targets.
    pub set: CorrespondenceSet,
    pub m_true: Matrix3<f64>,
    pub d_true: ShadingDiagonal,
    /// Sorted indices of replaced target rows.
    pub outlier_indices: Vec<usize>,
    /// Unshaded sources `A₀`.
    pub clean_source: Vec<ColorTriple>,
    /// Noise- and outlier-free targets `A₀·M`.
    pub clean_target: Vec<ColorTriple>,
}

impl SynthInstance {
    pub fn m_true_homography(&self) -> Homography3 {
        Homography3::new(self.m_true).expect("generated maps are well conditioned")
    }

    /// XYZ of a perfect reflector, `[1, 1, 1]·M`.
    pub fn white(&self) -> WhitePoint {
        WhitePoint::from_triple(ColorTriple::new(1.0, 1.0, 1.0).transform(&self.m_true))
            .expect("generated maps keep the unit cube positive")
    }

    /// Chart rows with a gray capture `dᵢ·[1, 1, 1]` at every patch.
    pub fn to_patch_records(&self) -> Vec<PatchRecord> {
        self.set
            .source()
            .iter()
            .zip(self.set.target())
            .zip(self.d_true.values())
            .enumerate()
            .map(|(i, ((a, b), d))| PatchRecord {
                patch_id: format!("P{:02}", i + 1),
                rgb: *a,
                xyz: Some(*b),
                gray_rgb: Some(ColorTriple::new(*d, *d, *d)),
                corrected: Vec::new(),
            })
            .collect()
    }

    /// Chart rows holding the clean targets only.
    pub fn to_reference_records(&self) -> Vec<PatchRecord> {
        self.clean_source
            .iter()
            .zip(&self.clean_target)
            .enumerate()
            .map(|(i, (a, b))| PatchRecord {
                patch_id: format!("P{:02}", i + 1),
                rgb: *a,
                xyz: Some(*b),
                gray_rgb: None,
                corrected: Vec::new(),
            })
            .collect()
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            config: self.config,
            m_true: rows_of(&self.m_true),
            d_true: self.d_true.values().to_vec(),
            outlier_indices: self.outlier_indices.clone(),
            white: self.white().as_triple().0,
        }
    }
}

/// Sidecar contents written next to a synthetic chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Row-major, row-vector convention.
    pub m_true: [[f64; 3]; 3],
    pub d_true: Vec<f64>,
    pub outlier_indices: Vec<usize>,
    pub white: [f64; 3],
}

impl GroundTruth {
    pub fn m_true(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m_true[i][j])
    }
}

fn rows_of(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    sv.max() / sv.min()
}

/// Every corner of the source cube must map to a strictly positive triple,
/// which keeps all clean targets positive.
fn keeps_cube_positive(m: &Matrix3<f64>) -> bool {
    let (lo, hi) = SOURCE_RANGE;
    (0..8).all(|corner| {
        let pick = |bit: usize| if corner & (1 << bit) != 0 { hi } else { lo };
        let t = ColorTriple::new(pick(0), pick(1), pick(2)).transform(m);
        t.0.iter().all(|c| *c > 0.0)
    })
}

fn draw_map(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    loop {
        let m = Matrix3::identity()
            + Matrix3::from_fn(|_, _| rng.random_range(-PERTURBATION..=PERTURBATION));
        if condition_number(&m) < MAX_CONDITION && keeps_cube_positive(&m) {
            return m;
        }
    }
}

fn draw_triple(rng: &mut ChaCha8Rng) -> ColorTriple {
    let (lo, hi) = SOURCE_RANGE;
    ColorTriple::new(
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
    )
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance> {
    cfg.validate()?;
    let n = cfg.n_patches;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let clean_source: Vec<ColorTriple> = (0..n).map(|_| draw_triple(&mut rng)).collect();
    let m_true = draw_map(&mut rng);
    let (lo, hi) = cfg.shading_range;
    let shading: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();

    let clean_target: Vec<ColorTriple> = clean_source.iter().map(|a| a.transform(&m_true)).collect();
    let source: Vec<ColorTriple> = clean_source
        .iter()
        .zip(&shading)
        .map(|(a, s)| a.scaled(*s))
        .collect();

    let mut target = clean_target.clone();
    if cfg.noise_sigma > 0.0 {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for b in target.iter_mut() {
            let sd = cfg.noise_sigma * b.to_row().norm();
            for c in b.0.iter_mut() {
                *c += sd * unit.sample(&mut rng);
            }
        }
    }

    let n_outliers = (cfg.outlier_fraction * n as f64).floor() as usize;
    let mut outlier_indices = rand::seq::index::sample(&mut rng, n, n_outliers).into_vec();
    outlier_indices.sort_unstable();
    for &i in &outlier_indices {
        let norm = target[i].to_row().norm();
        let u = draw_triple(&mut rng);
        target[i] = u.scaled(norm / u.to_row().norm());
    }

    Ok(SynthInstance {
        config: *cfg,
        set: CorrespondenceSet::new(source, target)?,
        m_true,
        d_true: ShadingDiagonal::new(shading)?,
        outlier_indices,
        clean_source,
        clean_target,
    })
}
