//! Color representations: linear triples, rg/xy chromaticities, CIE 1976
//! L\*a\*b\* and L\*u\*v\*, and ΔE\*76 distances.
//!
//! Every matrix in this crate acts on row vectors: a triple `ρ` maps to
//! `ρ·M`.

use nalgebra::{Matrix3, RowVector3};

use crate::error::{Error, Result};

/// Linear-light 3-vector: camera RGB or CIE XYZ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTriple(pub [f64; 3]);

impl ColorTriple {
    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self([c0, c1, c2])
    }

    pub fn c0(&self) -> f64 {
        self.0[0]
    }

    pub fn c1(&self) -> f64 {
        self.0[1]
    }

    pub fn c2(&self) -> f64 {
        self.0[2]
    }

    /// Second component, the CIE Y of an XYZ triple.
    pub fn luminance(&self) -> f64 {
        self.0[1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(self.0.map(|c| c * k))
    }

    /// Componentwise `max(c, 0)`.
    pub fn clamped_non_negative(&self) -> Self {
        Self(self.0.map(|c| c.max(0.0)))
    }

    pub fn to_row(&self) -> RowVector3<f64> {
        RowVector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn from_row(row: &RowVector3<f64>) -> Self {
        Self([row[0], row[1], row[2]])
    }

    /// Row-vector product `self · m`.
    pub fn transform(&self, m: &Matrix3<f64>) -> Self {
        Self::from_row(&(self.to_row() * m))
    }
}

impl From<[f64; 3]> for ColorTriple {
    fn from(c: [f64; 3]) -> Self {
        Self(c)
    }
}

/// Brightness-free 2-D color coordinate (rg for RGB, xy for XYZ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chromaticity {
    pub p: f64,
    pub q: f64,
}

impl Chromaticity {
    pub const fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    /// Homogeneous lift `[p, q, 1]`.
    pub fn homogeneous(&self) -> RowVector3<f64> {
        RowVector3::new(self.p, self.q, 1.0)
    }

    /// The triple `[p, q, 1 - p - q]`, whose components sum to one.
    pub fn to_ray(&self) -> ColorTriple {
        ColorTriple::new(self.p, self.q, 1.0 - self.p - self.q)
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }
}

/// Reference white for the CIE formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitePoint {
    xn: f64,
    yn: f64,
    zn: f64,
}

impl WhitePoint {
    /// CIE D65, 2° observer, Yn = 100.
    pub const D65: WhitePoint = WhitePoint {
        xn: 95.047,
        yn: 100.0,
        zn: 108.883,
    };

    pub fn new(xn: f64, yn: f64, zn: f64) -> Result<Self> {
        let w = Self { xn, yn, zn };
        w.validate()?;
        Ok(w)
    }

    /// Uses a measured white (for instance a chart's white patch) as reference.
    pub fn from_triple(t: ColorTriple) -> Result<Self> {
        Self::new(t.c0(), t.c1(), t.c2())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.xn, self.yn, self.zn]
            .iter()
            .all(|c| c.is_finite() && *c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWhitePoint)
        }
    }

    pub fn as_triple(&self) -> ColorTriple {
        ColorTriple::new(self.xn, self.yn, self.zn)
    }
}

impl Default for WhitePoint {
    fn default() -> Self {
        Self::D65
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuvColor {
    pub l: f64,
    pub u: f64,
    pub v: f64,
}

/// Perceptual space used for ΔE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Lab,
    Luv,
}

impl ColorSpace {
    pub fn tag(&self) -> &'static str {
        match self {
            ColorSpace::Lab => "lab",
            ColorSpace::Luv => "luv",
        }
    }
}

/// Row-convention RGB → RGI matrix: `[R, G, B]·C = [R, G, R+G+B]`.
pub fn rgi_matrix() -> Matrix3<f64> {
    Matrix3::new(
        1.0, 0.0, 1.0, //
        0.0, 1.0, 1.0, //
        0.0, 0.0, 1.0,
    )
}

/// Inverse of [`rgi_matrix`], in closed form.
pub fn rgi_matrix_inverse() -> Matrix3<f64> {
    Matrix3::new(
        1.0, 0.0, -1.0, //
        0.0, 1.0, -1.0, //
        0.0, 0.0, 1.0,
    )
}

pub fn to_chromaticity(t: &ColorTriple) -> Result<Chromaticity> {
    let sum = t.sum();
    if !t.is_finite() || !sum.is_finite() || sum <= 0.0 {
        return Err(Error::DegenerateSample(format!(
            "triple {:?} has no chromaticity",
            t.0
        )));
    }
    Ok(Chromaticity::new(t.c0() / sum, t.c1() / sum))
}

const EPSILON_LAB: f64 = 216.0 / 24389.0; // (6/29)^3

fn lab_f(t: f64) -> f64 {
    if t > EPSILON_LAB {
        t.cbrt()
    } else {
        // 1/(3·(6/29)²) = 841/108
        t * 841.0 / 108.0 + 4.0 / 29.0
    }
}

fn lightness(y_rel: f64) -> f64 {
    116.0 * lab_f(y_rel) - 16.0
}

/// CIE 1976 L\*a\*b\*. Negative components are clamped to zero first.
pub fn xyz_to_lab(t: &ColorTriple, white: &WhitePoint) -> Result<LabColor> {
    white.validate()?;
    let t = t.clamped_non_negative();
    let fx = lab_f(t.c0() / white.xn);
    let fy = lab_f(t.c1() / white.yn);
    let fz = lab_f(t.c2() / white.zn);
    Ok(LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    })
}

fn uv_prime(t: &ColorTriple) -> Option<(f64, f64)> {
    let denom = t.c0() + 15.0 * t.c1() + 3.0 * t.c2();
    if denom > 0.0 {
        Some((4.0 * t.c0() / denom, 9.0 * t.c1() / denom))
    } else {
        None
    }
}

/// CIE 1976 L\*u\*v\*. Negative components are clamped to zero first; black
/// maps to the origin.
pub fn xyz_to_luv(t: &ColorTriple, white: &WhitePoint) -> Result<LuvColor> {
    white.validate()?;
    let t = t.clamped_non_negative();
    let l = lightness(t.c1() / white.yn);
    let (un, vn) = uv_prime(&white.as_triple()).ok_or(Error::InvalidWhitePoint)?;
    let (u, v) = match uv_prime(&t) {
        Some((up, vp)) => (13.0 * l * (up - un), 13.0 * l * (vp - vn)),
        None => (0.0, 0.0),
    };
    Ok(LuvColor { l, u, v })
}

/// A color in either 1976 space; ΔE is defined between two values of the
/// same kind.
pub trait Cie76: Copy {
    fn coords(&self) -> [f64; 3];
}

impl Cie76 for LabColor {
    fn coords(&self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }
}

impl Cie76 for LuvColor {
    fn coords(&self) -> [f64; 3] {
        [self.l, self.u, self.v]
    }
}

/// ΔE\*76: Euclidean distance.
pub fn delta_e<C: Cie76>(x: &C, y: &C) -> f64 {
    let (x, y) = (x.coords(), y.coords());
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// ΔE between two XYZ triples in the chosen space.
pub fn delta_e_xyz(
    x: &ColorTriple,
    y: &ColorTriple,
    white: &WhitePoint,
    space: ColorSpace,
) -> Result<f64> {
    Ok(match space {
        ColorSpace::Lab => delta_e(&xyz_to_lab(x, white)?, &xyz_to_lab(y, white)?),
        ColorSpace::Luv => delta_e(&xyz_to_luv(x, white)?, &xyz_to_luv(y, white)?),
    })
}

/// Rescales `candidate` so its Y equals `reference`'s Y.
pub fn luminance_align(candidate: &ColorTriple, reference: &ColorTriple) -> Result<ColorTriple> {
    let y = candidate.luminance();
    if !y.is_finite() || y <= 0.0 {
        return Err(Error::DegenerateSample(format!(
            "candidate luminance {y} is not positive"
        )));
    }
    Ok(candidate.scaled(reference.luminance() / y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rgi_maps_to_red_green_intensity() {
        let c = ColorTriple::new(1.0, 2.0, 3.0).transform(&rgi_matrix());
        assert_eq!(c.0, [1.0, 2.0, 6.0]);
        let z = ColorTriple::new(0.0, 0.0, 0.0).transform(&rgi_matrix());
        assert_eq!(z.0, [0.0, 0.0, 0.0]);
        assert_eq!(rgi_matrix() * rgi_matrix_inverse(), Matrix3::identity());
        assert_eq!(rgi_matrix().try_inverse().unwrap(), rgi_matrix_inverse());
    }

    #[test]
    fn chromaticity_examples() {
        let c = to_chromaticity(&ColorTriple::new(1.0, 1.0, 1.0)).unwrap();
        assert!(close(c.p, 1.0 / 3.0, 1e-15) && close(c.q, 1.0 / 3.0, 1e-15));
        let c2 = to_chromaticity(&ColorTriple::new(2.0, 2.0, 2.0)).unwrap();
        assert_eq!(c, c2);
        let c3 = to_chromaticity(&ColorTriple::new(1.0, 2.0, 3.0)).unwrap();
        assert!(close(c3.p, 1.0 / 6.0, 1e-15) && close(c3.q, 2.0 / 6.0, 1e-15));
    }

    #[test]
    fn chromaticity_rejects_degenerate() {
        for t in [
            ColorTriple::new(0.0, 0.0, 0.0),
            ColorTriple::new(-1.0, 0.5, 0.2),
            ColorTriple::new(f64::NAN, 1.0, 1.0),
            ColorTriple::new(f64::INFINITY, 1.0, 1.0),
        ] {
            assert!(matches!(to_chromaticity(&t), Err(Error::DegenerateSample(_))));
        }
    }

    #[test]
    fn lab_white_black_and_mid_gray() {
        let w = WhitePoint::D65;
        let white = xyz_to_lab(&w.as_triple(), &w).unwrap();
        assert!(close(white.l, 100.0, 1e-12) && close(white.a, 0.0, 1e-12) && close(white.b, 0.0, 1e-12));

        let black = xyz_to_lab(&ColorTriple::new(0.0, 0.0, 0.0), &w).unwrap();
        assert!(close(black.l, 0.0, 1e-12) && close(black.a, 0.0, 1e-12) && close(black.b, 0.0, 1e-12));

        // 116·0.5^(1/3) − 16
        let gray = xyz_to_lab(&w.as_triple().scaled(0.5), &w).unwrap();
        assert!(close(gray.l, 76.069_261_01, 1e-6), "{}", gray.l);
        assert!(close(gray.a, 0.0, 1e-12) && close(gray.b, 0.0, 1e-12));
    }

    #[test]
    fn lab_linear_segment_is_continuous() {
        let w = WhitePoint::D65;
        let y = EPSILON_LAB * 100.0;
        let lo = xyz_to_lab(&ColorTriple::new(0.0, y * (1.0 - 1e-12), 0.0), &w).unwrap();
        let hi = xyz_to_lab(&ColorTriple::new(0.0, y * (1.0 + 1e-12), 0.0), &w).unwrap();
        assert!(close(lo.l, hi.l, 1e-8));
        assert!(close(lo.l, 8.0, 1e-8));
    }

    #[test]
    fn luv_white_and_black() {
        let w = WhitePoint::D65;
        let white = xyz_to_luv(&w.as_triple(), &w).unwrap();
        assert!(close(white.l, 100.0, 1e-12) && close(white.u, 0.0, 1e-12) && close(white.v, 0.0, 1e-12));
        let black = xyz_to_luv(&ColorTriple::new(0.0, 0.0, 0.0), &w).unwrap();
        assert_eq!((black.l, black.u, black.v), (0.0, 0.0, 0.0));
    }

    #[test]
    fn luv_matches_hand_computation() {
        // X=41.24, Y=21.26, Z=1.93 (sRGB red), D65.
        let (x, y, z): (f64, f64, f64) = (41.24, 21.26, 1.93);
        let (xn, yn, zn) = (95.047, 100.0, 108.883);
        let d = x + 15.0 * y + 3.0 * z;
        let dn = xn + 15.0 * yn + 3.0 * zn;
        let l = 116.0 * (y / yn).powf(1.0 / 3.0) - 16.0;
        let u = 13.0 * l * (4.0 * x / d - 4.0 * xn / dn);
        let v = 13.0 * l * (9.0 * y / d - 9.0 * yn / dn);
        let got = xyz_to_luv(&ColorTriple::new(x, y, z), &WhitePoint::D65).unwrap();
        assert!(close(got.l, l, 1e-10) && close(got.u, u, 1e-10) && close(got.v, v, 1e-10));
        // Known reference values for sRGB red under D65.
        assert!(close(got.l, 53.24, 0.01) && close(got.u, 175.0, 0.1) && close(got.v, 37.76, 0.1));
    }

    #[test]
    fn negative_components_are_clamped() {
        let w = WhitePoint::D65;
        let a = xyz_to_lab(&ColorTriple::new(-3.0, 20.0, 5.0), &w).unwrap();
        let b = xyz_to_lab(&ColorTriple::new(0.0, 20.0, 5.0), &w).unwrap();
        assert_eq!(a, b);
        let a = xyz_to_luv(&ColorTriple::new(-3.0, 20.0, 5.0), &w).unwrap();
        let b = xyz_to_luv(&ColorTriple::new(0.0, 20.0, 5.0), &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn white_point_validation() {
        assert!(matches!(WhitePoint::new(0.0, 100.0, 100.0), Err(Error::InvalidWhitePoint)));
        assert!(matches!(WhitePoint::new(95.0, f64::NAN, 100.0), Err(Error::InvalidWhitePoint)));
        assert!(WhitePoint::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn delta_e_axis_and_identity() {
        let x = LabColor { l: 50.0, a: 10.0, b: -5.0 };
        let y = LabColor { l: 53.0, ..x };
        assert_eq!(delta_e(&x, &x), 0.0);
        assert!(close(delta_e(&x, &y), 3.0, 1e-12));
        let p = LuvColor { l: 1.0, u: 2.0, v: 3.0 };
        let q = LuvColor { l: 4.0, u: 6.0, v: 3.0 };
        assert!(close(delta_e(&p, &q), 5.0, 1e-12));
    }

    #[test]
    fn luminance_align_examples() {
        let out = luminance_align(&ColorTriple::new(2.0, 2.0, 2.0), &ColorTriple::new(1.0, 5.0, 9.0)).unwrap();
        assert_eq!(out.0, [5.0, 5.0, 5.0]);
        let r = ColorTriple::new(0.3, 0.4, 0.5);
        assert_eq!(luminance_align(&r, &r).unwrap(), r);
        assert!(matches!(
            luminance_align(&ColorTriple::new(1.0, 0.0, 1.0), &r),
            Err(Error::DegenerateSample(_))
        ));
    }
}
