use std::fmt;
use std::ops::Mul;

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Determinant drift tolerated before a product is renormalized.
pub const DET_DRIFT: f64 = 1e-12;

/// An element of SL(2,R), stored row-major as `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// One-parameter subgroups generating SL(2,R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// The diagonal flow `diag(e^t, e^-t)`.
    A,
    /// Upper unipotent `[[1, t], [0, 1]]`.
    Uplus,
    /// Lower unipotent `[[1, 0], [t, 1]]`.
    Uminus,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// `diag(e^t, e^-t)`.
    pub fn diag_flow(t: f64) -> Self {
        Mat2::new(t.exp(), 0.0, 0.0, (-t).exp())
    }

    pub fn upper(t: f64) -> Self {
        Mat2::new(1.0, t, 0.0, 1.0)
    }

    pub fn lower(t: f64) -> Self {
        Mat2::new(1.0, 0.0, t, 1.0)
    }

    /// Rotation by `theta`, `[[cos, -sin], [sin, cos]]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Iwasawa product `n(x) a(y) k(theta)`, whose Möbius image of `i` is `x + iy`.
    pub fn from_iwasawa(x: f64, y: f64, theta: f64) -> Self {
        let sy = y.sqrt();
        Mat2::new(sy, x / sy, 0.0, 1.0 / sy) * Mat2::rotation(theta)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Inverse, assuming unit determinant.
    pub fn inverse(&self) -> Self {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn neg(&self) -> Self {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    /// Divides by `sqrt(det)` when the determinant has drifted past [`DET_DRIFT`].
    pub fn renormalized(self) -> Self {
        let det = self.det();
        if (det - 1.0).abs() > DET_DRIFT && det > 0.0 {
            let s = det.sqrt();
            Mat2::new(self.a / s, self.b / s, self.c / s, self.d / s)
        } else {
            self
        }
    }

    /// Möbius action `z -> (a z + b) / (c z + d)`.
    pub fn mobius(&self, z: Complex<f64>) -> Complex<f64> {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// Image of the base point `i` of the upper half plane.
    pub fn orbit_point(&self) -> Complex<f64> {
        // (a i + b)/(c i + d) = ((ac + bd) + i) / (c^2 + d^2) for det 1
        let n = self.c * self.c + self.d * self.d;
        Complex::new((self.a * self.c + self.b * self.d) / n, 1.0 / n)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(2, 2, &[self.a, self.b, self.c, self.d])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
        .renormalized()
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Returns `a^t`, `u+^t` or `u-^t`.
pub fn make_generator(kind: GeneratorKind, t: f64) -> Result<Mat2> {
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    Ok(match kind {
        GeneratorKind::A => Mat2::diag_flow(t),
        GeneratorKind::Uplus => Mat2::upper(t),
        GeneratorKind::Uminus => Mat2::lower(t),
    })
}

/// Rewrites `u ubar` (upper then lower unipotent) as `ubar' u' a`.
///
/// The diagonal factor must have positive entries, so the upper-left entry of
/// `u ubar` has to be positive; otherwise the factorization is reported as
/// impossible.
pub fn bruhat_factor(u: &Mat2, ubar: &Mat2) -> Result<(Mat2, Mat2, Mat2)> {
    let m = *u * *ubar;
    if !(m.a > 0.0) {
        return Err(Error::FactorizationImpossible(m.a));
    }
    let alpha = m.a;
    let lower = Mat2::lower(m.c / alpha);
    let upper = Mat2::upper(m.b * alpha);
    let diag = Mat2::new(alpha, 0.0, 0.0, 1.0 / alpha);
    Ok((lower, upper, diag))
}
