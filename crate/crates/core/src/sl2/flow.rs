use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::lattice::Lattice;
use super::mat2::{make_generator, GeneratorKind, Mat2};
use super::word::GroupWord;
use crate::error::{Error, Result};

/// A point of `X = G/Γ`.
///
/// The coset `gΓ` is stored as the right coset `Γ g⁻¹`, whose representative
/// `rep` is left-reduced into the classical fundamental domain. A group element
/// `g'` therefore acts by `rep -> w · rep · g'⁻¹`, where `w` is the reduction
/// word, and `w` is the return word `α̃(g', x)` of the suspension cocycle.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    rep: Mat2,
    /// Word of the reduction that produced `rep`.
    accumulated_word: GroupWord,
}

impl BasePoint {
    /// Reduces an arbitrary internal representative.
    pub fn from_rep(h: Mat2, lattice: &Lattice) -> Result<Self> {
        let (rep, accumulated_word) = lattice.reduce(h)?;
        Ok(BasePoint { rep, accumulated_word })
    }

    /// The coset of the identity.
    pub fn identity_coset(lattice: &Lattice) -> Self {
        BasePoint::from_rep(Mat2::IDENTITY, lattice).expect("identity is reduced")
    }

    pub fn rep(&self) -> &Mat2 {
        &self.rep
    }

    pub fn accumulated_word(&self) -> &GroupWord {
        &self.accumulated_word
    }

    /// Möbius image of `i` under the representative.
    pub fn z(&self) -> Complex<f64> {
        self.rep.orbit_point()
    }

    pub fn cusp_height(&self, lattice: &Lattice) -> f64 {
        lattice.cusp_height(self.z())
    }

    /// Entrywise distance between representatives.
    pub fn distance(&self, other: &BasePoint) -> f64 {
        self.rep.max_abs_diff(&other.rep)
    }
}

/// One-parameter flows on `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    Geodesic,
    #[serde(rename = "horocycle+")]
    HorocyclePlus,
    #[serde(rename = "horocycle-")]
    HorocycleMinus,
}

impl FlowKind {
    pub fn generator_kind(self) -> GeneratorKind {
        match self {
            FlowKind::Geodesic => GeneratorKind::A,
            FlowKind::HorocyclePlus => GeneratorKind::Uplus,
            FlowKind::HorocycleMinus => GeneratorKind::Uminus,
        }
    }
}

/// Direction of a horocycle flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorocycleSign {
    Plus,
    Minus,
}

/// Acts on `x` by a single group element, with one reduction.
pub fn act(x: &BasePoint, g: &Mat2, lattice: &Lattice) -> Result<(BasePoint, GroupWord)> {
    let (rep, w) = lattice.reduce(x.rep * g.inverse())?;
    Ok((BasePoint { rep, accumulated_word: w.clone() }, w))
}

/// Flows `x` for time `t`, in unit-size increments with a reduction after
/// each. Returns the new point and the return word of the whole flow segment.
pub fn flow(x: &BasePoint, kind: FlowKind, t: f64, lattice: &Lattice) -> Result<(BasePoint, GroupWord)> {
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    if t == 0.0 {
        return Ok((x.clone(), GroupWord::empty()));
    }
    let n = t.abs().ceil().max(1.0) as usize;
    let step = make_generator(kind.generator_kind(), t / n as f64)?.inverse();
    let mut rep = x.rep;
    let mut total = GroupWord::empty();
    let mut last = GroupWord::empty();
    for _ in 0..n {
        let (next, w) = lattice.reduce(rep * step)?;
        rep = next;
        let mut combined = w.clone();
        combined.append(&total);
        total = combined;
        last = w;
    }
    Ok((BasePoint { rep, accumulated_word: last }, total))
}

pub fn flow_geodesic(x: &BasePoint, t: f64, lattice: &Lattice) -> Result<(BasePoint, GroupWord)> {
    flow(x, FlowKind::Geodesic, t, lattice)
}

pub fn flow_horocycle(
    x: &BasePoint,
    s: f64,
    sign: HorocycleSign,
    lattice: &Lattice,
) -> Result<(BasePoint, GroupWord)> {
    let kind = match sign {
        HorocycleSign::Plus => FlowKind::HorocyclePlus,
        HorocycleSign::Minus => FlowKind::HorocycleMinus,
    };
    flow(x, kind, s, lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::lattice::Lattice;

    #[test]
    fn zero_time_is_identity() {
        let lat = Lattice::sl2z();
        let x = BasePoint::from_rep(Mat2::from_iwasawa(0.1, 1.3, 0.4), &lat).unwrap();
        for kind in [FlowKind::Geodesic, FlowKind::HorocyclePlus] {
            let (y, w) = flow(&x, kind, 0.0, &lat).unwrap();
            assert_eq!(y, x);
            assert!(w.is_empty());
        }
    }

    #[test]
    fn geodesic_from_identity_coset() {
        let lat = Lattice::sl2z();
        let x = BasePoint::identity_coset(&lat);
        // backward time climbs the imaginary axis: e^2 i stays in the domain
        let (y, w) = flow_geodesic(&x, -1.0, &lat).unwrap();
        assert!(w.is_empty());
        assert!((y.z().im - 1f64.exp().powi(2)).abs() < 1e-12);
        // forward time descends to e^-2 i and needs one inversion
        let (_, w) = flow_geodesic(&x, 1.0, &lat).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.letters()[0].generator, Lattice::S);
    }

    #[test]
    fn horocycle_from_identity_coset() {
        let lat = Lattice::sl2z();
        let x = BasePoint::identity_coset(&lat);
        let (_, w) = flow_horocycle(&x, 0.3, HorocycleSign::Plus, &lat).unwrap();
        assert!(w.is_empty());
        let (y, w) = flow_horocycle(&x, 0.7, HorocycleSign::Plus, &lat).unwrap();
        assert_eq!(w, GroupWord::single(Lattice::T, 1));
        assert!((y.z() - Complex::new(0.3, 1.0)).norm() < 1e-12);
        let (_, w) = flow_horocycle(&x, -0.7, HorocycleSign::Plus, &lat).unwrap();
        assert_eq!(w, GroupWord::single(Lattice::T, -1));
    }

    #[test]
    fn flow_group_law() {
        let lat = Lattice::free();
        let x = BasePoint::from_rep(Mat2::from_iwasawa(0.2, 0.9, 1.0), &lat).unwrap();
        let (y, _) = flow_geodesic(&x, 1.3, &lat).unwrap();
        let (y, _) = flow_geodesic(&y, 2.4, &lat).unwrap();
        let (z, _) = flow_geodesic(&x, 3.7, &lat).unwrap();
        assert!(y.distance(&z) < 1e-9);
    }
}
