//! Representations `ρ: Γ → GL(H)` of the base lattice.
//!
//! A representation fixes the monodromy of the flat suspension bundle
//! `H_ρ = (SL(2,R) × H)/Γ`, where `γ` acts by `(g, v) -> (gγ⁻¹, ρ(γ)v)`.
//! Fibers carry the constant Euclidean norm.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sl2::{GroupWord, Lattice, LatticeMode};

/// Entrywise tolerance of the SL(2,Z) relation check.
pub const RELATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    dim: usize,
    mode: LatticeMode,
    images: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    determinants: Vec<f64>,
    label: String,
}

impl Representation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> LatticeMode {
        self.mode
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn images(&self) -> &[DMatrix<f64>] {
        &self.images
    }

    pub fn determinants(&self) -> &[f64] {
        &self.determinants
    }

    /// Whether every generator image has determinant one (within 1e-9).
    pub fn is_special(&self) -> bool {
        self.determinants.iter().all(|d| (d - 1.0).abs() < 1e-9)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The tautological representation: each generator maps to itself.
    pub fn standard(lattice: &Lattice) -> Self {
        let images = lattice.generators().iter().map(|g| g.to_mat2().to_dmatrix()).collect();
        build_representation(2, images, lattice.mode())
            .expect("lattice generators form a representation")
            .with_label("standard")
    }

    /// Every generator acts as the identity on a `dim`-dimensional fiber.
    pub fn trivial(dim: usize, mode: LatticeMode) -> Self {
        let images = vec![DMatrix::identity(dim, dim); 2];
        build_representation(dim, images, mode)
            .expect("identity images")
            .with_label(format!("trivial({dim})"))
    }

    /// `ρ(g^power)`, negative powers through the stored inverse.
    pub fn generator_power(&self, generator: usize, power: i64) -> Result<DMatrix<f64>> {
        let base = if power < 0 { &self.inverses } else { &self.images }
            .get(generator)
            .ok_or(Error::UnknownGenerator(generator))?;
        Ok(matrix_power(base, power.unsigned_abs()))
    }
}

fn matrix_power(m: &DMatrix<f64>, mut e: u64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut acc = DMatrix::identity(n, n);
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Validates generator images and assembles a representation.
///
/// In SL(2,Z) mode the images must satisfy `ρ(S)⁴ = I`, `(ρ(S)ρ(T))⁶ = I`
/// and `ρ(S)² = (ρ(S)ρ(T))³`; the free lattice has no relations.
pub fn build_representation(
    dim: usize,
    generator_images: Vec<DMatrix<f64>>,
    lattice_mode: LatticeMode,
) -> Result<Representation> {
    if dim == 0 {
        return Err(Error::InvalidArgument("representation dimension must be positive".into()));
    }
    if generator_images.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected 2 generator images, got {}",
            generator_images.len()
        )));
    }
    let names = Lattice::new(lattice_mode).names().to_vec();
    let mut inverses = Vec::with_capacity(2);
    let mut determinants = Vec::with_capacity(2);
    for (img, name) in generator_images.iter().zip(&names) {
        if img.nrows() != dim || img.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: img.nrows().max(img.ncols()) });
        }
        if img.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularImage(name.clone()));
        }
        let svd = img.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > 1e14 {
            return Err(Error::SingularImage(name.clone()));
        }
        let inv = img.clone().try_inverse().ok_or_else(|| Error::SingularImage(name.clone()))?;
        determinants.push(img.determinant());
        inverses.push(inv);
    }
    if lattice_mode == LatticeMode::Sl2z {
        let id = DMatrix::<f64>::identity(dim, dim);
        let s = &generator_images[Lattice::S];
        let st = s * &generator_images[Lattice::T];
        let s2 = s * s;
        let st3 = &st * &st * &st;
        let checks = [
            ("S^4 = I", max_abs_diff(&(&s2 * &s2), &id)),
            ("(ST)^6 = I", max_abs_diff(&(&st3 * &st3), &id)),
            ("S^2 = (ST)^3", max_abs_diff(&s2, &st3)),
        ];
        for (relation, defect) in checks {
            if !(defect <= RELATION_TOL) {
                return Err(Error::RelationViolation { relation: relation.into(), defect });
            }
        }
    }
    Ok(Representation {
        dim,
        mode: lattice_mode,
        images: generator_images,
        inverses,
        determinants,
        label: String::from("custom"),
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `k`-th symmetric power of a 2x2 matrix in the monomial basis
/// `(e1^k, e1^(k-1) e2, ..., e2^k)`.
pub fn sym_power_matrix(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mut out = DMatrix::zeros(k + 1, k + 1);
    // column j is (a e1 + c e2)^(k-j) (b e1 + d e2)^j
    for j in 0..=k {
        for p in 0..=(k - j) {
            let left = binomial(k - j, p) * a.powi((k - j - p) as i32) * c.powi(p as i32);
            for q in 0..=j {
                let right = binomial(j, q) * b.powi((j - q) as i32) * d.powi(q as i32);
                out[(p + q, j)] += left * right;
            }
        }
    }
    out
}

pub fn sym_power(rep: &Representation, k: usize) -> Result<Representation> {
    if rep.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rep.dim });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("symmetric power must be positive".into()));
    }
    let images = rep.images.iter().map(|m| sym_power_matrix(m, k)).collect();
    Ok(build_representation(k + 1, images, rep.mode)?.with_label(format!("sym{k}({})", rep.label)))
}

/// Block-diagonal sum.
pub fn direct_sum(rep1: &Representation, rep2: &Representation) -> Result<Representation> {
    if rep1.mode != rep2.mode {
        return Err(Error::ModeMismatch);
    }
    let dim = rep1.dim + rep2.dim;
    let images = rep1
        .images
        .iter()
        .zip(&rep2.images)
        .map(|(m1, m2)| {
            let mut m = DMatrix::zeros(dim, dim);
            m.view_mut((0, 0), (rep1.dim, rep1.dim)).copy_from(m1);
            m.view_mut((rep1.dim, rep1.dim), (rep2.dim, rep2.dim)).copy_from(m2);
            m
        })
        .collect();
    Ok(build_representation(dim, images, rep1.mode)?
        .with_label(format!("{}+{}", rep1.label, rep2.label)))
}

/// Ordered product of generator-image powers; the empty word maps to the identity.
pub fn rho_of_word(rep: &Representation, word: &GroupWord) -> Result<DMatrix<f64>> {
    let mut acc = DMatrix::identity(rep.dim, rep.dim);
    for l in word.letters() {
        acc = acc * rep.generator_power(l.generator, l.power)?;
    }
    Ok(acc)
}

/// Text form of a representation: dimension, lattice mode and row-major images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationBlock {
    pub dim: usize,
    pub mode: LatticeMode,
    #[serde(default)]
    pub label: Option<String>,
    pub images: Vec<Vec<f64>>,
}

impl From<&Representation> for RepresentationBlock {
    fn from(rep: &Representation) -> Self {
        RepresentationBlock {
            dim: rep.dim,
            mode: rep.mode,
            label: Some(rep.label.clone()),
            images: rep
                .images
                .iter()
                .map(|m| m.transpose().iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<&RepresentationBlock> for Representation {
    type Error = Error;

    fn try_from(block: &RepresentationBlock) -> Result<Self> {
        let mut images = Vec::with_capacity(block.images.len());
        for row_major in &block.images {
            if row_major.len() != block.dim * block.dim {
                return Err(Error::DimensionMismatch {
                    expected: block.dim * block.dim,
                    got: row_major.len(),
                });
            }
            images.push(DMatrix::from_row_slice(block.dim, block.dim, row_major));
        }
        let rep = build_representation(block.dim, images, block.mode)?;
        Ok(match &block.label {
            Some(l) => rep.with_label(l.clone()),
            None => rep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::Letter;
    use proptest::prelude::*;

    fn sl2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        // d chosen so that det = 1
        DMatrix::from_row_slice(2, 2, &[a, b, c, (1.0 + b * c) / a])
    }

    #[test]
    fn standard_and_trivial() {
        let lat = Lattice::sl2z();
        let std = Representation::standard(&lat);
        assert_eq!(std.dim(), 2);
        assert!(std.is_special());
        let triv = Representation::trivial(3, LatticeMode::Free);
        let w = Lattice::free().parse_word("A^3 B^-2").unwrap();
        assert_eq!(rho_of_word(&triv, &w).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn free_mode_accepts_hyperbolic_images() {
        let images = vec![
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]),
        ];
        let rep = build_representation(2, images.clone(), LatticeMode::Free).unwrap();
        assert!(rep.is_special());
        // the same images break the SL(2,Z) relations
        assert!(matches!(
            build_representation(2, images, LatticeMode::Sl2z),
            Err(Error::RelationViolation { .. })
        ));
    }

    #[test]
    fn singular_image_rejected() {
        let images = vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)];
        assert!(matches!(
            build_representation(2, images, LatticeMode::Free),
            Err(Error::SingularImage(_))
        ));
    }

    #[test]
    fn sym_power_examples() {
        let lat = Lattice::sl2z();
        let std = Representation::standard(&lat);
        assert_eq!(sym_power(&std, 1).unwrap().images(), std.images());
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(sym_power_matrix(&t, 2), expected);
        let lam = 1.7;
        let diag = DMatrix::from_row_slice(2, 2, &[lam, 0.0, 0.0, 1.0 / lam]);
        let s3 = sym_power_matrix(&diag, 3);
        for (i, p) in [3, 1, -1, -3].iter().enumerate() {
            assert!((s3[(i, i)] - lam.powi(*p)).abs() < 1e-12);
        }
        assert!(sym_power(&Representation::trivial(3, LatticeMode::Free), 2).is_err());
    }

    #[test]
    fn direct_sum_blocks() {
        let lat = Lattice::free();
        let std = Representation::standard(&lat);
        let sum = direct_sum(&std, &sym_power(&std, 2).unwrap()).unwrap();
        assert_eq!(sum.dim(), 5);
        let a = &sum.images()[0];
        assert_eq!(a.view((0, 2), (2, 3)).amax(), 0.0);
        assert_eq!(a.view((2, 0), (3, 2)).amax(), 0.0);
        let tt = direct_sum(&Representation::trivial(1, lat.mode()), &Representation::trivial(1, lat.mode()))
            .unwrap();
        assert_eq!(tt.images()[1], DMatrix::identity(2, 2));
        assert_eq!(
            direct_sum(&std, &Representation::trivial(1, LatticeMode::Sl2z)),
            Err(Error::ModeMismatch)
        );
    }

    #[test]
    fn rho_of_word_examples() {
        let lat = Lattice::sl2z();
        let std = Representation::standard(&lat);
        assert_eq!(rho_of_word(&std, &GroupWord::empty()).unwrap(), DMatrix::identity(2, 2));
        let t2 = rho_of_word(&std, &GroupWord::single(Lattice::T, 2)).unwrap();
        assert_eq!(t2, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        let st = lat.parse_word("S T").unwrap();
        let m = rho_of_word(&std, &st).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 1.0]));
        assert!(rho_of_word(&std, &GroupWord::single(5, 1)).is_err());
    }

    #[test]
    fn block_roundtrip() {
        let rep = sym_power(&Representation::standard(&Lattice::sl2z()), 3).unwrap();
        let block = RepresentationBlock::from(&rep);
        let text = toml::to_string(&block).unwrap();
        let back: RepresentationBlock = toml::from_str(&text).unwrap();
        assert_eq!(Representation::try_from(&back).unwrap(), rep);
    }

    fn word_strategy() -> impl Strategy<Value = GroupWord> {
        proptest::collection::vec((0usize..2, -3i64..=3), 0..6)
            .prop_map(|ls| GroupWord::from_letters(ls.into_iter().map(|(g, p)| Letter::new(g, p))))
    }

    proptest! {
        #[test]
        fn homomorphism(w1 in word_strategy(), w2 in word_strategy()) {
            let rep = sym_power(&Representation::standard(&Lattice::free()), 2).unwrap();
            let lhs = rho_of_word(&rep, &w1.concat(&w2)).unwrap();
            let rhs = rho_of_word(&rep, &w1).unwrap() * rho_of_word(&rep, &w2).unwrap();
            let scale = lhs.amax().max(1.0);
            prop_assert!((lhs - rhs).amax() / scale < 1e-9);
        }

        #[test]
        fn sym_power_functorial(
            a in 0.3f64..2.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
            p in 0.3f64..2.0, q in -1.0f64..1.0, r in -1.0f64..1.0,
            k in 1usize..5,
        ) {
            let m = sl2(a, b, c);
            let n = sl2(p, q, r);
            let lhs = sym_power_matrix(&(&m * &n), k);
            let rhs = sym_power_matrix(&m, k) * sym_power_matrix(&n, k);
            prop_assert!((&lhs - &rhs).amax() / lhs.amax().max(1.0) < 1e-9);
            let det = sym_power_matrix(&m, k).determinant();
            prop_assert!((det - 1.0).abs() < 1e-9 * (k * (k + 1)) as f64 * lhs.amax().max(1.0));
        }
    }
}
