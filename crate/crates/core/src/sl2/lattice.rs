use std::fmt;

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat2::Mat2;
use super::word::{GroupWord, Letter};
use crate::error::{Error, Result};

/// Default step budget for a single reduction.
pub const REDUCTION_BUDGET: usize = 1_000_000;

/// Boundary tolerance of the closed fundamental domain.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Which lattice the base `X = G/Γ` is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeMode {
    /// The free Sanov subgroup generated by `[[1,2],[0,1]]` and `[[1,0],[2,1]]`.
    Free,
    /// The full modular group with `S = [[0,-1],[1,0]]` and `T = [[1,1],[0,1]]`.
    Sl2z,
}

impl fmt::Display for LatticeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeMode::Free => f.write_str("free"),
            LatticeMode::Sl2z => f.write_str("sl2z"),
        }
    }
}

/// Exact integer 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntMat2 {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub d: i128,
}

impl IntMat2 {
    pub const IDENTITY: IntMat2 = IntMat2 { a: 1, b: 0, c: 0, d: 1 };

    pub const fn new(a: i128, b: i128, c: i128, d: i128) -> Self {
        IntMat2 { a, b, c, d }
    }

    pub fn det(&self) -> i128 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Self {
        IntMat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn checked_mul(&self, r: &IntMat2) -> Option<IntMat2> {
        let e = |x: i128, y: i128, z: i128, w: i128| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(IntMat2::new(
            e(self.a, r.a, self.b, r.c)?,
            e(self.a, r.b, self.b, r.d)?,
            e(self.c, r.a, self.d, r.c)?,
            e(self.c, r.b, self.d, r.d)?,
        ))
    }

    /// Integer power, negative exponents through the inverse.
    pub fn checked_pow(&self, power: i64) -> Option<IntMat2> {
        let mut base = if power < 0 { self.inverse() } else { *self };
        let mut e = power.unsigned_abs();
        let mut acc = IntMat2::IDENTITY;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.checked_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.checked_mul(&base)?;
            }
        }
        Some(acc)
    }

    pub fn to_mat2(&self) -> Mat2 {
        Mat2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    pub fn neg(&self) -> Self {
        IntMat2::new(-self.a, -self.b, -self.c, -self.d)
    }
}

/// A finite-index subgroup of SL(2,Z) with its generators and fundamental domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    mode: LatticeMode,
    generators: Vec<IntMat2>,
    names: Vec<String>,
}

impl Lattice {
    pub fn new(mode: LatticeMode) -> Self {
        match mode {
            LatticeMode::Free => Lattice {
                mode,
                generators: vec![IntMat2::new(1, 2, 0, 1), IntMat2::new(1, 0, 2, 1)],
                names: vec!["A".into(), "B".into()],
            },
            LatticeMode::Sl2z => Lattice {
                mode,
                generators: vec![IntMat2::new(0, -1, 1, 0), IntMat2::new(1, 1, 0, 1)],
                names: vec!["S".into(), "T".into()],
            },
        }
    }

    /// The default lattice, the free Sanov subgroup.
    pub fn free() -> Self {
        Lattice::new(LatticeMode::Free)
    }

    pub fn sl2z() -> Self {
        Lattice::new(LatticeMode::Sl2z)
    }

    pub fn mode(&self) -> LatticeMode {
        self.mode
    }

    pub fn generators(&self) -> &[IntMat2] {
        &self.generators
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn generator(&self, id: usize) -> Result<&IntMat2> {
        self.generators.get(id).ok_or(Error::UnknownGenerator(id))
    }

    pub fn generator_id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Index of `S` in SL(2,Z) mode.
    pub const S: usize = 0;
    /// Index of `T` in SL(2,Z) mode.
    pub const T: usize = 1;

    /// Closed-domain membership test with tolerance [`DOMAIN_TOL`].
    pub fn in_domain(&self, z: Complex<f64>) -> bool {
        match self.mode {
            LatticeMode::Sl2z => z.re.abs() <= 0.5 + DOMAIN_TOL && z.norm() >= 1.0 - DOMAIN_TOL,
            LatticeMode::Free => {
                z.re.abs() <= 1.0 + DOMAIN_TOL
                    && (z - 0.5).norm() >= 0.5 - DOMAIN_TOL
                    && (z + 0.5).norm() >= 0.5 - DOMAIN_TOL
            }
        }
    }

    /// Height of `z` in the deepest cusp of the fundamental domain: `Im z` at
    /// infinity, and the conjugated imaginary part at the finite cusps.
    pub fn cusp_height(&self, z: Complex<f64>) -> f64 {
        match self.mode {
            LatticeMode::Sl2z => z.im,
            LatticeMode::Free => {
                let at_zero = z.im / z.norm_sqr();
                let at_one = z.im / (z - 1.0).norm_sqr();
                let at_minus_one = z.im / (z + 1.0).norm_sqr();
                z.im.max(at_zero).max(at_one).max(at_minus_one)
            }
        }
    }

    /// Exact value of a word, `None` on overflow.
    pub fn evaluate(&self, word: &GroupWord) -> Result<Option<IntMat2>> {
        let mut acc = IntMat2::IDENTITY;
        for l in word.letters() {
            let g = self.generator(l.generator)?;
            let Some(p) = g.checked_pow(l.power) else { return Ok(None) };
            let Some(next) = acc.checked_mul(&p) else { return Ok(None) };
            acc = next;
        }
        Ok(Some(acc))
    }

    /// Whether two words evaluate to the same lattice element.
    pub fn same_element(&self, u: &GroupWord, v: &GroupWord) -> Result<bool> {
        if self.mode == LatticeMode::Free {
            return Ok(u == v);
        }
        Ok(self.evaluate(u)? == self.evaluate(v)?)
    }

    /// Parses `"S^1 T^-2"`-style text; `e` or the empty string is the identity.
    pub fn parse_word(&self, text: &str) -> Result<GroupWord> {
        let mut w = GroupWord::empty();
        for tok in text.split_whitespace() {
            if tok == "e" {
                continue;
            }
            let (name, power) = match tok.split_once('^') {
                Some((n, p)) => (
                    n,
                    p.parse::<i64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad power in `{tok}`")))?,
                ),
                None => (tok, 1),
            };
            let id = self
                .generator_id(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown generator `{name}`")))?;
            w.push_right(Letter::new(id, power));
        }
        Ok(w)
    }

    /// Canonical sign of a representative in SL(2,Z) mode, where `-I` lies in
    /// the lattice: the Iwasawa angle is kept in `(-pi/2, pi/2]`.
    fn needs_sign_flip(&self, h: &Mat2) -> bool {
        self.mode == LatticeMode::Sl2z && !(h.d > 0.0 || (h.d == 0.0 && h.c > 0.0))
    }

    /// Left-reduces `g` so that the Möbius image of `i` lies in the fundamental
    /// domain. Returns the reduced matrix and the word `w` with `w * g = reduced`.
    pub fn reduce(&self, g: Mat2) -> Result<(Mat2, GroupWord)> {
        self.reduce_with_budget(g, REDUCTION_BUDGET)
    }

    pub fn reduce_with_budget(&self, g: Mat2, budget: usize) -> Result<(Mat2, GroupWord)> {
        if !g.is_finite() {
            return Err(Error::NonFinite("g"));
        }
        let mut h = g;
        // letters in the order they are applied; the word is their reverse product
        let mut applied: Vec<Letter> = Vec::new();
        let mut steps = 0usize;
        loop {
            if steps >= budget {
                return Err(Error::NonterminatingReduction(budget));
            }
            steps += 1;
            let z = h.orbit_point();
            let step = match self.mode {
                LatticeMode::Sl2z => {
                    if z.re.abs() > 0.5 + DOMAIN_TOL {
                        let n = z.re.round();
                        h = Mat2::new(h.a - n * h.c, h.b - n * h.d, h.c, h.d);
                        Some(Letter::new(Self::T, -(n as i64)))
                    } else if z.norm() < 1.0 - DOMAIN_TOL {
                        h = Mat2::new(-h.c, -h.d, h.a, h.b);
                        Some(Letter::new(Self::S, 1))
                    } else {
                        None
                    }
                }
                LatticeMode::Free => {
                    if z.re.abs() > 1.0 + DOMAIN_TOL {
                        let n = (z.re / 2.0).round();
                        h = Mat2::new(h.a - 2.0 * n * h.c, h.b - 2.0 * n * h.d, h.c, h.d);
                        Some(Letter::new(0, -(n as i64)))
                    } else if (z - 0.5).norm() < 0.5 - DOMAIN_TOL {
                        h = Mat2::new(h.a, h.b, h.c - 2.0 * h.a, h.d - 2.0 * h.b);
                        Some(Letter::new(1, -1))
                    } else if (z + 0.5).norm() < 0.5 - DOMAIN_TOL {
                        h = Mat2::new(h.a, h.b, h.c + 2.0 * h.a, h.d + 2.0 * h.b);
                        Some(Letter::new(1, 1))
                    } else {
                        None
                    }
                }
            };
            match step {
                Some(l) => applied.push(l),
                None => break,
            }
        }
        if self.needs_sign_flip(&h) {
            h = h.neg();
            applied.push(Letter::new(Self::S, 2));
        }
        let word = GroupWord::from_letters(applied.into_iter().rev());
        Ok((h.renormalized(), word))
    }

    /// Draws a Haar-distributed point of the fundamental domain truncated at
    /// cusp height `max_height`, with a uniform frame angle.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, max_height: f64) -> Mat2 {
        let (x_half, y_min) = match self.mode {
            LatticeMode::Sl2z => (0.5, 3f64.sqrt() / 2.0),
            LatticeMode::Free => (1.0, 0.1),
        };
        let y_max = max_height;
        loop {
            let x = rng.random_range(-x_half..=x_half);
            // density proportional to 1/y^2 on [y_min, y_max]
            let u: f64 = rng.random();
            let y = 1.0 / (1.0 / y_min - u * (1.0 / y_min - 1.0 / y_max));
            let z = Complex::new(x, y);
            if self.in_domain(z) && self.cusp_height(z) <= max_height {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                return Mat2::from_iwasawa(x, y, theta);
            }
        }
    }
}

/// Free-function form of [`Lattice::reduce`].
pub fn reduce_to_fundamental_domain(g: Mat2, lattice: &Lattice) -> Result<(Mat2, GroupWord)> {
    lattice.reduce(g)
}
