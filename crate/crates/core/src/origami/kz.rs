use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::homology::{move_chain_map, relabel_chain_map, HomologyBasis, IntMatrix};
use super::{veech_orbit, Move, Origami, StratumData, VeechOrbit};
use crate::cocycle::FiberCocycle;
use crate::error::{Error, Result};
use crate::oseledets::{estimate_spectrum, Spectrum, SpectrumJob};
use crate::sl2::{GroupWord, Lattice, LatticeMode};

/// Action of one move from one sheet.
#[derive(Debug, Clone)]
struct Step {
    target: usize,
    matrix: IntMatrix,
    /// Length of the move's cycle through this sheet and the product of the
    /// step matrices once around it.
    cycle_len: u64,
    loop_matrix: IntMatrix,
}

/// The Kontsevich–Zorich cocycle of an origami as a flat bundle over
/// `SL(2,R)/SL(2,Z)`: the fiber over a point is `⊕_k H_1(O_k)` over the
/// orbit members `O_k`, and the sheet coordinate selects the summand.
#[derive(Debug, Clone)]
pub struct KzCocycle {
    orbit: VeechOrbit,
    bases: Vec<HomologyBasis>,
    steps: Vec<[Step; 4]>,
    stratum: StratumData,
}

enum Acc {
    Int(IntMatrix),
    Float(DMatrix<f64>),
}

impl Acc {
    fn left_mul(self, m: &IntMatrix) -> Acc {
        match self {
            Acc::Int(a) => match m.checked_mul(&a) {
                Some(p) => Acc::Int(p),
                None => Acc::Float(m.to_f64() * a.to_f64()),
            },
            Acc::Float(a) => Acc::Float(m.to_f64() * a),
        }
    }

    fn left_mul_pow(self, m: &IntMatrix, e: u64) -> Acc {
        if e == 0 {
            return self;
        }
        match (m.checked_pow(e), self) {
            (Some(p), acc) => acc.left_mul(&p),
            (None, acc) => {
                let f = float_pow(&m.to_f64(), e);
                let a = match acc {
                    Acc::Int(a) => a.to_f64(),
                    Acc::Float(a) => a,
                };
                Acc::Float(f * a)
            }
        }
    }
}

fn float_pow(m: &DMatrix<f64>, mut e: u64) -> DMatrix<f64> {
    let mut base = m.clone();
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
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

impl KzCocycle {
    pub fn new(origami: &Origami, max_orbit: usize) -> Result<Self> {
        let orbit = veech_orbit(origami, max_orbit)?;
        let bases = orbit.members.iter().map(HomologyBasis::new).collect::<Result<Vec<_>>>()?;
        let mut raw: Vec<Vec<(usize, IntMatrix)>> = Vec::with_capacity(orbit.len());
        for (k, o) in orbit.members.iter().enumerate() {
            let mut row = Vec::with_capacity(4);
            for m in Move::ALL {
                let e = orbit.edge(k, m);
                let chain = relabel_chain_map(&e.relabel)
                    .checked_mul(&move_chain_map(o, m))
                    .expect("chain maps have entries in {-1, 0, 1, 2}");
                row.push((e.target, bases[k].induced(&chain, &bases[e.target])?));
            }
            raw.push(row);
        }
        let mut steps = Vec::with_capacity(orbit.len());
        for k in 0..orbit.len() {
            let step = |mi: usize| {
                let mut len = 0u64;
                let mut sheet = k;
                let mut p = IntMatrix::identity(bases[k].rank());
                loop {
                    let (t, ref m) = raw[sheet][mi];
                    p = m.checked_mul(&p).expect("one loop of single moves stays small");
                    sheet = t;
                    len += 1;
                    if sheet == k {
                        break;
                    }
                }
                Step { target: raw[k][mi].0, matrix: raw[k][mi].1.clone(), cycle_len: len, loop_matrix: p }
            };
            steps.push([step(0), step(1), step(2), step(3)]);
        }
        let stratum = origami.stratum();
        Ok(KzCocycle { orbit, bases, steps, stratum })
    }

    pub fn orbit(&self) -> &VeechOrbit {
        &self.orbit
    }

    pub fn stratum(&self) -> &StratumData {
        &self.stratum
    }

    pub fn genus(&self) -> usize {
        self.stratum.genus
    }

    /// Intersection form of the basis on `sheet`.
    pub fn intersection(&self, sheet: usize) -> &IntMatrix {
        self.bases[sheet].intersection()
    }

    /// Target sheet and homology matrix of a single move.
    pub fn step(&self, sheet: usize, m: Move) -> (usize, &IntMatrix) {
        let s = &self.steps[sheet][m.index()];
        (s.target, &s.matrix)
    }

    fn apply(&self, sheet: usize, word: &GroupWord) -> Result<(Acc, usize)> {
        let mut acc = Acc::Int(IntMatrix::identity(2 * self.genus()));
        let mut sheet = sheet;
        // the rightmost letter acts first
        for letter in word.letters().iter().rev() {
            let m = match (letter.generator, letter.power > 0) {
                (Lattice::S, true) => Move::S,
                (Lattice::S, false) => Move::SInv,
                (Lattice::T, true) => Move::T,
                (Lattice::T, false) => Move::TInv,
                (g, _) => return Err(Error::UnknownGenerator(g)),
            };
            let count = letter.power.unsigned_abs();
            let step = &self.steps[sheet][m.index()];
            acc = acc.left_mul_pow(&step.loop_matrix, count / step.cycle_len);
            for _ in 0..count % step.cycle_len {
                let s = &self.steps[sheet][m.index()];
                acc = acc.left_mul(&s.matrix);
                sheet = s.target;
            }
        }
        Ok((acc, sheet))
    }

    /// Exact homology matrix of a closed path starting and ending at the
    /// input origami (sheet 0).
    pub fn homology_action(&self, path: &GroupWord) -> Result<IntMatrix> {
        match self.apply(0, path)? {
            (_, end) if end != 0 => Err(Error::PathNotClosed),
            (Acc::Int(m), _) => Ok(m),
            (Acc::Float(_), _) => Err(Error::InvalidArgument("homology matrix exceeds 128-bit range".into())),
        }
    }
}

impl FiberCocycle for KzCocycle {
    fn dim(&self) -> usize {
        2 * self.genus()
    }

    fn lattice_mode(&self) -> LatticeMode {
        LatticeMode::Sl2z
    }

    fn sheet_count(&self) -> usize {
        self.orbit.len()
    }

    fn word_matrix(&self, sheet: usize, word: &GroupWord) -> Result<(DMatrix<f64>, usize)> {
        let (acc, end) = self.apply(sheet, word)?;
        let m = match acc {
            Acc::Int(m) => m.to_f64(),
            Acc::Float(m) => m,
        };
        Ok((m, end))
    }
}

/// Kontsevich–Zorich spectrum along the geodesic flow on the orbit's cover.
pub fn kz_spectrum(origami: &Origami, job: &SpectrumJob, max_orbit: usize) -> Result<Spectrum> {
    let kz = KzCocycle::new(origami, max_orbit)?;
    estimate_spectrum(&kz, &Lattice::sl2z(), job)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub origami: String,
    pub squares: usize,
    pub orbit_size: Option<usize>,
    pub exponents: Option<Vec<f64>>,
    pub stderr: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTable {
    pub stratum: Option<String>,
    pub rows: Vec<FamilyRow>,
    /// Max − min across successful rows, per exponent index.
    pub dispersion: Vec<f64>,
}

impl FamilyTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "origami,squares,orbit_size,exponents,stderr,error")?;
        let join = |v: &Option<Vec<f64>>| {
            v.as_ref().map(|v| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")).unwrap_or_default()
        };
        for r in &self.rows {
            writeln!(
                w,
                "\"{}\",{},{},{},{},\"{}\"",
                r.origami,
                r.squares,
                r.orbit_size.map(|s| s.to_string()).unwrap_or_default(),
                join(&r.exponents),
                join(&r.stderr),
                r.error.clone().unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// KZ spectra of a family in one stratum, with cross-family dispersion.
/// Each origami uses the same job; failures are reported per row.
pub fn exponent_family_experiment(origamis: &[Origami], job: &SpectrumJob, max_orbit: usize) -> Result<FamilyTable> {
    let Some(first) = origamis.first() else {
        return Ok(FamilyTable { stratum: None, rows: Vec::new(), dispersion: Vec::new() });
    };
    let stratum = first.stratum();
    if origamis.iter().any(|o| o.stratum() != stratum) {
        return Err(Error::MixedStrata);
    }
    let rows: Vec<FamilyRow> = origamis
        .iter()
        .map(|o| {
            let result = KzCocycle::new(o, max_orbit)
                .and_then(|kz| Ok((kz.orbit.len(), estimate_spectrum(&kz, &Lattice::sl2z(), job)?)));
            match result {
                Ok((size, s)) => FamilyRow {
                    origami: o.to_string(),
                    squares: o.n(),
                    orbit_size: Some(size),
                    exponents: Some(s.raw_exponents),
                    stderr: Some(s.raw_stderr),
                    error: None,
                },
                Err(e) => FamilyRow {
                    origami: o.to_string(),
                    squares: o.n(),
                    orbit_size: None,
                    exponents: None,
                    stderr: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let dim = 2 * stratum.genus;
    let dispersion = (0..dim)
        .map(|i| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.exponents.as_ref().map(|e| e[i])).collect();
            if vals.is_empty() {
                return f64::NAN;
            }
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(FamilyTable { stratum: Some(stratum.to_string()), rows, dispersion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::origami::is_symplectic;
    use crate::sl2::Letter;

    fn word(letters: &[(usize, i64)]) -> GroupWord {
        GroupWord::from_letters(letters.iter().map(|&(g, p)| Letter::new(g, p)))
    }

    #[test]
    fn torus_actions() {
        let kz = KzCocycle::new(&Origami::torus(), 10).unwrap();
        assert_eq!(
            kz.homology_action(&word(&[(Lattice::T, 1)])).unwrap(),
            IntMatrix::from_rows(&[vec![1, 1], vec![0, 1]])
        );
        assert_eq!(kz.homology_action(&GroupWord::empty()).unwrap(), IntMatrix::identity(2));
        assert_eq!(
            kz.homology_action(&word(&[(Lattice::T, 1_000_000)])).unwrap(),
            IntMatrix::from_rows(&[vec![1, 1_000_000], vec![0, 1]])
        );
    }

    #[test]
    fn l_shaped_paths() {
        let kz = KzCocycle::new(&Origami::l_shaped(2, 2).unwrap(), 100).unwrap();
        assert_eq!(kz.sheet_count(), 3);
        assert_eq!(kz.dim(), 4);
        let j = kz.intersection(0).clone();
        // relations of SL(2,Z) are closed paths
        for w in [word(&[(0, 4)]), word(&[(0, 1), (1, 1), (0, 1), (1, 1), (0, 1), (1, 1)]), word(&[(0, 2)])] {
            let m = kz.homology_action(&w).unwrap();
            assert!(is_symplectic(&m, &j));
        }
        assert_eq!(kz.homology_action(&word(&[(0, 4)])).unwrap(), IntMatrix::identity(4));
        // some single T is not a loop in a 3-element orbit with a T-cycle of length > 1
        let open = (1..=3).find(|&p| kz.homology_action(&word(&[(1, p)])).is_err());
        assert!(open.is_some());
        for k in 0..3 {
            for m in Move::ALL {
                let (t, mat) = kz.step(k, m);
                let lhs = mat.transpose().checked_mul(kz.intersection(t)).unwrap().checked_mul(mat).unwrap();
                assert_eq!(lhs, *kz.intersection(k));
            }
        }
    }

    #[test]
    fn word_matrix_matches_letter_by_letter() {
        let kz = KzCocycle::new(&Origami::l_shaped(3, 2).unwrap(), 100).unwrap();
        let w = word(&[(1, 7), (0, -1), (1, -5), (0, 2)]);
        for sheet in 0..kz.sheet_count() {
            let (fast, end) = kz.word_matrix(sheet, &w).unwrap();
            let mut m = DMatrix::identity(kz.dim(), kz.dim());
            let mut s = sheet;
            for l in w.letters().iter().rev() {
                for _ in 0..l.power.unsigned_abs() {
                    let mv = match (l.generator, l.power > 0) {
                        (0, true) => Move::S,
                        (0, false) => Move::SInv,
                        (_, true) => Move::T,
                        (_, false) => Move::TInv,
                    };
                    let (t, mat) = kz.step(s, mv);
                    m = mat.to_f64() * m;
                    s = t;
                }
            }
            assert_eq!(end, s);
            assert_eq!(fast, m);
        }
    }

    #[test]
    fn family_edge_cases() {
        let job = SpectrumJob::geodesic(1, 10, 0);
        let t = exponent_family_experiment(&[], &job, 10).unwrap();
        assert!(t.rows.is_empty());
        let mixed = [Origami::torus(), Origami::l_shaped(2, 2).unwrap()];
        assert_eq!(exponent_family_experiment(&mixed, &job, 10).unwrap_err(), Error::MixedStrata);
    }
}
