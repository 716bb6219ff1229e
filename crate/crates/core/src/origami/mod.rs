//! Square-tiled surfaces and their Kontsevich–Zorich cocycle.
//!
//! An origami with `n` squares is a pair of permutations of the squares:
//! `σ_h` sends a square to its right neighbour, `σ_v` to the one above.
//! Permutations act on the right, `i·(στ) = (i·σ)·τ`, so products read left to
//! right. Squares are 0-based internally and 1-based in text.

mod homology;
mod kz;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use homology::{is_symplectic, HomologyBasis, IntMatrix};
pub use kz::{exponent_family_experiment, kz_spectrum, FamilyRow, FamilyTable, KzCocycle};

/// A permutation of `0..n`, acting on the right: `i·σ = σ.apply(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// From the image list; fails unless it is a bijection of `0..n`.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::MalformedOrigami(format!("{images:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation(images))
    }

    /// From 1-based cycles, e.g. `[[1, 2], [3, 5, 4]]`.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut seen = vec![false; n];
        for c in cycles {
            for (k, &a) in c.iter().enumerate() {
                if a == 0 || a > n || seen[a - 1] {
                    return Err(Error::MalformedOrigami(format!("bad cycle entry {a} for n = {n}")));
                }
                seen[a - 1] = true;
                images[a - 1] = c[(k + 1) % c.len()] - 1;
            }
        }
        Ok(Permutation(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Permutation) -> Permutation {
        Permutation(self.0.iter().map(|&i| other.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    /// Cycles (0-based), each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.0.len()];
        let mut out = Vec::new();
        for s in 0..self.0.len() {
            if seen[s] {
                continue;
            }
            let mut c = vec![s];
            seen[s] = true;
            let mut i = self.0[s];
            while i != s {
                seen[i] = true;
                c.push(i);
                i = self.0[i];
            }
            out.push(c);
        }
        out
    }

    /// `τ⁻¹ σ τ`, the permutation induced on labels renamed by `τ`.
    pub fn conjugate_by(&self, tau: &Permutation) -> Permutation {
        tau.inverse().then(self).then(tau)
    }
}

impl fmt::Display for Permutation {
    /// 1-based cycle notation without fixed points; the identity is `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<_> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for c in cycles {
            let items: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "({})", items.join(","))?;
        }
        Ok(())
    }
}

fn parse_cycles(n: usize, text: &str) -> Result<Permutation> {
    let bad = || Error::MalformedOrigami(format!("cannot parse cycles `{text}`"));
    let mut cycles = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let inner_end = rest.find(')').ok_or_else(bad)?;
        if !rest.starts_with('(') {
            return Err(bad());
        }
        let inner = &rest[1..inner_end];
        let cycle: Vec<usize> = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if !cycle.is_empty() {
            cycles.push(cycle);
        }
        rest = rest[inner_end + 1..].trim_start();
    }
    Permutation::from_cycles(n, &cycles)
}

/// Zero orders and genus of an origami's stratum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StratumData {
    /// Zero orders, descending; empty for a torus.
    pub beta: Vec<usize>,
    pub genus: usize,
}

impl fmt::Display for StratumData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.beta.iter().map(|b| b.to_string()).collect();
        write!(f, "H({})", parts.join(","))
    }
}

/// The four generator moves of `SL(2,Z)` on origamis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    S,
    SInv,
    T,
    TInv,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::S, Move::SInv, Move::T, Move::TInv];

    pub fn inverse(self) -> Move {
        match self {
            Move::S => Move::SInv,
            Move::SInv => Move::S,
            Move::T => Move::TInv,
            Move::TInv => Move::T,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Move::S => "S",
            Move::SInv => "S^-1",
            Move::T => "T",
            Move::TInv => "T^-1",
        }
    }
}

/// A connected square-tiled surface.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Origami {
    sigma_h: Permutation,
    sigma_v: Permutation,
}

impl Origami {
    pub fn new(sigma_h: Permutation, sigma_v: Permutation) -> Result<Self> {
        if sigma_h.len() != sigma_v.len() || sigma_h.is_empty() {
            return Err(Error::MalformedOrigami("permutations must act on the same nonempty set".into()));
        }
        let o = Origami { sigma_h, sigma_v };
        if !o.is_transitive() {
            return Err(Error::NotTransitive);
        }
        Ok(o)
    }

    /// The one-square torus.
    pub fn torus() -> Self {
        Origami { sigma_h: Permutation::identity(1), sigma_v: Permutation::identity(1) }
    }

    /// L-shaped surface: a row of `a` squares with a column of `b` squares
    /// rising from the first, `a + b − 1` squares in total.
    pub fn l_shaped(a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::MalformedOrigami("L-shape arms need at least one square".into()));
        }
        let n = a + b - 1;
        let row: Vec<usize> = (1..=a).collect();
        let mut col = vec![1];
        col.extend(a + 1..=n);
        Origami::new(Permutation::from_cycles(n, &[row])?, Permutation::from_cycles(n, &[col])?)
    }

    pub fn n(&self) -> usize {
        self.sigma_h.len()
    }

    pub fn sigma_h(&self) -> &Permutation {
        &self.sigma_h
    }

    pub fn sigma_v(&self) -> &Permutation {
        &self.sigma_v
    }

    fn is_transitive(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in [self.sigma_h.apply(i), self.sigma_v.apply(i)] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// `σ_h σ_v σ_h⁻¹ σ_v⁻¹`: right, up, left, down around a corner.
    pub fn commutator(&self) -> Permutation {
        self.sigma_h.then(&self.sigma_v).then(&self.sigma_h.inverse()).then(&self.sigma_v.inverse())
    }

    pub fn stratum(&self) -> StratumData {
        let mut beta: Vec<usize> =
            self.commutator().cycles().iter().map(|c| c.len() - 1).filter(|&b| b > 0).collect();
        beta.sort_unstable_by(|a, b| b.cmp(a));
        let genus = beta.iter().sum::<usize>() / 2 + 1;
        StratumData { beta, genus }
    }

    pub fn genus(&self) -> usize {
        self.stratum().genus
    }

    /// Image under a generator, with squares labelled as in the chain maps of
    /// [`HomologyBasis`]: `T` keeps `σ_h` and the new square `k` sits on the
    /// bottom edge of old square `k·σ_h`; `S` rotates each square in place.
    pub fn act(&self, m: Move) -> Origami {
        let (h, v) = (&self.sigma_h, &self.sigma_v);
        let (nh, nv) = match m {
            Move::T => (h.clone(), v.then(&h.inverse())),
            Move::TInv => (h.clone(), v.then(h)),
            Move::S => (v.inverse(), h.clone()),
            Move::SInv => (v.clone(), h.inverse()),
        };
        Origami { sigma_h: nh, sigma_v: nv }
    }

    /// Renames square `i` to `i·τ`.
    pub fn relabel(&self, tau: &Permutation) -> Origami {
        Origami { sigma_h: self.sigma_h.conjugate_by(tau), sigma_v: self.sigma_v.conjugate_by(tau) }
    }

    /// Breadth-first relabelling from `start`: neighbours visited right, then up.
    fn bfs_labels(&self, start: usize) -> Permutation {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        label[start] = 0;
        let mut next = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in [self.sigma_h.apply(i), self.sigma_v.apply(i)] {
                if label[j] == usize::MAX {
                    label[j] = next;
                    next += 1;
                    queue.push_back(j);
                }
            }
        }
        Permutation(label)
    }

    /// Lexicographically least BFS relabelling and the renaming that produces
    /// it; ties (automorphisms) resolve to the smallest start square.
    pub fn canonical_with_labels(&self) -> (Origami, Permutation) {
        let mut best: Option<(Origami, Permutation)> = None;
        for s in 0..self.n() {
            let tau = self.bfs_labels(s);
            let o = self.relabel(&tau);
            if best.as_ref().is_none_or(|(b, _)| o < *b) {
                best = Some((o, tau));
            }
        }
        best.expect("origamis are nonempty")
    }

    pub fn canonical(&self) -> Origami {
        self.canonical_with_labels().0
    }

    /// Translation automorphisms: renamings fixing both permutations.
    pub fn automorphism_count(&self) -> usize {
        let c = self.canonical();
        (0..self.n()).filter(|&s| self.relabel(&self.bfs_labels(s)) == c).count()
    }
}

impl fmt::Display for Origami {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; {}; {}", self.n(), self.sigma_h, self.sigma_v)
    }
}

impl FromStr for Origami {
    type Err = Error;

    /// `"n; σ_h; σ_v"` with 1-based cycle notation, e.g. `"3; (1,2); (1,3)"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::MalformedOrigami(format!("expected `n; sigma_h; sigma_v`, got `{s}`")));
        }
        let n: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::MalformedOrigami(format!("bad square count `{}`", parts[0].trim())))?;
        if n == 0 {
            return Err(Error::MalformedOrigami("need at least one square".into()));
        }
        Origami::new(parse_cycles(n, parts[1])?, parse_cycles(n, parts[2])?)
    }
}

/// One labelled edge of the orbit graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitEdge {
    pub source: usize,
    pub generator: Move,
    pub target: usize,
    /// Renaming from the squares of `generator · orbit[source]` to `orbit[target]`.
    pub relabel: Permutation,
}

/// `SL(2,Z)`-orbit of an origami up to relabelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VeechOrbit {
    /// Canonical forms; index 0 is the canonical form of the input.
    pub members: Vec<Origami>,
    /// Edges for all four moves from every member.
    pub edges: Vec<OrbitEdge>,
}

impl VeechOrbit {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn edge(&self, source: usize, m: Move) -> &OrbitEdge {
        &self.edges[4 * source + m.index()]
    }

    /// `source,generator,target` rows for the `S` and `T` edges.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "source,generator,target")?;
        for e in self.edges.iter().filter(|e| matches!(e.generator, Move::S | Move::T)) {
            writeln!(w, "{},{},{}", e.source, e.generator.name(), e.target)?;
        }
        Ok(())
    }
}

/// Breadth-first closure under `S` and `T`.
pub fn veech_orbit(origami: &Origami, max_size: usize) -> Result<VeechOrbit> {
    if max_size == 0 {
        return Err(Error::OrbitOverflow(0));
    }
    let mut members = vec![origami.canonical()];
    let mut index: HashMap<Origami, usize> = HashMap::from([(members[0].clone(), 0)]);
    let mut edges = Vec::new();
    let mut k = 0;
    while k < members.len() {
        for m in Move::ALL {
            let (c, tau) = members[k].act(m).canonical_with_labels();
            let target = match index.get(&c) {
                Some(&t) => t,
                None => {
                    if members.len() == max_size {
                        return Err(Error::OrbitOverflow(max_size));
                    }
                    members.push(c.clone());
                    index.insert(c, members.len() - 1);
                    members.len() - 1
                }
            };
            edges.push(OrbitEdge { source: k, generator: m, target, relabel: tau });
        }
        k += 1;
    }
    Ok(VeechOrbit { members, edges })
}
