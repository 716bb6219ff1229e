//! Integral first homology of a square-tiled surface.
//!
//! Cellular chains: edge `b_i` is the bottom side of square `i` (pointing
//! right), `l_i` its left side (pointing up). Square `i` has boundary
//! `b_i + l_{i·σ_h} − b_{i·σ_v} − l_i`. A basis of `H_1` comes from a
//! tree–cotree decomposition: a spanning tree of the vertices, a spanning tree
//! of the dual graph avoiding it, and the `2g` leftover edges, each closed up
//! through the tree.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::Ratio;

use super::{Move, Origami, Permutation};
use crate::error::{Error, Result};

/// Dense integer matrix with overflow-checked products.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i128>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i128>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = IntMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    fn from_columns(rows: usize, cols: &[Vec<i128>]) -> Self {
        let mut m = IntMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn checked_mul(&self, rhs: &IntMatrix) -> Option<IntMatrix> {
        assert_eq!(self.cols, rhs.rows, "shape mismatch");
        let mut out = IntMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let p = a.checked_mul(rhs[(k, j)])?;
                    out[(i, j)] = out[(i, j)].checked_add(p)?;
                }
            }
        }
        Some(out)
    }

    pub fn checked_pow(&self, mut e: u64) -> Option<IntMatrix> {
        let mut base = self.clone();
        let mut acc = IntMatrix::identity(self.rows);
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

    pub fn mul_vec(&self, v: &[i128]) -> Vec<i128> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }

    pub fn column(&self, j: usize) -> Vec<i128> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i128;
    fn index(&self, (i, j): (usize, usize)) -> &i128 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i128 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<i128>> =
            (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)]).collect()).collect();
        write!(f, "{rows:?}")
    }
}

/// `Mᵀ J M == J`, exactly.
pub fn is_symplectic(m: &IntMatrix, j: &IntMatrix) -> bool {
    m.transpose().checked_mul(j).and_then(|x| x.checked_mul(m)).is_some_and(|x| x == *j)
}

/// Chain-level edge indices: `b_i` is `i`, `l_i` is `n + i`.
fn b(i: usize) -> usize {
    i
}

fn l(n: usize, i: usize) -> usize {
    n + i
}

/// Boundary of square `q` as (edge, coefficient) pairs.
fn square_boundary(o: &Origami, q: usize) -> [(usize, i128); 4] {
    let n = o.n();
    [
        (b(q), 1),
        (l(n, o.sigma_h.apply(q)), 1),
        (b(o.sigma_v.apply(q)), -1),
        (l(n, q), -1),
    ]
}

/// Chain map on edges induced by a generator move, from `o` to `o.act(m)`
/// (before canonical relabelling). Columns are images of edges.
pub(crate) fn move_chain_map(o: &Origami, m: Move) -> IntMatrix {
    let n = o.n();
    let h = &o.sigma_h;
    let v = &o.sigma_v;
    let hi = h.inverse();
    let vi = v.inverse();
    let mut c = IntMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        match m {
            Move::T => {
                c[(b(hi.apply(i)), b(i))] = 1;
                c[(b(hi.apply(i)), l(n, i))] += 1;
                c[(l(n, i), l(n, i))] += 1;
            }
            Move::TInv => {
                c[(b(h.apply(i)), b(i))] = 1;
                c[(l(n, i), l(n, i))] += 1;
                c[(b(i), l(n, i))] -= 1;
            }
            Move::S => {
                c[(l(n, vi.apply(i)), b(i))] = 1;
                c[(b(i), l(n, i))] = -1;
            }
            Move::SInv => {
                c[(b(hi.apply(i)), l(n, i))] = 1;
                c[(l(n, i), b(i))] = -1;
            }
        }
    }
    c
}

/// Chain map of the renaming `i ↦ i·τ`.
pub(crate) fn relabel_chain_map(tau: &Permutation) -> IntMatrix {
    let n = tau.len();
    let mut c = IntMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        c[(b(tau.apply(i)), b(i))] = 1;
        c[(l(n, tau.apply(i)), l(n, i))] = 1;
    }
    c
}

/// Tree–cotree basis of `H_1(o; Z)` with its intersection form.
#[derive(Debug, Clone, PartialEq)]
pub struct HomologyBasis {
    n: usize,
    genus: usize,
    /// Edges outside both trees; basis cycle `k` is closed up from `leftover[k]`.
    leftover: Vec<usize>,
    /// Basis cycles as edge chains.
    cycles: Vec<Vec<i128>>,
    /// Dual-tree squares in breadth-first order from square 0, with the edge
    /// to the parent square.
    dual_order: Vec<(usize, Option<(usize, usize)>)>,
    boundaries: Vec<Vec<i128>>,
    intersection: IntMatrix,
}

impl HomologyBasis {
    pub fn new(o: &Origami) -> Result<Self> {
        let n = o.n();
        let e = 2 * n;
        let boundaries: Vec<Vec<i128>> = (0..n)
            .map(|q| {
                let mut v = vec![0; e];
                for (edge, c) in square_boundary(o, q) {
                    v[edge] += c;
                }
                v
            })
            .collect();

        // vertex classes: bottom-left corners, glued at shared top-right corners
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..n {
            let a = find(&mut parent, o.sigma_v.apply(o.sigma_h.apply(i)));
            let c = find(&mut parent, o.sigma_h.apply(o.sigma_v.apply(i)));
            parent[a] = c;
        }
        let mut vertex_of = vec![0; n];
        let mut roots: Vec<usize> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            vertex_of[i] = match roots.iter().position(|&x| x == r) {
                Some(k) => k,
                None => {
                    roots.push(r);
                    roots.len() - 1
                }
            };
        }
        let nv = roots.len();
        let genus = (n + 2 - nv) / 2;
        if n + 2 != nv + 2 * genus {
            return Err(Error::MalformedOrigami("Euler characteristic is odd".into()));
        }
        let endpoints: Vec<(usize, usize)> = (0..e)
            .map(|edge| {
                if edge < n {
                    (vertex_of[edge], vertex_of[o.sigma_h.apply(edge)])
                } else {
                    let i = edge - n;
                    (vertex_of[i], vertex_of[o.sigma_v.apply(i)])
                }
            })
            .collect();

        // spanning tree of the 1-skeleton; path[v] = chain from the root to v
        let mut in_tree = vec![false; e];
        let mut path: Vec<Option<Vec<i128>>> = vec![None; nv];
        path[vertex_of[0]] = Some(vec![0; e]);
        let mut queue = VecDeque::from([vertex_of[0]]);
        while let Some(u) = queue.pop_front() {
            for edge in 0..e {
                let (s, t) = endpoints[edge];
                let (other, sign) = if s == u { (t, 1) } else if t == u { (s, -1) } else { continue };
                if path[other].is_none() {
                    let mut p = path[u].clone().expect("visited");
                    p[edge] += sign;
                    path[other] = Some(p);
                    in_tree[edge] = true;
                    queue.push_back(other);
                }
            }
        }
        let path: Vec<Vec<i128>> = path.into_iter().map(|p| p.expect("1-skeleton is connected")).collect();

        // dual spanning tree over edges not in the primal tree
        let mut in_cotree = vec![false; e];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut dual_order = vec![(0, None)];
        let mut k = 0;
        while k < dual_order.len() {
            let q = dual_order[k].0;
            k += 1;
            for (edge, _) in square_boundary(o, q) {
                if in_tree[edge] || in_cotree[edge] {
                    continue;
                }
                let other = edge_other_square(o, edge, q);
                if !seen[other] {
                    seen[other] = true;
                    in_cotree[edge] = true;
                    dual_order.push((other, Some((edge, q))));
                }
            }
        }

        let leftover: Vec<usize> = (0..e).filter(|&x| !in_tree[x] && !in_cotree[x]).collect();
        if leftover.len() != 2 * genus {
            return Err(Error::MalformedOrigami("tree-cotree count mismatch".into()));
        }
        let cycles: Vec<Vec<i128>> = leftover
            .iter()
            .map(|&edge| {
                let (s, t) = endpoints[edge];
                let mut c: Vec<i128> = path[s].iter().zip(&path[t]).map(|(a, b)| a - b).collect();
                c[edge] += 1;
                c
            })
            .collect();

        let mut basis = HomologyBasis {
            n,
            genus,
            leftover,
            cycles,
            dual_order,
            boundaries,
            intersection: IntMatrix::zeros(0, 0),
        };
        basis.intersection = basis.intersection_form(o, &in_tree)?;
        Ok(basis)
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn rank(&self) -> usize {
        2 * self.genus
    }

    pub fn cycles(&self) -> &[Vec<i128>] {
        &self.cycles
    }

    /// Algebraic intersection numbers of the basis cycles.
    pub fn intersection(&self) -> &IntMatrix {
        &self.intersection
    }

    /// Coordinates of an edge cycle in the basis.
    pub fn coordinates(&self, cycle: &[i128]) -> Vec<i128> {
        // add square boundaries top-down until every dual-tree edge vanishes
        let mut z = cycle.to_vec();
        let mut a = vec![0i128; self.n];
        for &(q, link) in &self.dual_order {
            if let Some((edge, p)) = link {
                let cq = self.boundaries[q][edge];
                let need = z[edge] + a[p] * self.boundaries[p][edge];
                a[q] = -need / cq;
            }
        }
        for (q, &aq) in a.iter().enumerate() {
            if aq != 0 {
                for (zi, bi) in z.iter_mut().zip(&self.boundaries[q]) {
                    *zi += aq * bi;
                }
            }
        }
        self.leftover.iter().map(|&edge| z[edge]).collect()
    }

    /// Cup-product Gram matrix of the dual cocycles, inverted and transposed.
    fn intersection_form(&self, o: &Origami, in_tree: &[bool]) -> Result<IntMatrix> {
        let n = self.n;
        let r = self.rank();
        let cocycles: Vec<Vec<i128>> = (0..r)
            .map(|k| {
                let mut alpha = vec![0i128; 2 * n];
                for (j, &edge) in self.leftover.iter().enumerate() {
                    alpha[edge] = i128::from(j == k);
                }
                // closedness on each square, solved from the leaves of the dual tree up
                for &(q, link) in self.dual_order.iter().rev() {
                    if let Some((edge, _)) = link {
                        let known: i128 = self.boundaries[q]
                            .iter()
                            .enumerate()
                            .filter(|&(x, _)| x != edge)
                            .map(|(x, c)| c * alpha[x])
                            .sum();
                        alpha[edge] = -known / self.boundaries[q][edge];
                    }
                }
                debug_assert!(in_tree.iter().enumerate().all(|(x, &t)| !t || alpha[x] == 0));
                alpha
            })
            .collect();
        let mut gram = vec![vec![Ratio::from_integer(0i128); r]; r];
        for (i, ai) in cocycles.iter().enumerate() {
            for (j, aj) in cocycles.iter().enumerate() {
                let mut s = 0i128;
                for q in 0..n {
                    let bottom = b(q);
                    let left = l(n, q);
                    let right = l(n, o.sigma_h.apply(q));
                    let top = b(o.sigma_v.apply(q));
                    s += ai[bottom] * aj[right] - ai[left] * aj[top];
                }
                gram[i][j] = Ratio::from_integer(s);
            }
        }
        let inv = invert_rational(gram).ok_or_else(|| Error::MalformedOrigami("degenerate cup product".into()))?;
        let mut j = IntMatrix::zeros(r, r);
        for a in 0..r {
            for c in 0..r {
                let x = inv[c][a];
                if !x.is_integer() {
                    return Err(Error::MalformedOrigami("intersection form is not unimodular".into()));
                }
                j[(a, c)] = x.to_integer();
            }
        }
        Ok(j)
    }

    /// Matrix of a chain map `from → to` in the two bases, or an error if it
    /// does not send basis cycles to cycles.
    pub(crate) fn induced(&self, chain_map: &IntMatrix, to: &HomologyBasis) -> Result<IntMatrix> {
        let cols: Vec<Vec<i128>> = self
            .cycles
            .iter()
            .map(|c| {
                let img = chain_map.mul_vec(c);
                to.coordinates(&img)
            })
            .collect();
        Ok(IntMatrix::from_columns(to.rank(), &cols))
    }

    #[cfg(test)]
    pub(crate) fn is_cycle(o: &Origami, chain: &[i128]) -> bool {
        let n = o.n();
        let mut vertex_sum = vec![0i128; n];
        // boundary in terms of bottom-left corner labels, compared after gluing
        for i in 0..n {
            vertex_sum[o.sigma_h.apply(i)] += chain[i];
            vertex_sum[i] -= chain[i];
            vertex_sum[o.sigma_v.apply(i)] += chain[n + i];
            vertex_sum[i] -= chain[n + i];
        }
        // merge labels of the same vertex
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for i in 0..n {
            let a = find(&mut parent, o.sigma_v.apply(o.sigma_h.apply(i)));
            let c = find(&mut parent, o.sigma_h.apply(o.sigma_v.apply(i)));
            parent[a] = c;
        }
        let mut totals = vec![0i128; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            totals[r] += vertex_sum[i];
        }
        totals.iter().all(|&t| t == 0)
    }
}

/// The square on the other side of `edge` from `q`.
fn edge_other_square(o: &Origami, edge: usize, q: usize) -> usize {
    let n = o.n();
    if edge < n {
        // bottom of `edge`, top of the square below it
        let below = o.sigma_v.inverse().apply(edge);
        if q == edge { below } else { edge }
    } else {
        let i = edge - n;
        let left = o.sigma_h.inverse().apply(i);
        if q == i { left } else { i }
    }
}

fn invert_rational(mut a: Vec<Vec<Ratio<i128>>>) -> Option<Vec<Vec<Ratio<i128>>>> {
    let n = a.len();
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    let mut inv: Vec<Vec<Ratio<i128>>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { one } else { zero }).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != zero)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col && a[r][col] != zero {
                let f = a[r][col];
                for j in 0..n {
                    let (x, y) = (a[col][j], inv[col][j]);
                    a[r][j] -= f * x;
                    inv[r][j] -= f * y;
                }
            }
        }
    }
    Some(inv)
}
