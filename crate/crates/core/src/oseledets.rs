//! Lyapunov spectra, Oseledets flags and equivariance defects.
//!
//! Spectra come from orthonormal-frame evolution (QR after every increment).
//! Flags are finite-horizon proxies computed pointwise: the forward flag
//! `E_{≥j}(x)` from the slow right-singular directions of the forward product,
//! the backward flag `E_{≤j}(x)` from the same construction on the backward
//! product.

use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{
    cocycle_step, derive_seed, random_base_point_with, random_frame, CocycleIncrement, FiberCocycle,
    SheetPoint, Trajectory, TrajectoryKind, TrajectoryWalker,
};
use crate::error::{Error, Result};
use crate::sl2::{FlowKind, Lattice};

/// Exponents closer than `max(CLUSTER_GAP_FLOOR, 3·stderr)` share a block.
pub const CLUSTER_GAP_FLOOR: f64 = 0.05;
/// Bootstrap stderr above this marks the spectrum as not converged.
pub const CONVERGENCE_STDERR: f64 = 0.1;
/// Flow time per bootstrap block.
pub const DEFAULT_BLOCK_TIME: f64 = 50.0;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x0b00_75ed;
const FRAME_SALT: u64 = 0x6672_616d_6521;
/// Flow step used by flag estimation.
pub const FLAG_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Block exponents, strictly descending.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Bootstrap standard error of each block exponent.
    pub stderr: Vec<f64>,
    /// All `dim` exponents before grouping, descending.
    pub raw_exponents: Vec<f64>,
    pub raw_stderr: Vec<f64>,
    /// Total valid flow time.
    pub horizon: f64,
    /// Time average of `log|det|` along the valid trajectories.
    pub log_det_rate: f64,
    pub converged: bool,
    /// Fraction of trajectories aborted by the cusp guard.
    pub truncation_fraction: f64,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.raw_exponents.len()
    }

    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    pub fn block_count(&self) -> usize {
        self.exponents.len()
    }

    /// `Σ multiplicity · exponent`.
    pub fn weighted_sum(&self) -> f64 {
        self.exponents.iter().zip(&self.multiplicities).map(|(l, &m)| l * m as f64).sum()
    }

    /// Largest `|λ_i + λ_{d+1-i}|` over the raw exponents.
    pub fn symmetry_defect(&self) -> f64 {
        let r = &self.raw_exponents;
        (0..r.len()).map(|i| (r[i] + r[r.len() - 1 - i]).abs()).fold(0.0, f64::max)
    }

    /// Column ranges of each block in a fast-to-slow ordered basis.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.multiplicities.len());
        let mut start = 0;
        for &m in &self.multiplicities {
            out.push(start..start + m);
            start += m;
        }
        out
    }

    /// `exponent,multiplicity,stderr,horizon,truncation_fraction`, one row per block.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "exponent,multiplicity,stderr,horizon,truncation_fraction")?;
        for i in 0..self.exponents.len() {
            writeln!(
                w,
                "{:.17e},{},{:.17e},{:.17e},{:.17e}",
                self.exponents[i], self.multiplicities[i], self.stderr[i], self.horizon, self.truncation_fraction
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    log_growth: Vec<f64>,
    log_det: f64,
    time: f64,
}

/// Streaming, mergeable accumulator of frame-growth statistics.
///
/// Merging is concatenation, so merging per-trajectory accumulators in index
/// order gives results independent of how the work was scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumAccumulator {
    dim: usize,
    block_time: f64,
    blocks: Vec<Block>,
    trajectories: usize,
    invalid: usize,
}

impl SpectrumAccumulator {
    pub fn new(dim: usize) -> Self {
        SpectrumAccumulator::with_block_time(dim, DEFAULT_BLOCK_TIME)
    }

    pub fn with_block_time(dim: usize, block_time: f64) -> Self {
        SpectrumAccumulator { dim, block_time, blocks: Vec::new(), trajectories: 0, invalid: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_time(&self) -> f64 {
        self.blocks.iter().map(|b| b.time).sum()
    }

    /// Evolves `frame` (a `dim × dim` orthonormal matrix) through the
    /// increments of one trajectory. An error item marks the trajectory as
    /// invalid and discards its contribution.
    pub fn push_trajectory<I>(&mut self, increments: I, mut frame: DMatrix<f64>) -> Result<()>
    where
        I: IntoIterator<Item = Result<CocycleIncrement>>,
    {
        if frame.nrows() != self.dim || frame.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: frame.nrows() });
        }
        self.trajectories += 1;
        let mut blocks = Vec::new();
        let mut current = self.empty_block();
        for inc in increments {
            let inc = match inc {
                Ok(inc) => inc,
                Err(Error::CuspExcursion(_)) => {
                    self.invalid += 1;
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            if inc.matrix.nrows() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: inc.matrix.nrows() });
            }
            let det = inc.matrix.determinant().abs();
            if !(det > 0.0) || !det.is_finite() {
                return Err(Error::SingularImage("cocycle increment".into()));
            }
            let qr = (&inc.matrix * &frame).qr();
            let r = qr.r();
            for i in 0..self.dim {
                current.log_growth[i] += r[(i, i)].abs().ln();
            }
            frame = qr.q();
            current.log_det += det.ln();
            current.time += inc.dt.abs();
            if current.time >= self.block_time {
                blocks.push(std::mem::replace(&mut current, self.empty_block()));
            }
        }
        if current.time > 0.0 {
            blocks.push(current);
        }
        self.blocks.extend(blocks);
        Ok(())
    }

    fn empty_block(&self) -> Block {
        Block { log_growth: vec![0.0; self.dim], log_det: 0.0, time: 0.0 }
    }

    pub fn merge(mut self, other: SpectrumAccumulator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.blocks.extend(other.blocks);
        self.trajectories += other.trajectories;
        self.invalid += other.invalid;
        Ok(self)
    }

    pub fn finish(&self) -> Result<Spectrum> {
        if self.trajectories > 0 && self.invalid == self.trajectories {
            return Err(Error::AllTrajectoriesInvalid);
        }
        let horizon = self.total_time();
        if self.blocks.is_empty() || horizon <= 0.0 {
            return Err(Error::AllTrajectoriesInvalid);
        }
        let d = self.dim;
        let point = ratio_estimate(self.blocks.iter(), d);

        // order columns by exponent, descending
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| point[b].total_cmp(&point[a]));
        let raw: Vec<f64> = order.iter().map(|&i| point[i]).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
        let n = self.blocks.len();
        let resamples: Vec<Vec<f64>> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let est = ratio_estimate((0..n).map(|_| &self.blocks[rng.random_range(0..n)]), d);
                order.iter().map(|&i| est[i]).collect()
            })
            .collect();
        let raw_stderr: Vec<f64> = (0..d).map(|i| std_dev(resamples.iter().map(|r| r[i]))).collect();

        let clusters = cluster(&raw, &raw_stderr);
        let mut exponents = Vec::new();
        let mut multiplicities = Vec::new();
        let mut stderr = Vec::new();
        for c in &clusters {
            let mean = |v: &[f64]| v[c.clone()].iter().sum::<f64>() / c.len() as f64;
            exponents.push(mean(&raw));
            multiplicities.push(c.len());
            stderr.push(std_dev(resamples.iter().map(|r| mean(r))));
        }
        let log_det_rate = self.blocks.iter().map(|b| b.log_det).sum::<f64>() / horizon;
        let converged = stderr.iter().all(|&s| s <= CONVERGENCE_STDERR);
        Ok(Spectrum {
            exponents,
            multiplicities,
            stderr,
            raw_exponents: raw,
            raw_stderr,
            horizon,
            log_det_rate,
            converged,
            truncation_fraction: self.invalid as f64 / self.trajectories.max(1) as f64,
        })
    }
}

fn ratio_estimate<'a>(blocks: impl Iterator<Item = &'a Block>, d: usize) -> Vec<f64> {
    let mut sums = vec![0.0; d];
    let mut time = 0.0;
    for b in blocks {
        for (s, g) in sums.iter_mut().zip(&b.log_growth) {
            *s += g;
        }
        time += b.time;
    }
    sums.into_iter().map(|s| if time > 0.0 { s / time } else { 0.0 }).collect()
}

fn std_dev(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Groups descending exponents whose neighbours are within the resolution.
fn cluster(raw: &[f64], se: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..raw.len() {
        let resolution = CLUSTER_GAP_FLOOR.max(3.0 * se[i - 1].max(se[i]));
        if raw[i - 1] - raw[i] >= resolution {
            out.push(start..i);
            start = i;
        }
    }
    if !raw.is_empty() {
        out.push(start..raw.len());
    }
    out
}

fn trajectory_frame(seed: u64, dim: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ FRAME_SALT);
    random_frame(&mut rng, dim, dim)
}

/// Spectrum of already-sampled trajectories; invalid ones count toward the
/// truncation fraction only.
pub fn lyapunov_spectrum(trajectories: &[Trajectory], dim: usize) -> Result<Spectrum> {
    if trajectories.is_empty() {
        return Err(Error::AllTrajectoriesInvalid);
    }
    let mut acc = SpectrumAccumulator::new(dim);
    for t in trajectories {
        if t.valid {
            acc.push_trajectory(t.increments.iter().cloned().map(Ok), trajectory_frame(t.seed, dim))?;
        } else {
            acc.push_trajectory([Err(Error::CuspExcursion(0))], DMatrix::identity(dim, dim))?;
        }
    }
    let horizon = acc.total_time();
    if horizon < 100.0 * dim as f64 {
        return Err(Error::InvalidArgument(format!(
            "total time {horizon} is below the minimum {} for dimension {dim}",
            100 * dim
        )));
    }
    acc.finish()
}

/// Parameters of a parallel spectrum estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumJob {
    pub trajectories: usize,
    pub steps: usize,
    pub dt: f64,
    pub kind: TrajectoryKind,
    pub seed: u64,
}

impl SpectrumJob {
    pub fn geodesic(trajectories: usize, steps: usize, seed: u64) -> Self {
        SpectrumJob { trajectories, steps, dt: 1.0, kind: TrajectoryKind::GEODESIC, seed }
    }
}

/// Samples and accumulates trajectories in parallel (on the current rayon
/// pool). Trajectory `i` draws its start point, sheet and frame from stream
/// `i` of the master seed, so the result does not depend on the thread count.
pub fn estimate_spectrum<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    job: &SpectrumJob,
) -> Result<Spectrum> {
    if job.trajectories == 0 || job.steps == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory step".into()));
    }
    if cocycle.lattice_mode() != lattice.mode() {
        return Err(Error::ModeMismatch);
    }
    let d = cocycle.dim();
    let parts: Vec<Result<SpectrumAccumulator>> = (0..job.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, i as u64));
            let base = random_base_point_with(&mut rng, lattice);
            let sheet = rng.random_range(0..cocycle.sheet_count());
            let frame = random_frame(&mut rng, d, d);
            let walk_seed = rng.random();
            let walker = TrajectoryWalker::new(
                SheetPoint::new(base, sheet),
                job.steps,
                job.dt,
                job.kind,
                cocycle,
                lattice,
                walk_seed,
            );
            let mut acc = SpectrumAccumulator::new(d);
            acc.push_trajectory(walker, frame)?;
            Ok(acc)
        })
        .collect();
    let mut total = SpectrumAccumulator::new(d);
    for p in parts {
        total = total.merge(p?)?;
    }
    total.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagKind {
    /// `E_{≥1} ⊃ E_{≥2} ⊃ …`
    Forward,
    /// `E_{≤1} ⊂ E_{≤2} ⊂ …`
    Backward,
    /// `F_{≥1} ⊃ F_{≥2} ⊃ …`
    Inert,
}

/// A flag at a point; `subspaces[j - 1]` is the `j`-th member, stored as a
/// matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub base: SheetPoint,
    pub kind: FlagKind,
    pub subspaces: Vec<DMatrix<f64>>,
}

impl Flag {
    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    /// The member with 1-based index `j`.
    pub fn member(&self, j: usize) -> Result<&DMatrix<f64>> {
        if j == 0 || j > self.subspaces.len() {
            return Err(Error::InvalidArgument(format!("flag index {j} out of 1..={}", self.subspaces.len())));
        }
        Ok(&self.subspaces[j - 1])
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(|s| s.ncols()).collect()
    }

    /// Worst containment defect between consecutive members.
    pub fn nesting_defect(&self) -> f64 {
        self.subspaces
            .windows(2)
            .map(|w| match self.kind {
                FlagKind::Backward => containment_defect(&w[0], &w[1]),
                _ => containment_defect(&w[1], &w[0]),
            })
            .fold(0.0, f64::max)
    }
}

/// Orthonormal basis for the column span of `m`.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

/// Sine of the largest principal angle between two column spans; `1` when
/// the dimensions differ.
pub fn subspace_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    if u.ncols() != v.ncols() || u.nrows() != v.nrows() {
        return 1.0;
    }
    if u.ncols() == 0 {
        return 0.0;
    }
    let u = orthonormalize(u);
    let v = orthonormalize(v);
    let residual = &v - &u * (u.transpose() * &v);
    spectral_norm(&residual).min(1.0)
}

/// `‖(I − P_big) small‖`: zero iff span(small) ⊂ span(big).
pub fn containment_defect(small: &DMatrix<f64>, big: &DMatrix<f64>) -> f64 {
    if small.ncols() == 0 {
        return 0.0;
    }
    let s = orthonormalize(small);
    let b = orthonormalize(big);
    spectral_norm(&(&s - &b * (b.transpose() * &s))).min(1.0)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Increments of the geodesic flow from `x` for time `sign · horizon`.
fn geodesic_increments<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    sign: f64,
    horizon: f64,
    cocycle: &C,
    lattice: &Lattice,
) -> Result<Vec<CocycleIncrement>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let n = (horizon / FLAG_STEP).ceil() as usize;
    let dt = sign * horizon / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut p = x.clone();
    for _ in 0..n {
        let inc = cocycle_step(&p, FlowKind::Geodesic, dt, cocycle, lattice)?;
        p = inc.to_point();
        out.push(inc);
    }
    Ok(out)
}

/// Right-singular frame of `A_n ⋯ A_1` (fast directions first) and the
/// per-unit-time singular exponents, by QR iteration on transposes.
fn right_singular_frame(increments: &[CocycleIncrement], dim: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut q = trajectory_frame(0, dim);
    let mut logs = vec![0.0; dim];
    let mut time = 0.0;
    for inc in increments.iter().rev() {
        let qr = (inc.matrix.transpose() * &q).qr();
        let r = qr.r();
        for (i, l) in logs.iter_mut().enumerate() {
            *l += r[(i, i)].abs().ln();
        }
        q = qr.q();
        time += inc.dt.abs();
    }
    (q, logs.into_iter().map(|l| l / time).collect())
}

/// Fails unless the singular exponents separate at `boundary` by at least
/// half of the spectral gap there.
fn check_gap(sv: &[f64], boundary: usize, spectral_gap: f64) -> Result<()> {
    let gap = sv[boundary - 1] - sv[boundary];
    let threshold = CLUSTER_GAP_FLOOR.max(0.5 * spectral_gap);
    if gap < threshold {
        return Err(Error::HorizonTooShort { gap, threshold });
    }
    Ok(())
}

fn check_spectrum<C: FiberCocycle + ?Sized>(cocycle: &C, spectrum: &Spectrum) -> Result<()> {
    if spectrum.dim() != cocycle.dim() {
        return Err(Error::DimensionMismatch { expected: cocycle.dim(), got: spectrum.dim() });
    }
    Ok(())
}

/// `E_{≥j}(x)` for each spectral block `j`, from the forward product over `[0, T]`.
pub fn forward_flag<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    cocycle: &C,
    lattice: &Lattice,
    horizon: f64,
    spectrum: &Spectrum,
) -> Result<Flag> {
    check_spectrum(cocycle, spectrum)?;
    let d = cocycle.dim();
    let incs = geodesic_increments(x, 1.0, horizon, cocycle, lattice)?;
    let (q, sv) = right_singular_frame(&incs, d);
    let ranges = spectrum.block_ranges();
    let mut subspaces = Vec::with_capacity(ranges.len());
    for (j, r) in ranges.iter().enumerate() {
        if j > 0 {
            check_gap(&sv, r.start, spectrum.exponents[j - 1] - spectrum.exponents[j])?;
        }
        subspaces.push(q.columns(r.start, d - r.start).into_owned());
    }
    Ok(Flag { base: x.clone(), kind: FlagKind::Forward, subspaces })
}

/// `E_{≤j}(x)` for each spectral block `j`, from the backward product over `[−T, 0]`.
pub fn backward_flag<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    cocycle: &C,
    lattice: &Lattice,
    horizon: f64,
    spectrum: &Spectrum,
) -> Result<Flag> {
    check_spectrum(cocycle, spectrum)?;
    let d = cocycle.dim();
    let incs = geodesic_increments(x, -1.0, horizon, cocycle, lattice)?;
    // backward-fast directions are forward-slow: block j sits at the tail
    let (q, sv) = right_singular_frame(&incs, d);
    let ranges = spectrum.block_ranges();
    let mut subspaces = Vec::with_capacity(ranges.len());
    for (j, r) in ranges.iter().enumerate() {
        let dim_le = r.end;
        if j + 1 < ranges.len() {
            check_gap(&sv, d - dim_le, spectrum.exponents[j] - spectrum.exponents[j + 1])?;
        }
        subspaces.push(q.columns(d - dim_le, dim_le).into_owned());
    }
    Ok(Flag { base: x.clone(), kind: FlagKind::Backward, subspaces })
}

/// `E_1(x)` by pushing a generic frame from `a^{−T} x` forward to `x`.
pub fn top_space_e1<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    cocycle: &C,
    lattice: &Lattice,
    horizon: f64,
    spectrum: &Spectrum,
) -> Result<DMatrix<f64>> {
    check_spectrum(cocycle, spectrum)?;
    if spectrum.block_count() < 2 {
        return Err(Error::DegenerateSpectrum);
    }
    let d = cocycle.dim();
    let m = spectrum.multiplicities[0];
    let back = geodesic_increments(x, -1.0, horizon, cocycle, lattice)?;
    let mut frame = trajectory_frame(1, d).columns(0, m).into_owned();
    let mut logs = vec![0.0; m];
    let mut time = 0.0;
    // walk the backward increments in reverse, each inverted exactly by word
    for inc in back.iter().rev() {
        let (mat, _) = cocycle.word_matrix(inc.sheet_to, &inc.word.inverse())?;
        let qr = (mat * &frame).qr();
        let r = qr.r();
        for (i, l) in logs.iter_mut().enumerate() {
            *l += r[(i, i)].abs().ln();
        }
        frame = qr.q();
        time += inc.dt.abs();
    }
    let slowest_top = logs.iter().map(|l| l / time).fold(f64::INFINITY, f64::min);
    let threshold = spectrum.exponents[1] + CLUSTER_GAP_FLOOR.max(0.5 * (spectrum.exponents[0] - spectrum.exponents[1]));
    if slowest_top < threshold {
        return Err(Error::HorizonTooShort { gap: slowest_top - spectrum.exponents[1], threshold: threshold - spectrum.exponents[1] });
    }
    Ok(frame)
}

/// `‖g_*(V_j(x)) − V_j(gx)‖` where `g` is the time-`s` map of `motion` and
/// `V_j` is the `j`-th member of the forward or backward flag.
#[allow(clippy::too_many_arguments)]
pub fn flag_equivariance_defect<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    kind: FlagKind,
    j: usize,
    motion: FlowKind,
    s: f64,
    cocycle: &C,
    lattice: &Lattice,
    horizon: f64,
    spectrum: &Spectrum,
) -> Result<f64> {
    let flag_at = |p: &SheetPoint| match kind {
        FlagKind::Forward => forward_flag(p, cocycle, lattice, horizon, spectrum),
        FlagKind::Backward => backward_flag(p, cocycle, lattice, horizon, spectrum),
        FlagKind::Inert => Err(Error::InvalidArgument("inert flags are estimated by the rigidity probes".into())),
    };
    let inc = cocycle_step(x, motion, s, cocycle, lattice)?;
    let here = flag_at(x)?;
    let there = flag_at(&inc.to_point())?;
    let pushed = &inc.matrix * here.member(j)?;
    Ok(subspace_distance(&pushed, there.member(j)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{random_base_point, sample_trajectory};
    use crate::representation::{build_representation, sym_power, Representation};
    use crate::sl2::LatticeMode;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let e1 = dmatrix![1.0; 0.0];
        let e2 = dmatrix![0.0; 1.0];
        let diag = dmatrix![1.0; 1.0] / 2f64.sqrt();
        assert!(subspace_distance(&e1, &e1) < 1e-15);
        assert!((subspace_distance(&e1, &e2) - 1.0).abs() < 1e-15);
        assert!((subspace_distance(&e1, &diag) - (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-12);
        assert_eq!(subspace_distance(&e1, &DMatrix::identity(2, 2)), 1.0);
    }

    #[test]
    fn clustering() {
        let c = cluster(&[1.0, 0.98, 0.0, -1.0], &[0.001; 4]);
        assert_eq!(c, vec![0..2, 2..3, 3..4]);
        let c = cluster(&[1.0, 0.5, 0.0], &[0.2; 3]);
        assert_eq!(c, vec![0..3]);
    }

    fn spectrum_of(rep: &Representation, lat: &Lattice, steps: usize) -> Spectrum {
        estimate_spectrum(rep, lat, &SpectrumJob::geodesic(4, steps, 7)).unwrap()
    }

    #[test]
    fn trivial_rep_is_flat() {
        let lat = Lattice::free();
        let s = spectrum_of(&Representation::trivial(3, LatticeMode::Free), &lat, 500);
        assert_eq!(s.multiplicities, vec![3]);
        assert!(s.exponents[0].abs() < 1e-12);
        assert!(top_space_e1(&SheetPoint::from(random_base_point(1, &lat)), &Representation::trivial(3, LatticeMode::Free), &lat, 20.0, &s).is_err());
    }

    #[test]
    fn standard_rep_spectrum_and_flags() {
        let lat = Lattice::sl2z();
        let rep = Representation::standard(&lat);
        let s = spectrum_of(&rep, &lat, 2500);
        assert_eq!(s.multiplicities, vec![1, 1]);
        assert!((s.exponents[0] - 1.0).abs() < 0.05, "{:?}", s.exponents);
        assert!(s.weighted_sum().abs() < 1e-6);

        let x = SheetPoint::from(random_base_point(3, &lat));
        let fwd = forward_flag(&x, &rep, &lat, 50.0, &s).unwrap();
        assert_eq!(fwd.dims(), vec![2, 1]);
        assert!(fwd.nesting_defect() < 1e-8);
        let bwd = backward_flag(&x, &rep, &lat, 50.0, &s).unwrap();
        assert_eq!(bwd.dims(), vec![1, 2]);

        // oracle: E_1 = span(h e1), E_{≥2} = span(h e2) for the stored representative
        let h = x.base.rep().to_dmatrix();
        let he1 = h.columns(0, 1).into_owned();
        let he2 = h.columns(1, 1).into_owned();
        assert!(subspace_distance(fwd.member(2).unwrap(), &he2) < 1e-8);
        assert!(subspace_distance(bwd.member(1).unwrap(), &he1) < 1e-8);
        let e1 = top_space_e1(&x, &rep, &lat, 50.0, &s).unwrap();
        assert!(subspace_distance(&e1, &he1) < 1e-8);
    }

    #[test]
    fn csv_shape() {
        let lat = Lattice::free();
        let s = spectrum_of(&Representation::standard(&lat), &lat, 300);
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 1 + s.block_count());
        assert!(csv.starts_with("exponent,multiplicity,stderr,horizon,truncation_fraction"));
    }

    fn rescaled(t: &Trajectory, w: impl Fn(&SheetPoint) -> f64) -> Trajectory {
        let mut t = t.clone();
        for inc in &mut t.increments {
            let f = w(&inc.to_point()) / w(&inc.from_point());
            inc.matrix *= f;
        }
        t
    }

    fn reversed(t: &Trajectory) -> Trajectory {
        let mut t = t.clone();
        t.increments = t.increments.iter().rev().map(|i| i.reversed().unwrap()).collect();
        t
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn finsler_and_reversal(seed in 0u64..1000, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let lat = Lattice::free();
            let rep = build_representation(
                2,
                vec![dmatrix![1.0, 1.0; 1.0, 2.0], dmatrix![2.0, 1.0 + a.abs(); 1.0, 1.0 + a.abs()]],
                LatticeMode::Free,
            ).unwrap();
            let rep = sym_power(&rep, 2).unwrap();
            let x = SheetPoint::from(random_base_point(seed, &lat));
            let t = sample_trajectory(x, 2000, 1.0, TrajectoryKind::WordWalk, &rep, &lat, seed).unwrap();
            let base = lyapunov_spectrum(std::slice::from_ref(&t), 3).unwrap();

            // bounded positive weight of the base point
            let weight = |p: &SheetPoint| 2.0 + (a * p.base.z().re + b * p.base.z().im.ln()).sin();
            let scaled = lyapunov_spectrum(&[rescaled(&t, weight)], 3).unwrap();
            for (u, v) in base.raw_exponents.iter().zip(&scaled.raw_exponents) {
                prop_assert!((u - v).abs() <= base.raw_stderr.iter().cloned().fold(1e-9, f64::max));
            }

            let rev = lyapunov_spectrum(&[reversed(&t)], 3).unwrap();
            for (i, u) in base.raw_exponents.iter().enumerate() {
                let v = rev.raw_exponents[2 - i];
                prop_assert!((u + v).abs() <= 2.0 * base.raw_stderr[i].max(rev.raw_stderr[2 - i]));
            }
            prop_assert!((base.weighted_sum() - base.log_det_rate).abs() < 1e-6);
        }
    }
}
