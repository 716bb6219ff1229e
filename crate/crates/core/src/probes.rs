//! Numerical probes of the rigidity phenomena for P-invariant lifts.
//!
//! Each probe works pointwise on the projectivized bundle: a base point with a
//! fiber direction, moved by the cocycle of the geodesic or horocycle flow.
//! Reference subspaces (`E_1`, `E_{≥j}`) come from [`crate::oseledets`], so
//! every probe takes the spectrum that fixes the block structure.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{
    cocycle_step, derive_seed, random_base_point_with, random_unit_vector, CocycleIncrement, FiberCocycle,
    SheetPoint,
};
use crate::error::{Error, Result};
use crate::oseledets::{containment_defect, forward_flag, top_space_e1, Spectrum};
use crate::sl2::{FlowKind, Lattice};

/// Horizon used for reference `E_1` and flag estimates inside the probes.
pub const REFERENCE_HORIZON: f64 = 30.0;
/// Samples above this cusp height are excluded from bundle statistics.
pub const COMPACT_HEIGHT: f64 = 10.0;
pub const DEFAULT_ANGLE_TOL: f64 = 1e-2;
pub const ANGLE_TOL_SWEEP: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Eigenvalue cut for the averaged complement projector in the inert-space estimate.
pub const INERT_TOL: f64 = 1e-4;
/// Above this fraction of truncated starts an equidistribution run is flagged.
pub const TRUNCATION_FLAG: f64 = 0.2;
pub const TEST_FAMILY_VERSION: &str = "quadform-bump-v1";
const BLOCK_TIME: f64 = 50.0;
const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5167_6d61;

/// A point of `P(H_ρ)`: base point and a unit fiber direction whose first
/// nonzero coordinate is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    pub base: SheetPoint,
    direction: DVector<f64>,
}

impl ProjectivePoint {
    pub fn new(base: SheetPoint, v: &DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("direction must be a finite nonzero vector".into()));
        }
        let mut direction = v / n;
        if let Some(&first) = direction.iter().find(|c| **c != 0.0) {
            if first < 0.0 {
                direction.neg_mut();
            }
        }
        Ok(ProjectivePoint { base, direction })
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn line(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.direction.len(), 1, self.direction.as_slice())
    }
}

/// `log(‖A v‖ / ‖v‖)` for the increment's matrix `A`.
pub fn sigma(increment: &CocycleIncrement, p: &ProjectivePoint) -> f64 {
    (&increment.matrix * &p.direction).norm().ln()
}

/// Moves `p` along a flow, carrying its direction by the cocycle.
pub fn evolve_projective<C: FiberCocycle + ?Sized>(
    p: &ProjectivePoint,
    kind: FlowKind,
    t: f64,
    cocycle: &C,
    lattice: &Lattice,
) -> Result<ProjectivePoint> {
    Ok(evolve_with_increment(p, kind, t, cocycle, lattice)?.0)
}

fn evolve_with_increment<C: FiberCocycle + ?Sized>(
    p: &ProjectivePoint,
    kind: FlowKind,
    t: f64,
    cocycle: &C,
    lattice: &Lattice,
) -> Result<(ProjectivePoint, CocycleIncrement)> {
    let inc = cocycle_step(&p.base, kind, t, cocycle, lattice)?;
    let q = ProjectivePoint::new(inc.to_point(), &(&inc.matrix * &p.direction))?;
    Ok((q, inc))
}

/// Mean of `sums / times` with a block-bootstrap standard error.
fn bootstrap_ratio(blocks: &[(f64, f64)]) -> (f64, f64) {
    let ratio = |it: &mut dyn Iterator<Item = &(f64, f64)>| {
        let (s, t) = it.fold((0.0, 0.0), |(s, t), b| (s + b.0, t + b.1));
        if t > 0.0 { s / t } else { 0.0 }
    };
    let est = ratio(&mut blocks.iter());
    if blocks.len() < 2 {
        return (est, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let n = blocks.len();
    let rs: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| ratio(&mut (0..n).map(|_| &blocks[rng.random_range(0..n)])))
        .collect();
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rs.len() - 1) as f64;
    (est, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub horizon: f64,
    pub truncation_fraction: f64,
}

/// Top exponent as the time average of `σ(a^1, ·)` along generic projective
/// trajectories of the geodesic flow.
pub fn furstenberg_lambda1<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    n_traj: usize,
    horizon: usize,
    seed: u64,
) -> Result<FurstenbergEstimate> {
    if spectrum.multiplicities[0] != 1 {
        return Err(Error::TopNotSimple(spectrum.multiplicities[0]));
    }
    if n_traj == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory step".into()));
    }
    let per: Vec<Option<Vec<(f64, f64)>>> = (0..n_traj)
        .into_par_iter()
        .map(|i| -> Result<Option<Vec<(f64, f64)>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut p = random_projective_point(cocycle, lattice, &mut rng)?;
            let mut blocks = Vec::new();
            let mut cur = (0.0, 0.0);
            for _ in 0..horizon {
                let (q, inc) = match evolve_with_increment(&p, FlowKind::Geodesic, 1.0, cocycle, lattice) {
                    Ok(r) => r,
                    Err(Error::CuspExcursion(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                cur.0 += sigma(&inc, &p);
                cur.1 += 1.0;
                if cur.1 >= BLOCK_TIME {
                    blocks.push(std::mem::take(&mut cur));
                }
                p = q;
            }
            if cur.1 > 0.0 {
                blocks.push(cur);
            }
            Ok(Some(blocks))
        })
        .collect::<Result<_>>()?;
    let truncated = per.iter().filter(|b| b.is_none()).count();
    let blocks: Vec<(f64, f64)> = per.into_iter().flatten().flatten().collect();
    if blocks.is_empty() {
        return Err(Error::AllTrajectoriesInvalid);
    }
    let (estimate, stderr) = bootstrap_ratio(&blocks);
    Ok(FurstenbergEstimate {
        estimate,
        stderr,
        horizon: blocks.iter().map(|b| b.1).sum(),
        truncation_fraction: truncated as f64 / n_traj as f64,
    })
}

/// Haar-like base point, uniform sheet, uniform direction.
pub fn random_projective_point<C: FiberCocycle + ?Sized, R: Rng + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    rng: &mut R,
) -> Result<ProjectivePoint> {
    let base = random_base_point_with(rng, lattice);
    let sheet = rng.random_range(0..cocycle.sheet_count());
    let v = random_unit_vector(rng, cocycle.dim());
    ProjectivePoint::new(SheetPoint::new(base, sheet), &v)
}

/// How the fiber direction of each start is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StartDirection {
    Uniform,
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub samples: usize,
}

/// Quantile summary of a distance statistic over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub points: Vec<CurvePoint>,
    pub drop_fraction: f64,
}

impl DecayCurve {
    pub fn median_at(&self, t: f64) -> Option<f64> {
        self.points.iter().find(|p| (p.t - t).abs() < 1e-9).map(|p| p.median)
    }

    /// Largest increase of the median after `t0`, ignoring changes below `floor`.
    pub fn worst_increase_after(&self, t0: f64, floor: f64) -> f64 {
        self.points
            .windows(2)
            .filter(|w| w[0].t >= t0)
            .map(|w| w[1].median.max(floor) - w[0].median.max(floor))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,median,q25,q75")?;
        for p in &self.points {
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", p.t, p.median, p.q25, p.q75)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn curve_from(per_start: Vec<Vec<Option<f64>>>, times: &[f64]) -> DecayCurve {
    let mut dropped = 0usize;
    let mut total = 0usize;
    let mut points = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut vals: Vec<f64> = Vec::new();
        for s in &per_start {
            total += 1;
            match s.get(k).copied().flatten() {
                Some(v) => vals.push(v),
                None => dropped += 1,
            }
        }
        vals.sort_by(f64::total_cmp);
        points.push(CurvePoint {
            t,
            median: quantile(&vals, 0.5),
            q25: quantile(&vals, 0.25),
            q75: quantile(&vals, 0.75),
            samples: vals.len(),
        });
    }
    DecayCurve { points, drop_fraction: dropped as f64 / total.max(1) as f64 }
}

/// Distance of the direction of `p` from `P(E_1)` at its base point.
pub fn distance_to_e1<C: FiberCocycle + ?Sized>(
    p: &ProjectivePoint,
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    reference_horizon: f64,
) -> Result<f64> {
    let e1 = top_space_e1(&p.base, cocycle, lattice, reference_horizon, spectrum)?;
    Ok(containment_defect(&p.line(), &e1))
}

/// Median distance to `P(E_1)` along a discretized P-orbit: each unit of time
/// is a horocycle step `u_+^s`, `s` uniform in `[−1, 1]`, followed by `a^1`.
#[allow(clippy::too_many_arguments)]
pub fn e1_concentration<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    n_starts: usize,
    horizon: usize,
    start: &StartDirection,
    seed: u64,
) -> Result<DecayCurve> {
    if spectrum.multiplicities[0] != 1 {
        return Err(Error::TopNotSimple(spectrum.multiplicities[0]));
    }
    let per_start: Vec<Vec<Option<f64>>> = (0..n_starts)
        .into_par_iter()
        .map(|i| -> Result<Vec<Option<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut p = random_projective_point(cocycle, lattice, &mut rng)?;
            if let StartDirection::Fixed(v) = start {
                p = ProjectivePoint::new(p.base, v)?;
            }
            let mut out = Vec::with_capacity(horizon + 1);
            for t in 0..=horizon {
                out.push(distance_to_e1(&p, cocycle, lattice, spectrum, REFERENCE_HORIZON).ok());
                if t == horizon {
                    break;
                }
                let s = rng.random_range(-1.0..=1.0);
                let moved = evolve_projective(&p, FlowKind::HorocyclePlus, s, cocycle, lattice)
                    .and_then(|q| evolve_projective(&q, FlowKind::Geodesic, 1.0, cocycle, lattice));
                match moved {
                    Ok(q) => p = q,
                    Err(Error::CuspExcursion(_)) => {
                        out.resize(horizon + 1, None);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..=horizon).map(|t| t as f64).collect();
    Ok(curve_from(per_start, &times))
}

/// Ratio `‖v_{≥2}‖ / ‖v_1‖` of the components of `v` in `E_1 ⊕ E_{≥2}`.
pub fn alpha_coordinate(v: &DVector<f64>, e1: &DMatrix<f64>, e_ge2: &DMatrix<f64>) -> Result<f64> {
    let basis = DMatrix::from_columns(
        &e1.column_iter().chain(e_ge2.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
    );
    if basis.nrows() != basis.ncols() || basis.nrows() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: basis.ncols() });
    }
    let c = basis.lu().solve(v).ok_or_else(|| Error::SingularImage("E_1 ⊕ E_{≥2}".into()))?;
    let k = e1.ncols();
    Ok((e_ge2 * c.rows(k, c.len() - k)).norm() / (e1 * c.rows(0, k)).norm())
}

/// Median of the α coordinate along the geodesic flow from random starts.
pub fn alpha_decay<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    n_starts: usize,
    horizon: usize,
    seed: u64,
) -> Result<DecayCurve> {
    let per_start: Vec<Vec<Option<f64>>> = (0..n_starts)
        .into_par_iter()
        .map(|i| -> Result<Vec<Option<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut p = random_projective_point(cocycle, lattice, &mut rng)?;
            let mut out = Vec::with_capacity(horizon + 1);
            for t in 0..=horizon {
                let a = top_space_e1(&p.base, cocycle, lattice, REFERENCE_HORIZON, spectrum).and_then(|e1| {
                    let fwd = forward_flag(&p.base, cocycle, lattice, REFERENCE_HORIZON, spectrum)?;
                    alpha_coordinate(p.direction(), &e1, fwd.member(2)?)
                });
                out.push(a.ok());
                if t < horizon {
                    p = evolve_projective(&p, FlowKind::Geodesic, 1.0, cocycle, lattice)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..=horizon).map(|t| t as f64).collect();
    Ok(curve_from(per_start, &times))
}

/// Result of a membership test for `Q_j(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QjMeasurement {
    pub j: usize,
    pub angle_tol: f64,
    pub fraction: f64,
    pub hits: usize,
    pub used: usize,
    pub dropped: usize,
    /// Containment defect of `u_* v` in `E_{≥j}(u x)` per used sample.
    pub defects: Vec<f64>,
}

impl QjMeasurement {
    /// Hit fraction at another tolerance, from the same samples.
    pub fn fraction_at(&self, angle_tol: f64) -> f64 {
        if self.used == 0 {
            return f64::NAN;
        }
        self.defects.iter().filter(|&&d| d <= angle_tol).count() as f64 / self.used as f64
    }

    pub fn sweep(&self) -> Vec<(f64, f64)> {
        ANGLE_TOL_SWEEP.iter().map(|&t| (t, self.fraction_at(t))).collect()
    }
}

/// Fraction of `u ∈ B = {u_+^s : |s| ≤ 1}` with `u_* v ∈ E_{≥j}(u x)`.
#[allow(clippy::too_many_arguments)]
pub fn measure_qj<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    v: &DVector<f64>,
    j: usize,
    n_samples: usize,
    angle_tol: f64,
    horizon: f64,
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    seed: u64,
) -> Result<QjMeasurement> {
    if j == 0 || j > spectrum.block_count() {
        return Err(Error::InvalidArgument(format!("flag index {j} out of range")));
    }
    if j == 1 {
        return Ok(QjMeasurement {
            j,
            angle_tol,
            fraction: 1.0,
            hits: n_samples,
            used: n_samples,
            dropped: 0,
            defects: vec![0.0; n_samples],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ss: Vec<f64> = (0..n_samples).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let results: Vec<Option<f64>> = ss
        .par_iter()
        .map(|&s| -> Result<Option<f64>> {
            let inc = match cocycle_step(x, FlowKind::HorocyclePlus, s, cocycle, lattice) {
                Ok(inc) => inc,
                Err(Error::CuspExcursion(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let flag = match forward_flag(&inc.to_point(), cocycle, lattice, horizon, spectrum) {
                Ok(f) => f,
                Err(Error::HorizonTooShort { .. } | Error::CuspExcursion(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let w = &inc.matrix * v;
            let line = DMatrix::from_column_slice(w.len(), 1, w.as_slice());
            Ok(Some(containment_defect(&line, flag.member(j)?)))
        })
        .collect::<Result<_>>()?;
    let defects: Vec<f64> = results.iter().flatten().copied().collect();
    let used = defects.len();
    let hits = defects.iter().filter(|&&d| d <= angle_tol).count();
    Ok(QjMeasurement {
        j,
        angle_tol,
        fraction: if used > 0 { hits as f64 / used as f64 } else { f64::NAN },
        hits,
        used,
        dropped: n_samples - used,
        defects,
    })
}

/// Numerical `F_{≥j}(x)`: the common part of `u_*^{-1} E_{≥j}(u x)` over
/// `budget` sampled `u ∈ B`. Returns an orthonormal basis, possibly empty.
#[allow(clippy::too_many_arguments)]
pub fn estimate_inert_space<C: FiberCocycle + ?Sized>(
    x: &SheetPoint,
    j: usize,
    cocycle: &C,
    lattice: &Lattice,
    spectrum: &Spectrum,
    budget: usize,
    horizon: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let d = cocycle.dim();
    if j == 0 || j > spectrum.block_count() {
        return Err(Error::InvalidArgument(format!("flag index {j} out of range")));
    }
    if j == 1 {
        return Ok(DMatrix::identity(d, d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ss: Vec<f64> = (0..budget).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let projectors: Vec<Option<DMatrix<f64>>> = ss
        .par_iter()
        .map(|&s| -> Result<Option<DMatrix<f64>>> {
            let inc = match cocycle_step(x, FlowKind::HorocyclePlus, s, cocycle, lattice) {
                Ok(inc) => inc,
                Err(Error::CuspExcursion(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let flag = match forward_flag(&inc.to_point(), cocycle, lattice, horizon, spectrum) {
                Ok(f) => f,
                Err(Error::HorizonTooShort { .. } | Error::CuspExcursion(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let inv = inc.matrix.clone().try_inverse().ok_or_else(|| Error::SingularImage("increment".into()))?;
            let pulled = (inv * flag.member(j)?).qr().q();
            Ok(Some(DMatrix::identity(d, d) - &pulled * pulled.transpose()))
        })
        .collect::<Result<_>>()?;
    let used: Vec<&DMatrix<f64>> = projectors.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::AllTrajectoriesInvalid);
    }
    let mut mean = DMatrix::zeros(d, d);
    for p in &used {
        mean += *p;
    }
    mean /= used.len() as f64;
    let eig = mean.symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| eig.eigenvalues[i] <= INERT_TOL)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(DMatrix::zeros(d, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Fixed family of test functions on the projectivized bundle: the quadratic
/// monomials `u_a u_b` of the unit direction, and the constant `1`, each
/// multiplied by a bump in the cusp height supported below [`COMPACT_HEIGHT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestFamily {
    dim: usize,
}

impl TestFamily {
    pub fn quadform_bump(dim: usize) -> Self {
        TestFamily { dim }
    }

    pub fn version(&self) -> &'static str {
        TEST_FAMILY_VERSION
    }

    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bump(height: f64) -> f64 {
        if height >= COMPACT_HEIGHT {
            0.0
        } else {
            (1.0 - (height / COMPACT_HEIGHT).powi(2)).powi(2)
        }
    }

    /// Values of every member at a point, given its cusp height.
    pub fn evaluate(&self, u: &DVector<f64>, height: f64) -> Vec<f64> {
        let b = TestFamily::bump(height);
        let mut out = Vec::with_capacity(self.len());
        out.push(b);
        for a in 0..self.dim {
            for c in a..self.dim {
                out.push(u[a] * u[c] * b);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    /// Largest spread over the test family.
    pub gap: f64,
    /// Spread (max − min over starts) of each test function's average.
    pub spreads: Vec<f64>,
    pub test_family: String,
    pub starts_used: usize,
    pub truncation_fraction: f64,
    /// More than [`TRUNCATION_FLAG`] of the starts were truncated.
    pub flagged: bool,
    /// Fraction of sampled time spent above [`COMPACT_HEIGHT`].
    pub discarded_mass: f64,
}

/// Spread of horocycle Birkhoff averages of the test family across starts.
#[allow(clippy::too_many_arguments)]
pub fn unique_ergodicity_gap<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    n_starts: usize,
    horizon: f64,
    step: f64,
    family: &TestFamily,
    seed: u64,
) -> Result<EquidistributionReport> {
    if !(step > 0.0) || !(horizon >= step) {
        return Err(Error::InvalidArgument("need 0 < step <= horizon".into()));
    }
    let n = (horizon / step).round() as usize;
    let per: Vec<Option<(Vec<f64>, f64)>> = (0..n_starts)
        .into_par_iter()
        .map(|i| -> Result<Option<(Vec<f64>, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut p = random_projective_point(cocycle, lattice, &mut rng)?;
            let mut sums = vec![0.0; family.len()];
            let mut high = 0usize;
            for _ in 0..n {
                let h = p.base.base.cusp_height(lattice);
                if h > COMPACT_HEIGHT {
                    high += 1;
                }
                for (s, f) in sums.iter_mut().zip(family.evaluate(p.direction(), h)) {
                    *s += f;
                }
                p = match evolve_projective(&p, FlowKind::HorocyclePlus, step, cocycle, lattice) {
                    Ok(q) => q,
                    Err(Error::CuspExcursion(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
            }
            Ok(Some((sums.into_iter().map(|s| s / n as f64).collect(), high as f64 / n as f64)))
        })
        .collect::<Result<_>>()?;
    let used: Vec<&(Vec<f64>, f64)> = per.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::AllTrajectoriesInvalid);
    }
    let spreads: Vec<f64> = (0..family.len())
        .map(|k| {
            let (lo, hi) = used
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (avg, _)| (lo.min(avg[k]), hi.max(avg[k])));
            hi - lo
        })
        .collect();
    let truncation_fraction = (n_starts - used.len()) as f64 / n_starts as f64;
    Ok(EquidistributionReport {
        gap: spreads.iter().copied().fold(0.0, f64::max),
        spreads,
        test_family: family.version().to_string(),
        starts_used: used.len(),
        truncation_fraction,
        flagged: truncation_fraction > TRUNCATION_FLAG,
        discarded_mass: used.iter().map(|u| u.1).sum::<f64>() / used.len() as f64,
    })
}

/// Weighted cloud of projective points standing in for a lift `ν̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLift {
    pub samples: Vec<(ProjectivePoint, f64)>,
    pub flow_kind: FlowKind,
    pub horizon: f64,
    pub seed: u64,
}

impl EmpiricalLift {
    /// Normalizes the weights to sum to one.
    pub fn new(samples: Vec<(ProjectivePoint, f64)>, flow_kind: FlowKind, horizon: f64, seed: u64) -> Result<Self> {
        let total: f64 = samples.iter().map(|s| s.1).sum();
        if samples.iter().any(|s| !(s.1 > 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidArgument("lift weights must be positive".into()));
        }
        let samples = samples.into_iter().map(|(p, w)| (p, w / total)).collect();
        Ok(EmpiricalLift { samples, flow_kind, horizon, seed })
    }

    /// `n` random base points carrying the given direction.
    pub fn with_direction<C: FiberCocycle + ?Sized>(
        cocycle: &C,
        lattice: &Lattice,
        n: usize,
        v: &DVector<f64>,
        seed: u64,
    ) -> Result<Self> {
        let samples = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let p = random_projective_point(cocycle, lattice, &mut rng)?;
                Ok((ProjectivePoint::new(p.base, v)?, 1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        EmpiricalLift::new(samples, FlowKind::Geodesic, 0.0, seed)
    }

    /// `n` random base points carrying their top Lyapunov direction.
    pub fn on_e1<C: FiberCocycle + ?Sized>(
        cocycle: &C,
        lattice: &Lattice,
        spectrum: &Spectrum,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let samples = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let p = random_projective_point(cocycle, lattice, &mut rng)?;
                let e1 = top_space_e1(&p.base, cocycle, lattice, REFERENCE_HORIZON, spectrum)?;
                Ok((ProjectivePoint::new(p.base, &e1.column(0).into_owned())?, 1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        EmpiricalLift::new(samples, FlowKind::Geodesic, 0.0, seed)
    }

    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.1).sum()
    }

    /// Restriction to base height at most `max_height`, renormalized, with the
    /// discarded mass.
    pub fn compact_part(&self, lattice: &Lattice, max_height: f64) -> Result<(EmpiricalLift, f64)> {
        let kept: Vec<_> =
            self.samples.iter().filter(|(p, _)| p.base.base.cusp_height(lattice) <= max_height).cloned().collect();
        let discarded = 1.0 - kept.iter().map(|s| s.1).sum::<f64>();
        Ok((EmpiricalLift::new(kept, self.flow_kind, self.horizon, self.seed)?, discarded))
    }

    /// Weighted mean distance to `P(E_1)` and the weight of samples where
    /// `E_1` could not be estimated.
    pub fn distance_to_e1<C: FiberCocycle + ?Sized>(
        &self,
        cocycle: &C,
        lattice: &Lattice,
        spectrum: &Spectrum,
    ) -> Result<(f64, f64)> {
        let ds: Vec<(Option<f64>, f64)> = self
            .samples
            .par_iter()
            .map(|(p, w)| (distance_to_e1(p, cocycle, lattice, spectrum, REFERENCE_HORIZON).ok(), *w))
            .collect();
        let kept: f64 = ds.iter().filter(|d| d.0.is_some()).map(|d| d.1).sum();
        if kept <= 0.0 {
            return Err(Error::AllTrajectoriesInvalid);
        }
        let mean = ds.iter().filter_map(|(d, w)| d.map(|d| d * w)).sum::<f64>() / kept;
        Ok((mean, 1.0 - kept))
    }
}

/// Average of the pushforwards of `start` by `a^{-t}` over integer
/// `t ∈ [0, t_avg]`; samples hitting the cusp guard are dropped.
pub fn backward_average_lift<C: FiberCocycle + ?Sized>(
    cocycle: &C,
    lattice: &Lattice,
    start: &EmpiricalLift,
    t_avg: usize,
    seed: u64,
) -> Result<EmpiricalLift> {
    let per: Vec<Vec<(ProjectivePoint, f64)>> = start
        .samples
        .par_iter()
        .map(|(p, w)| -> Result<Vec<(ProjectivePoint, f64)>> {
            let mut out = vec![(p.clone(), *w)];
            let mut q = p.clone();
            for _ in 0..t_avg {
                q = match evolve_projective(&q, FlowKind::Geodesic, -1.0, cocycle, lattice) {
                    Ok(q) => q,
                    Err(Error::CuspExcursion(_)) => break,
                    Err(e) => return Err(e),
                };
                out.push((q.clone(), *w));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let samples = per.into_iter().flatten().collect();
    EmpiricalLift::new(samples, FlowKind::Geodesic, t_avg as f64, seed)
}
