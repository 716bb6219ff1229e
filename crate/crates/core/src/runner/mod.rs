//! Experiment orchestration: a validated [`ExperimentConfig`] goes in, CSV
//! and JSON files come out, and a [`RunRecord`] line is appended to the run
//! log.
//!
//! Everything numerical is a pure function of the config (including its
//! seed): work is spread over the current rayon pool with index-derived
//! seeds and collected in index order, so the results blob is byte-identical
//! across reruns and thread counts. Timestamps live only in the record.

mod config;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{
    validate_config, ConfigErrors, Diagnostic, E1ConcentrationSection, ExperimentConfig, ExperimentKind, FlagsSection,
    FurstenbergSection, InertSection, LatticeSection, OrigamiSection, OutputSection, RepSpec, SpectrumSection,
    UniqueErgodicitySection,
};

use crate::cocycle::{derive_seed, random_base_point, random_unit_vector, stream_rng, SheetPoint, TrajectoryKind};
use crate::origami::{exponent_family_experiment, veech_orbit, KzCocycle};
use crate::oseledets::{estimate_spectrum, flag_equivariance_defect, FlagKind, Spectrum, SpectrumJob};
use crate::probes::{
    e1_concentration, furstenberg_lambda1, measure_qj, quantile, unique_ergodicity_gap, StartDirection, TestFamily,
};
use crate::representation::Representation;
use crate::sl2::Lattice;

/// Output directory when neither the config nor the caller names one.
pub const DEFAULT_OUT_DIR: &str = "cocycle-lab-out";
/// Environment variable the CLI reads for the default output directory.
pub const OUT_DIR_ENV: &str = "COCYCLE_LAB_OUT";
pub const DEFAULT_RUN_LOG: &str = "runs.jsonl";
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    /// Some or all of the numerics failed; outputs hold what was computed.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub status: RunStatus,
    pub failures: Vec<String>,
    pub truncation_fraction: f64,
    pub drop_fraction: f64,
    pub results_path: String,
    pub csv_path: String,
    pub results: Value,
}

impl RunRecord {
    /// The results exactly as written to the JSON output.
    pub fn results_blob(&self) -> String {
        results_blob(&self.results)
    }
}

fn results_blob(results: &Value) -> String {
    let mut s = serde_json::to_string_pretty(results).expect("JSON values serialize");
    s.push('\n');
    s
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid config:\n{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// What an experiment produced, before it is written out.
struct Outcome {
    results: Value,
    csv: String,
    failures: Vec<String>,
    truncation: f64,
    dropped: f64,
}

impl Outcome {
    fn failed(results: Value, err: crate::Error) -> Self {
        Outcome { results, csv: String::new(), failures: vec![err.to_string()], truncation: 0.0, dropped: 1.0 }
    }
}

static RUN_LOG: Mutex<()> = Mutex::new(());

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl ExperimentConfig {
    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.output.dir.as_deref().unwrap_or(DEFAULT_OUT_DIR))
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| format!("{}-{}", self.kind, &self.hash()[..12]))
    }
}

/// Computes the experiment's results without touching the filesystem.
/// Returns the results value and the CSV detail.
pub fn compute(config: &ExperimentConfig) -> (Value, String, RunStatus) {
    let o = dispatch(config);
    let status = if o.failures.is_empty() { RunStatus::Ok } else { RunStatus::NumericalFailure };
    (o.results, o.csv, status)
}

/// Runs a validated config on the current rayon pool, writes
/// `<prefix>.json` and `<prefix>.csv` into the output directory and appends
/// the record to the run log.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord, RunError> {
    let started = unix_ms();
    let outcome = dispatch(config);
    let finished = unix_ms();

    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    let prefix = config.prefix();
    let json_path = dir.join(format!("{prefix}.json"));
    let csv_path = dir.join(format!("{prefix}.csv"));
    fs::write(&json_path, results_blob(&outcome.results))?;
    fs::write(&csv_path, &outcome.csv)?;

    let record = RunRecord {
        config_hash: config.hash(),
        kind: config.kind,
        seed: config.seed,
        tool_version: TOOL_VERSION.to_string(),
        started_unix_ms: started,
        finished_unix_ms: finished,
        status: if outcome.failures.is_empty() { RunStatus::Ok } else { RunStatus::NumericalFailure },
        failures: outcome.failures,
        truncation_fraction: outcome.truncation,
        drop_fraction: outcome.dropped,
        results_path: json_path.display().to_string(),
        csv_path: csv_path.display().to_string(),
        results: outcome.results,
    };
    append_run_log(&dir.join(config.output.run_log.as_deref().unwrap_or(DEFAULT_RUN_LOG)), &record)?;
    Ok(record)
}

/// Parses, validates and runs a config file's text.
pub fn run_config_text(text: &str) -> Result<RunRecord, RunError> {
    let cfg = validate_config(text).map_err(RunError::Config)?;
    run_experiment(&cfg)
}

fn append_run_log(path: &Path, record: &RunRecord) -> std::io::Result<()> {
    let line = serde_json::to_string(record).expect("records serialize");
    let _guard = RUN_LOG.lock().unwrap_or_else(|e| e.into_inner());
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

fn spectrum_job(s: &SpectrumSection, seed: u64) -> SpectrumJob {
    SpectrumJob {
        trajectories: s.trajectories,
        steps: ((s.horizon / s.dt).round() as usize).max(1),
        dt: s.dt,
        kind: TrajectoryKind::GEODESIC,
        seed,
    }
}

/// Seed for everything downstream of the spectrum estimate.
fn probe_seed(seed: u64) -> u64 {
    derive_seed(seed, 1)
}

fn dispatch(cfg: &ExperimentConfig) -> Outcome {
    let lattice = cfg.lattice();
    let header = json!({
        "kind": cfg.kind,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
    });
    let with = |mut extra: Value| {
        let mut h = header.clone();
        h.as_object_mut().unwrap().append(extra.as_object_mut().unwrap());
        h
    };
    match cfg.kind {
        ExperimentKind::Origami => return origami(cfg, with),
        ExperimentKind::Orbit => return orbit(cfg, with),
        _ => {}
    }
    let rep = match cfg.representation.as_ref().expect("validated").build(&lattice) {
        Ok(r) => r,
        Err(e) => return Outcome::failed(with(json!({ "error": e.to_string() })), e),
    };
    let rep_info = json!({ "label": rep.label(), "dim": rep.dim(), "lattice": lattice.mode() });
    if cfg.kind == ExperimentKind::UniqueErgodicity {
        return unique_ergodicity(cfg, &rep, &lattice, with(json!({ "representation": rep_info })));
    }

    let job = spectrum_job(cfg.spectrum.as_ref().expect("validated"), cfg.seed);
    let spectrum = match estimate_spectrum(&rep, &lattice, &job) {
        Ok(s) => s,
        Err(e) => return Outcome::failed(with(json!({ "representation": rep_info, "error": e.to_string() })), e),
    };
    let base = with(json!({ "representation": rep_info, "spectrum": spectrum }));
    match cfg.kind {
        ExperimentKind::Spectrum => Outcome {
            csv: spectrum.to_csv(),
            truncation: spectrum.truncation_fraction,
            dropped: 0.0,
            failures: Vec::new(),
            results: base,
        },
        ExperimentKind::Flags => flags(cfg, &rep, &lattice, &spectrum, base),
        ExperimentKind::Furstenberg => furstenberg(cfg, &rep, &lattice, &spectrum, base),
        ExperimentKind::Inert => inert(cfg, &rep, &lattice, &spectrum, base),
        ExperimentKind::E1Concentration => concentration(cfg, &rep, &lattice, &spectrum, base),
        _ => unreachable!("handled above"),
    }
}

fn extend(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(mut e)) = (base.as_object_mut(), extra) {
        b.append(&mut e);
    }
    base
}

fn flags(cfg: &ExperimentConfig, rep: &Representation, lattice: &Lattice, spectrum: &Spectrum, base: Value) -> Outcome {
    let s = cfg.flags.as_ref().expect("validated");
    let blocks = spectrum.block_count();
    let members: Vec<usize> = s.members.clone().unwrap_or_else(|| match s.flag {
        FlagKind::Forward => (2..=blocks).collect(),
        _ => (1..blocks).collect(),
    });
    let seed = probe_seed(cfg.seed);
    let rows: Vec<Vec<Result<f64, String>>> = (0..s.points)
        .into_par_iter()
        .map(|i| {
            let x = SheetPoint::from(random_base_point(derive_seed(seed, i as u64), lattice));
            members
                .iter()
                .map(|&j| {
                    flag_equivariance_defect(&x, s.flag, j, s.motion, s.s, rep, lattice, s.horizon, spectrum)
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut csv = String::from("point,member,defect\n");
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (k, &j) in members.iter().enumerate() {
        let mut ok = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            match &row[k] {
                Ok(d) => {
                    csv.push_str(&format!("{i},{j},{d:.17e}\n"));
                    ok.push(*d);
                }
                Err(e) => failures.push(format!("point {i}, member {j}: {e}")),
            }
        }
        ok.sort_by(f64::total_cmp);
        let q = |p: f64| if ok.is_empty() { None } else { Some(quantile(&ok, p)) };
        summary.push(json!({
            "member": j,
            "median": q(0.5),
            "q25": q(0.25),
            "q75": q(0.75),
            "points_used": ok.len(),
        }));
    }
    let total = (members.len() * s.points).max(1);
    let dropped = failures.len() as f64 / total as f64;
    Outcome {
        results: extend(base, json!({ "flag": s.flag, "motion": s.motion, "s": s.s, "members": summary, "drop_fraction": dropped })),
        csv,
        truncation: spectrum.truncation_fraction,
        dropped,
        failures,
    }
}

fn furstenberg(cfg: &ExperimentConfig, rep: &Representation, lattice: &Lattice, spectrum: &Spectrum, base: Value) -> Outcome {
    let s = cfg.furstenberg.as_ref().expect("validated");
    match furstenberg_lambda1(rep, lattice, spectrum, s.trajectories, s.horizon, probe_seed(cfg.seed)) {
        Ok(f) => {
            let diff = f.estimate - spectrum.top();
            let combined = (f.stderr.powi(2) + spectrum.stderr[0].powi(2)).sqrt();
            let csv = format!(
                "method,lambda1,stderr\nfurstenberg,{:.17e},{:.17e}\nframe,{:.17e},{:.17e}\n",
                f.estimate,
                f.stderr,
                spectrum.top(),
                spectrum.stderr[0]
            );
            Outcome {
                results: extend(base, json!({ "furstenberg": f, "difference": diff, "combined_stderr": combined })),
                csv,
                truncation: f.truncation_fraction.max(spectrum.truncation_fraction),
                dropped: 0.0,
                failures: Vec::new(),
            }
        }
        Err(e) => {
            let csv = spectrum.to_csv();
            let mut o = Outcome::failed(extend(base, json!({ "error": e.to_string() })), e);
            o.csv = csv;
            o
        }
    }
}

fn inert(cfg: &ExperimentConfig, rep: &Representation, lattice: &Lattice, spectrum: &Spectrum, base: Value) -> Outcome {
    let s = cfg.inert.as_ref().expect("validated");
    let seed = probe_seed(cfg.seed);
    let rows: Vec<Result<_, String>> = (0..s.points)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = SheetPoint::from(random_base_point(rand::Rng::random(&mut rng), lattice));
            let v = match &s.vector {
                Some(v) => DVector::from_column_slice(v),
                None => random_unit_vector(&mut rng, rep.dim()),
            };
            measure_qj(&x, &v, s.j, s.samples, s.angle_tol, s.horizon, rep, lattice, spectrum, derive_seed(seed, i as u64))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut csv = String::from("point,fraction,hits,used,dropped\n");
    let mut failures = Vec::new();
    let mut points = Vec::new();
    let (mut used, mut dropped) = (0usize, 0usize);
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Ok(m) => {
                csv.push_str(&format!("{i},{:.17e},{},{},{}\n", m.fraction, m.hits, m.used, m.dropped));
                used += m.used;
                dropped += m.dropped;
                points.push(json!({ "point": i, "fraction": m.fraction, "hits": m.hits, "used": m.used,
                                    "dropped": m.dropped, "sweep": m.sweep() }));
            }
            Err(e) => {
                dropped += s.samples;
                failures.push(format!("point {i}: {e}"));
            }
        }
    }
    let drop_fraction = dropped as f64 / (used + dropped).max(1) as f64;
    Outcome {
        results: extend(
            base,
            json!({ "j": s.j, "angle_tol": s.angle_tol, "samples": s.samples, "points": points, "drop_fraction": drop_fraction }),
        ),
        csv,
        truncation: spectrum.truncation_fraction,
        dropped: drop_fraction,
        failures,
    }
}

fn concentration(cfg: &ExperimentConfig, rep: &Representation, lattice: &Lattice, spectrum: &Spectrum, base: Value) -> Outcome {
    let s = cfg.e1_concentration.as_ref().expect("validated");
    let start = match &s.vector {
        Some(v) => StartDirection::Fixed(DVector::from_column_slice(v)),
        None => StartDirection::Uniform,
    };
    match e1_concentration(rep, lattice, spectrum, s.starts, s.horizon, &start, probe_seed(cfg.seed)) {
        Ok(curve) => Outcome {
            csv: curve.to_csv(),
            truncation: spectrum.truncation_fraction,
            dropped: curve.drop_fraction,
            failures: Vec::new(),
            results: extend(base, json!({ "curve": curve })),
        },
        Err(e) => Outcome::failed(extend(base, json!({ "error": e.to_string() })), e),
    }
}

fn unique_ergodicity(cfg: &ExperimentConfig, rep: &Representation, lattice: &Lattice, base: Value) -> Outcome {
    let s = cfg.unique_ergodicity.as_ref().expect("validated");
    let family = TestFamily::quadform_bump(rep.dim());
    match unique_ergodicity_gap(rep, lattice, s.starts, s.horizon, s.step, &family, probe_seed(cfg.seed)) {
        Ok(report) => {
            let mut csv = String::from("test_function,spread\n");
            for (i, x) in report.spreads.iter().enumerate() {
                csv.push_str(&format!("{i},{x:.17e}\n"));
            }
            Outcome {
                csv,
                truncation: report.truncation_fraction,
                dropped: 1.0 - report.starts_used as f64 / s.starts as f64,
                failures: Vec::new(),
                results: extend(base, json!({ "report": report })),
            }
        }
        Err(e) => Outcome::failed(extend(base, json!({ "error": e.to_string() })), e),
    }
}

fn origami(cfg: &ExperimentConfig, with: impl Fn(Value) -> Value) -> Outcome {
    let o = cfg.origami.as_ref().expect("validated");
    let surfaces = match o.parsed() {
        Ok(s) => s,
        Err(e) => return Outcome::failed(with(json!({ "error": e.to_string() })), e),
    };
    let job = spectrum_job(cfg.spectrum.as_ref().expect("validated"), cfg.seed);
    if let [single] = surfaces.as_slice() {
        let kz = match KzCocycle::new(single, o.max_orbit) {
            Ok(k) => k,
            Err(e) => return Outcome::failed(with(json!({ "origami": single.to_string(), "error": e.to_string() })), e),
        };
        let info = json!({
            "origami": single.to_string(),
            "stratum": kz.stratum().to_string(),
            "genus": kz.genus(),
            "orbit_size": kz.orbit().len(),
        });
        return match estimate_spectrum(&kz, &Lattice::sl2z(), &job) {
            Ok(spectrum) => Outcome {
                csv: spectrum.to_csv(),
                truncation: spectrum.truncation_fraction,
                dropped: 0.0,
                failures: Vec::new(),
                results: with(extend(info, json!({ "spectrum": spectrum, "symmetry_defect": spectrum.symmetry_defect() }))),
            },
            Err(e) => Outcome::failed(with(extend(info, json!({ "error": e.to_string() }))), e),
        };
    }
    match exponent_family_experiment(&surfaces, &job, o.max_orbit) {
        Ok(table) => {
            let mut csv = Vec::new();
            table.write_csv(&mut csv).expect("writing to memory");
            let failures: Vec<String> =
                table.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.origami))).collect();
            let dropped = failures.len() as f64 / table.rows.len().max(1) as f64;
            Outcome {
                csv: String::from_utf8(csv).expect("CSV is UTF-8"),
                truncation: 0.0,
                dropped,
                failures,
                results: with(json!({ "family": table })),
            }
        }
        Err(e) => Outcome::failed(with(json!({ "error": e.to_string() })), e),
    }
}

fn orbit(cfg: &ExperimentConfig, with: impl Fn(Value) -> Value) -> Outcome {
    let o = cfg.origami.as_ref().expect("validated");
    let result = o.parsed().and_then(|s| {
        let origami = s.into_iter().next().expect("validated: one surface");
        veech_orbit(&origami, o.max_orbit).map(|orbit| (origami, orbit))
    });
    match result {
        Ok((origami, orbit)) => {
            let mut csv = Vec::new();
            orbit.write_csv(&mut csv).expect("writing to memory");
            Outcome {
                csv: String::from_utf8(csv).expect("CSV is UTF-8"),
                truncation: 0.0,
                dropped: 0.0,
                failures: Vec::new(),
                results: with(json!({
                    "origami": origami.to_string(),
                    "stratum": origami.stratum().to_string(),
                    "genus": origami.genus(),
                    "orbit_size": orbit.len(),
                    "members": orbit.members.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                })),
            }
        }
        Err(e) => Outcome::failed(with(json!({ "error": e.to_string() })), e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str, dir: &Path) -> ExperimentConfig {
        let mut cfg = validate_config(text).unwrap();
        cfg.output.dir = Some(dir.display().to_string());
        cfg
    }

    #[test]
    fn trivial_spectrum_run_writes_outputs_and_log() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            "kind = \"spectrum\"\nseed = 3\n[representation]\nkind = \"trivial\"\ndim = 2\n\
             [spectrum]\ntrajectories = 2\nhorizon = 200\n",
            dir.path(),
        );
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.status, RunStatus::Ok);
        let csv = fs::read_to_string(&rec.csv_path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("exponent,multiplicity,stderr,horizon,truncation_fraction"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert!(row[0].parse::<f64>().unwrap().abs() < 1e-9);
        assert_eq!(row[1], "2");
        assert_eq!(lines.next(), None);
        assert_eq!(fs::read_to_string(&rec.results_path).unwrap(), rec.results_blob());

        let again = run_experiment(&cfg).unwrap();
        assert_eq!(again.results_blob(), rec.results_blob());
        let log = fs::read_to_string(dir.path().join(DEFAULT_RUN_LOG)).unwrap();
        assert_eq!(log.lines().count(), 2);
        let first: RunRecord = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(first, rec);
    }

    #[test]
    fn numerical_failures_keep_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        // the trivial representation has one block, so its top exponent is not simple
        let cfg = config(
            "kind = \"furstenberg\"\n[representation]\nkind = \"trivial\"\ndim = 2\n\
             [spectrum]\ntrajectories = 2\nhorizon = 200\n[output]\nprefix = \"f\"\n",
            dir.path(),
        );
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.status, RunStatus::NumericalFailure);
        assert_eq!(rec.failures.len(), 1);
        assert!(rec.results.get("spectrum").is_some());
        assert!(fs::read_to_string(dir.path().join("f.csv")).unwrap().starts_with("exponent,"));
    }

    #[test]
    fn orbit_run_exports_edges() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("kind = \"orbit\"\n[origami]\nsurfaces = [\"3; (1,2); (1,3)\"]\n", dir.path());
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.results["orbit_size"], 3);
        assert_eq!(rec.results["stratum"], "H(2)");
        let csv = fs::read_to_string(&rec.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
    }
}
