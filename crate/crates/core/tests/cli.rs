use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cocycle-lab");

const SPECTRUM: &str = "kind = \"spectrum\"\nseed = 9\n[representation]\nkind = \"sym\"\npower = 2\n\
                        [spectrum]\ntrajectories = 4\nhorizon = 1000\n[output]\nprefix = \"run\"\n";

fn cocycle_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).env_remove("COCYCLE_LAB_OUT").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn spectrum_run_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    let out = cocycle_lab(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("o/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let blob: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/run.json")).unwrap()).unwrap();
    assert_eq!(blob["spectrum"]["multiplicities"], serde_json::json!([1, 1, 1]));
}

#[test]
fn thread_count_and_reruns_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    for (dir, threads) in [("a", "1"), ("b", "3"), ("c", "8")] {
        let out = cocycle_lab(&["spectrum", "--config", &cfg, "--out", dir, "--threads", threads], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("a/run.json")).unwrap();
    for d in ["b", "c"] {
        assert_eq!(fs::read(tmp.path().join(d).join("run.json")).unwrap(), a);
        assert_eq!(fs::read(tmp.path().join(d).join("run.csv")).unwrap(), fs::read(tmp.path().join("a/run.csv")).unwrap());
    }
}

#[test]
fn seed_override_changes_results_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    cocycle_lab(&["spectrum", "--config", &cfg, "--out", "a"], tmp.path());
    cocycle_lab(&["spectrum", "--config", &cfg, "--out", "b", "--seed", "10"], tmp.path());
    let a: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("a/run.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("b/run.json")).unwrap()).unwrap();
    assert_eq!(b["seed"], 10);
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_ne!(a["spectrum"], b["spectrum"]);
}

#[test]
fn run_log_is_append_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    cocycle_lab(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    let first = fs::read_to_string(tmp.path().join("o/runs.jsonl")).unwrap();
    cocycle_lab(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    let both = fs::read_to_string(tmp.path().join("o/runs.jsonl")).unwrap();
    assert!(both.starts_with(&first));
    assert_eq!(both.lines().count(), 2);
    let records: Vec<serde_json::Value> = both.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records[0]["config_hash"], records[1]["config_hash"]);
    assert_eq!(records[0]["results"], records[1]["results"]);
    assert_eq!(records[0]["status"], "ok");
}

#[test]
fn environment_sets_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    let out = Command::new(BIN)
        .args(["spectrum", "--config", &cfg])
        .current_dir(tmp.path())
        .env("COCYCLE_LAB_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from-env/run.json").exists());
}

#[test]
fn invalid_configs_exit_2_with_all_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.toml", "");
    let out = cocycle_lab(&["spectrum", "--config", &empty], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing experiment kind"));

    let bad = write(
        tmp.path(),
        "bad.toml",
        "kind = \"spectrum\"\n[representation]\nkind = \"standard\"\ncolour = 1\n[spectrum]\nhorizon = -10\n",
    );
    let out = cocycle_lab(&["spectrum", "--config", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4: representation.colour"), "{err}");
    assert!(err.contains("line 6: spectrum.horizon: must be positive"), "{err}");
    assert!(!tmp.path().join("cocycle-lab-out").exists());

    let cfg = write(tmp.path(), "s.toml", SPECTRUM);
    let out = cocycle_lab(&["flags", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2), "subcommand must match the config kind");
}

#[test]
fn numerical_failure_exits_3_with_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // the trivial representation has a single exponent block, so its top
    // exponent is not simple and the Furstenberg estimate is refused
    let cfg = write(
        tmp.path(),
        "f.toml",
        "kind = \"furstenberg\"\n[representation]\nkind = \"trivial\"\ndim = 2\n\
         [spectrum]\ntrajectories = 2\nhorizon = 500\n[output]\nprefix = \"f\"\n",
    );
    let out = cocycle_lab(&["furstenberg", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let blob: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("o/f.json")).unwrap()).unwrap();
    assert!(blob["error"].as_str().unwrap().contains("not simple"));
    assert!(blob["spectrum"].is_object());
    let log = fs::read_to_string(tmp.path().join("o/runs.jsonl")).unwrap();
    assert!(log.contains("\"numerical-failure\""));
}

#[test]
fn validate_prints_canonical_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", "kind = \"orbit\"\n[origami]\nsurfaces = [\"3; (1,2); (1,3)\"]\n");
    let out = cocycle_lab(&["validate", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let canonical = String::from_utf8(out.stdout).unwrap();
    assert_eq!(canonical, "kind = \"orbit\"\nseed = 0\n\n[origami]\nmax_orbit = 10000\nsurfaces = [\"3; (1,2); (1,3)\"]\n");
    // the canonical form is itself a valid config with the same meaning
    let again = write(tmp.path(), "c.toml", &canonical);
    let out = cocycle_lab(&["validate", "--config", &again], tmp.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), canonical);
}

#[test]
fn every_experiment_kind_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let rep = "[representation]\nkind = \"sym\"\npower = 2\n";
    let spec = "[spectrum]\ntrajectories = 2\nhorizon = 600\n";
    let configs = [
        ("spectrum", format!("{rep}{spec}")),
        ("flags", format!("{rep}{spec}[flags]\npoints = 3\nhorizon = 40\n")),
        ("furstenberg", format!("{rep}{spec}[furstenberg]\ntrajectories = 2\nhorizon = 200\n")),
        ("inert", format!("{rep}{spec}[inert]\npoints = 2\nsamples = 40\n")),
        ("unique-ergodicity", format!("{rep}[unique_ergodicity]\nstarts = 3\nhorizon = 200\n")),
        ("e1-concentration", format!("{rep}{spec}[e1_concentration]\nstarts = 5\nhorizon = 10\n")),
        ("origami", format!("[origami]\nsurfaces = [\"3; (1,2); (1,3)\"]\n{spec}")),
        ("orbit", "[origami]\nsurfaces = [\"4; (1,2,3); (1,4)\"]\n".to_string()),
    ];
    for (kind, body) in configs {
        let cfg = write(tmp.path(), &format!("{kind}.toml"), &format!("kind = \"{kind}\"\n{body}"));
        let out = cocycle_lab(&[kind, "--config", &cfg, "--out", "o"], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let paths = String::from_utf8(out.stdout).unwrap();
        for p in paths.lines() {
            assert!(!fs::read_to_string(tmp.path().join(p)).unwrap().is_empty(), "{kind}: {p} empty");
        }
    }
    assert_eq!(fs::read_to_string(tmp.path().join("o/runs.jsonl")).unwrap().lines().count(), 8);
}
