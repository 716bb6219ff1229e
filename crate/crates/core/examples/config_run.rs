//! Drive an experiment from a config file, as the command-line tool does, and
//! show that reruns reproduce the results blob byte for byte.

use cocycle_lab::runner::{run_experiment, validate_config};

const CONFIG: &str = r#"
kind = "spectrum"
seed = 2024

[representation]
kind = "direct-sum"
parts = [{ kind = "sym", power = 2 }, { kind = "trivial", dim = 1 }]

[spectrum]
trajectories = 8
horizon = 5000
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // every problem in a broken file is reported at once
    if let Err(errors) = validate_config("kind = \"flags\"\nseed = -3\n[flags]\npoints = 0\n") {
        println!("broken config:\n{errors}\n");
    }

    let mut config = validate_config(CONFIG)?;
    println!("canonical form (hash {}):\n{}", config.hash(), config.canonical_text());

    let dir = std::env::temp_dir().join("cocycle-lab-example");
    config.output.dir = Some(dir.display().to_string());
    let first = run_experiment(&config)?;
    let second = run_experiment(&config)?;
    println!("wrote {} and {}", first.results_path, first.csv_path);
    println!("identical blobs across reruns: {}", first.results_blob() == second.results_blob());
    print!("{}", std::fs::read_to_string(&first.csv_path)?);
    Ok(())
}
