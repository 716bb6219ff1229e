use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cocycle_lab::runner::{run_experiment, validate_config, ExperimentKind, RunError, RunStatus, OUT_DIR_ENV};

/// Lyapunov spectra, Oseledets flags and rigidity probes for cocycles over
/// SL(2,R)-actions.
///
/// Exit codes: 0 success, 2 invalid config, 3 numerical failure (partial
/// outputs are still written), 1 anything else.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov spectrum by the frame method.
    Spectrum(RunArgs),
    /// Equivariance defects of Oseledets flags.
    Flags(RunArgs),
    /// Top exponent from the Furstenberg formula, next to the frame method.
    Furstenberg(RunArgs),
    /// Zero-one test for the inert flag.
    Inert(RunArgs),
    /// Spread of foliated horocycle averages across starts.
    UniqueErgodicity(RunArgs),
    /// Distance to the top Lyapunov line along the geodesic flow.
    E1Concentration(RunArgs),
    /// Kontsevich–Zorich exponents of one origami, or of a family.
    Origami(RunArgs),
    /// SL(2,Z)-orbit of an origami.
    Orbit(RunArgs),
    /// Check a config and print its canonical form and hash.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config's).
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Validate { config } => return validate(&config),
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Flags(a) => (ExperimentKind::Flags, a),
        Command::Furstenberg(a) => (ExperimentKind::Furstenberg, a),
        Command::Inert(a) => (ExperimentKind::Inert, a),
        Command::UniqueErgodicity(a) => (ExperimentKind::UniqueErgodicity, a),
        Command::E1Concentration(a) => (ExperimentKind::E1Concentration, a),
        Command::Origami(a) => (ExperimentKind::Origami, a),
        Command::Orbit(a) => (ExperimentKind::Orbit, a),
    };
    run(kind, args)
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn validate(path: &PathBuf) -> ExitCode {
    let text = match read(path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    match validate_config(&text) {
        Ok(cfg) => {
            print!("{}", cfg.canonical_text());
            eprintln!("config hash {}", cfg.hash());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: invalid config\n{e}", path.display());
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let text = match read(&args.config) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let mut cfg = match validate_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: invalid config\n{e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cfg.kind != kind {
        eprintln!("{}: config is a \"{}\" experiment, not \"{kind}\"", args.config.display(), cfg.kind);
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("--threads must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run_experiment(&cfg)) {
        Ok(rec) => {
            println!("{}", rec.results_path);
            println!("{}", rec.csv_path);
            for f in &rec.failures {
                eprintln!("numerical failure: {f}");
            }
            match rec.status {
                RunStatus::Ok => ExitCode::SUCCESS,
                RunStatus::NumericalFailure => ExitCode::from(EXIT_NUMERICAL),
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("invalid config\n{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
