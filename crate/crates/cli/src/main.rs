use clap::{Args, Parser, Subcommand};
use rmt_lab_cli::{exit, run, run_suite, ConfigInvalid, ExperimentConfig, Kind, RunError, SuiteName};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rmt-lab", version, about = "Deformed Wigner matrix experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "RMT_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free-convolution law: density, endpoints, classical locations.
    Law(RunArgs),
    /// Local-law deviation scan.
    Locallaw(RunArgs),
    /// Eigenvalue rigidity against classical locations.
    Rigidity(RunArgs),
    /// Dyson Brownian motion against the exact matrix flow.
    Dbm(RunArgs),
    /// Metropolis sampler for the reference β-ensemble.
    Beta(RunArgs),
    /// Unfolded bulk gap distributions of two ensembles.
    Gaps(RunArgs),
    /// Windowed pair correlation against the sine kernel.
    Paircorr(RunArgs),
    /// Moment-matched entry law.
    Moments(RunArgs),
    /// Canned experiment set.
    Suite {
        #[arg(value_enum)]
        name: SuiteName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start the worker pool: {e}");
            return ExitCode::from(exit::RUNTIME_ERROR as u8);
        }
    }
    let code = match cli.command {
        Command::Law(a) => run_kind(Kind::Law, a),
        Command::Locallaw(a) => run_kind(Kind::Locallaw, a),
        Command::Rigidity(a) => run_kind(Kind::Rigidity, a),
        Command::Dbm(a) => run_kind(Kind::Dbm, a),
        Command::Beta(a) => run_kind(Kind::Beta, a),
        Command::Gaps(a) => run_kind(Kind::Gaps, a),
        Command::Paircorr(a) => run_kind(Kind::Paircorr, a),
        Command::Moments(a) => run_kind(Kind::Moments, a),
        Command::Suite { name, out } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("rmt-lab-out/suite-{}", name.name())));
            match run_suite(name, &out, true) {
                Ok(r) if r.errored => exit::RUNTIME_ERROR,
                Ok(r) if !r.passed => exit::THRESHOLD_FAIL,
                Ok(_) => {
                    println!("suite {} passed; report in {}", name.name(), out.join("suite_report.json").display());
                    exit::PASS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit::RUNTIME_ERROR
                }
            }
        }
    };
    ExitCode::from(code as u8)
}

fn run_kind(kind: Kind, a: RunArgs) -> i32 {
    let mut cfg = match ExperimentConfig::load(&a.config) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    if cfg.kind != kind {
        return config_error(&ConfigInvalid::single("kind", format!("config declares `{}` but `{kind}` was requested", cfg.kind)));
    }
    let mut overrides = Vec::new();
    if let Some(s) = a.seed {
        overrides.push(format!("seed: {} -> {s}", cfg.seed));
        cfg.seed = s;
    }
    if let Some(n) = a.samples {
        overrides.push(format!("samples: {:?} -> {n}", cfg.samples));
        cfg.samples = Some(n);
    }
    if let Some(o) = &a.out {
        overrides.push(format!("out: {:?} -> {}", cfg.out, o.display()));
        cfg.out = Some(o.clone());
    }
    let base = a.config.parent().map(|p| p.to_path_buf());
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("rmt-lab-out/{kind}")));
    let out = match (&base, out.is_relative() && a.out.is_none()) {
        (Some(b), true) => b.join(out),
        _ => out,
    };
    match run(&cfg, &out, base.as_deref(), overrides) {
        Ok(m) => {
            for c in &m.checks {
                println!("{} {} = {} {} {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.value, c.comparison, c.threshold);
            }
            println!("manifest: {}", out.join("manifest.json").display());
            if m.passed {
                exit::PASS
            } else {
                exit::THRESHOLD_FAIL
            }
        }
        Err(RunError::Config(e)) => config_error(&e),
        Err(e) => {
            eprintln!("error: {e}");
            exit::RUNTIME_ERROR
        }
    }
}

fn config_error(e: &ConfigInvalid) -> i32 {
    eprintln!("error: {e}");
    exit::CONFIG_ERROR
}
