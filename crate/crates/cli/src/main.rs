use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flucmob_core::harness::{self, validate, ExperimentConfig, ModelKind};
use flucmob_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_BLOW_UP: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "flucmob", version, about = "Mobility estimation from fluctuation data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exclusion process on the discrete torus.
    Ssep(RunArgs),
    /// Independent Brownian particles.
    Brownian(RunArgs),
    /// Regularized SPDE with `sqrt(rho (1 - rho))` noise.
    Spde(RunArgs),
    /// Weakly regularized SPDE with `sqrt(rho)` noise.
    Dk(RunArgs),
    /// Runs the grid for the model named by the `model` key.
    Sweep(RunArgs),
    /// Runs the built-in oracles; exits 3 if any fails.
    Validate,
    /// Summarizes CSV outputs and writes plot data.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV files produced by a run.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Directory for two-column plot-data files.
    #[arg(long)]
    plots: Option<PathBuf>,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(&e))
}

fn load(args: &RunArgs, model: Option<ModelKind>) -> Result<ExperimentConfig, Error> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let mut overrides = args.set.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(w) = args.workers {
        overrides.push(format!("workers={w}"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("out={}", o.display()));
    }
    if let Some(m) = &args.manifest {
        overrides.push(format!("manifest={}", m.display()));
    }
    ExperimentConfig::parse(&text, &overrides, model)
}

fn run(args: &RunArgs, model: Option<ModelKind>) -> ExitCode {
    let cfg = match load(args, model) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let out = match harness::run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let written = match &cfg.out {
        Some(p) => harness::write_outputs(&out, p, cfg.manifest.as_deref()),
        None => {
            print!("{}", out.csv);
            match &cfg.manifest {
                Some(m) => std::fs::write(m, out.manifest.render()).map_err(Error::from),
                None => Ok(()),
            }
        }
    };
    if let Err(e) = written {
        return fail(e);
    }
    let invalid = out.invalid_count();
    if invalid > 0 {
        eprintln!(
            "error: {invalid} record(s) invalid: more than 1% of replicas aborted ({} aborted in total)",
            out.manifest.replicas_aborted()
        );
        return ExitCode::from(EXIT_BLOW_UP);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Ssep(a) => run(&a, Some(ModelKind::Ssep)),
        Command::Brownian(a) => run(&a, Some(ModelKind::Brownian)),
        Command::Spde(a) => run(&a, Some(ModelKind::Spde)),
        Command::Dk(a) => run(&a, Some(ModelKind::Dk)),
        Command::Sweep(a) => run(&a, None),
        Command::Validate => {
            let outcomes = validate::run_oracles();
            let mut failed = 0;
            for o in &outcomes {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", o.name, o.detail);
                failed += usize::from(!o.passed);
            }
            if failed > 0 {
                eprintln!("error: {failed} oracle(s) failed");
                ExitCode::from(EXIT_ORACLE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Report(a) => {
            let result = harness::read_records(&a.csv).and_then(|recs| harness::report(&recs, a.plots.as_deref()));
            match result {
                Ok(rep) => {
                    print!("{}", rep.summary);
                    for f in &rep.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
