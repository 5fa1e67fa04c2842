//! Command-line front end: one verb per experiment kind plus `sweep` and
//! `validate-config`. Exit codes: 0 all criteria pass, 1 numerical failure,
//! 2 usage or config error.

use clap::{Parser, Subcommand};
use poiseuille::harness::{config::ExperimentKind, run, sweep, ExperimentConfig, RunRecord};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "poiseuille", version, about = "Numerical experiments around the 2D Poiseuille flow")]
struct Cli {
    /// Path to the TOML experiment config
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,

    /// Override the output directory
    #[arg(long, global = true)]
    output: Option<String>,

    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a config entry: dotted.path=value (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Single-band linear evolution with decay fit and bound checks
    LinearDecay,
    /// Time-weighted functional: lower bound, monotonicity, derivative bound
    FunctionalAudit,
    /// Finite-difference verification of the four derivative identities
    Identities,
    /// The three semigroup integral estimates and their viscosity scaling
    SemigroupIntegrals,
    /// Enhanced-dissipation rate scaling in nu and k with a heat control
    ScalingSweep,
    /// Nonlinear runs at the transition-threshold amplitude
    NonlinearThreshold,
    /// Fan any experiment over its list axes and aggregate
    Sweep,
    /// Parse and validate the config, print the normalized form
    ValidateConfig,
}

fn kind_of(verb: Verb) -> Option<ExperimentKind> {
    match verb {
        Verb::LinearDecay => Some(ExperimentKind::LinearDecay),
        Verb::FunctionalAudit => Some(ExperimentKind::FunctionalAudit),
        Verb::Identities => Some(ExperimentKind::Identities),
        Verb::SemigroupIntegrals => Some(ExperimentKind::SemigroupIntegrals),
        Verb::ScalingSweep => Some(ExperimentKind::ScalingSweep),
        Verb::NonlinearThreshold => Some(ExperimentKind::NonlinearThreshold),
        Verb::Sweep | Verb::ValidateConfig => None,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::from_file(&cli.config).map_err(|e| e.to_string())?;
    if let Some(kind) = kind_of(cli.verb) {
        cfg.experiment.kind = kind;
    }
    for o in &cli.overrides {
        cfg.apply_override(o).map_err(|e| e.to_string())?;
    }
    if let Some(dir) = &cli.output {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_record(rec: &RunRecord) {
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    for v in &rec.verdicts {
        println!(
            "[{}] {} — {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    let status = if rec.pass {
        "pass"
    } else if rec.partial {
        "partial"
    } else {
        "fail"
    };
    println!(
        "{}: {} ({} verdicts, {:.1} s) -> {}/summary.json",
        rec.kind,
        status,
        rec.verdicts.len(),
        rec.elapsed_s,
        rec.config.output.dir
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if matches!(cli.verb, Verb::ValidateConfig) {
        return match cfg.validate() {
            Ok(warnings) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            }
        };
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.verb {
        Verb::Sweep => sweep(&cfg),
        _ => run(&cfg),
    };
    match result {
        Ok(rec) => {
            print_record(&rec);
            if rec.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("run error: {e}");
            ExitCode::from(1)
        }
    }
}
