use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use funquant::config::{ExperimentConfig, SCHEMA};
use funquant::oracles::OracleName;
use funquant::quantize::Metric;
use funquant::runner::{self, RunError, RunOptions, RunOutcome, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "funquant", version, about = "Functional quantization of stochastic processes")]
struct Cli {
    /// Print the configuration schema and exit.
    #[arg(long, global = true)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run everything but write no files.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Lp,
    Sup,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a codebook and report distortion, stationarity and regularity.
    Quantize(Common),
    /// Check the analytic constructions.
    Oracle {
        /// Oracles to run: c0, l1, sharp2, supnorm, closed_form.
        names: Vec<String>,
        /// Run every oracle.
        #[arg(long)]
        all: bool,
        /// Dimension of the constructions.
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Marginal sandwich bounds for d >= 2.
    Bounds {
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Diagnose a stored codebook against a fresh sample.
    Diagnose {
        /// Codebook file; defaults to the config or <out>/codebook.bin.
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn fail(err: &RunError, out: Option<&Path>, dry_run: bool) -> ExitCode {
    let record = err.record();
    eprintln!("{record}");
    if let (Some(dir), false) = (out, dry_run) {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
    ExitCode::from(err.exit_code() as u8)
}

fn load(common: &Common, sub: &str) -> Result<ExperimentConfig, ExitCode> {
    let Some(path) = &common.config else {
        eprintln!("error: `{sub}` requires --config <FILE>\n");
        eprintln!("Usage: funquant {sub} --config <FILE> [--seed <SEED>] [--out <DIR>] [--dry-run]");
        eprintln!("\nRun `funquant --print-schema` for the configuration format.");
        return Err(ExitCode::from(EXIT_CONFIG as u8));
    };
    ExperimentConfig::load(path).map_err(|e| fail(&RunError::Config(e), common.out.as_deref(), common.dry_run))
}

fn options(c: &Common) -> RunOptions {
    RunOptions { seed: c.seed, out: c.out.clone(), dry_run: c.dry_run }
}

fn report(result: Result<RunOutcome, RunError>, out: Option<&Path>, dry_run: bool) -> ExitCode {
    match result {
        Ok(o) => {
            println!("{:#}", o.summary);
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => fail(&e, out, dry_run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        let _ = Cli::command().print_help();
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    match command {
        Command::Quantize(c) => match load(&c, "quantize") {
            Ok(cfg) => {
                let out = c.out.clone().unwrap_or(cfg.output.dir.clone());
                report(runner::run_quantize(&cfg, &options(&c)), Some(&out), c.dry_run)
            }
            Err(code) => code,
        },
        Command::Bounds { metric, common: c } => match load(&c, "bounds") {
            Ok(cfg) => {
                let out = c.out.clone().unwrap_or(cfg.output.dir.clone());
                let metric = metric.map(|m| match m {
                    MetricArg::Lp => Metric::Lp,
                    MetricArg::Sup => Metric::Sup,
                });
                report(runner::run_bounds(&cfg, &options(&c), metric), Some(&out), c.dry_run)
            }
            Err(code) => code,
        },
        Command::Diagnose { codebook, common: c } => match load(&c, "diagnose") {
            Ok(cfg) => {
                let out = c.out.clone().unwrap_or(cfg.output.dir.clone());
                report(runner::run_diagnose(&cfg, &options(&c), codebook.as_deref()), Some(&out), c.dry_run)
            }
            Err(code) => code,
        },
        Command::Oracle { names, all, m, common: c } => {
            let parsed: Result<Vec<OracleName>, _> = names.iter().map(|s| s.parse()).collect();
            let selection = match parsed {
                Ok(v) if all || v.is_empty() => OracleName::ALL.to_vec(),
                Ok(v) => v,
                Err(e) => return fail(&RunError::Config(e), None, true),
            };
            report(runner::run_oracle_cmd(&selection, m, &options(&c)), c.out.as_deref(), c.dry_run)
        }
    }
}
