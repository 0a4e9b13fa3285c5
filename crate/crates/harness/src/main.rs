use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsa_harness::config::ExperimentConfig;
use lsa_harness::diagnose::diagnose;
use lsa_harness::experiments::{run_coverage, run_kolmogorov, run_variance_decay};
use lsa_harness::problem::{Environment, Problem};
use lsa_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "lsa-harness", version, about = "Monte Carlo experiments for averaged linear stochastic approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report mixing, stability and step-size diagnostics as JSON.
    Diagnose(Common),
    /// Kolmogorov distance of the scaled averaged error to its Gaussian limits.
    Kolmogorov(Common),
    /// Coverage of OBM and oracle confidence intervals.
    Coverage(Common),
    /// Error of the OBM variance estimate against the asymptotic variance.
    VarianceDecay(Common),
    /// Write the configured environment, policy and features as JSON.
    GenEnv(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides experiment.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides experiment.threads (0 uses every core).
    #[arg(long)]
    threads: Option<usize>,
    /// Dotted TOML assignment, e.g. `experiment.replicates=200`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("experiment.base_seed={seed}"));
        }
        if let Some(threads) = self.threads {
            overrides.push(format!("experiment.threads={threads}"));
        }
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides),
            None => ExperimentConfig::from_toml_str("", &overrides),
        }
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(std::io::stdout().lock())),
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, command) = match &cli.command {
        Command::Diagnose(c) => (c, "diagnose"),
        Command::Kolmogorov(c) => (c, "kolmogorov"),
        Command::Coverage(c) => (c, "coverage"),
        Command::VarianceDecay(c) => (c, "variance-decay"),
        Command::GenEnv(c) => (c, "gen-env"),
    };
    let cfg = common.load()?;
    if command == "gen-env" {
        let json = Environment::from_config(&cfg)?.document().to_json()?;
        let mut out = common.output()?;
        writeln!(out, "{json}")?;
        out.flush()?;
        return Ok(());
    }
    let problem = Problem::from_config(&cfg)?;
    let mut out = common.output()?;
    match command {
        "diagnose" => {
            let report = diagnose(&problem)?;
            let json = serde_json::to_string_pretty(&report).map_err(lsa_core::Error::from)?;
            writeln!(out, "{json}")?;
            if !report.hurwitz {
                out.flush()?;
                return Err(HarnessError::Assumption {
                    assumption: lsa_harness::problem::HURWITZ,
                    source: lsa_core::Error::InvalidParameter("mean matrix is not Hurwitz".into()),
                });
            }
        }
        "kolmogorov" => run_kolmogorov(&problem, &cfg, &mut out)?,
        "coverage" => run_coverage(&problem, &cfg, &mut out)?,
        _ => run_variance_decay(&problem, &cfg, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsa-harness: {e}");
            if let HarnessError::Assumption { assumption, .. } = &e {
                eprintln!("failing assumption: {assumption}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
