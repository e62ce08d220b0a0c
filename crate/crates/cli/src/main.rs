use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use martlab::experiment::{run, write_outputs, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "martlab", version, about = "Martingale approximation experiments for stationary processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and compare moments of S_n/√n with exact values
    Simulate(Common),
    /// Remainder ‖S_n − M_n‖_p against the rate bound
    ApproxRate(Common),
    /// Quenched functional CLT gaps at a fixed past
    Quenched(Common),
    /// Quenched remainder decay E_0 max (S_k − M_k)²/n
    Resquen(Common),
    /// Moderate-deviation tail ratios
    Mdp(Common),
    /// Wasserstein distance to the Gaussian limit
    Wasserstein(Common),
    /// Cramér–von Mises rate
    Cvm(Common),
    /// Projective condition verdicts
    Conditions(Common),
    /// Dyadic chaining and conditional Doob bounds
    Inequalities(Common),
    /// Ergodic theorem with rate
    ErgodicRate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults for the subcommand when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed (overrides MARTLAB_SEED and the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::ApproxRate(c) => ("approx_rate", c),
            Command::Quenched(c) => ("quenched", c),
            Command::Resquen(c) => ("resquen", c),
            Command::Mdp(c) => ("mdp", c),
            Command::Wasserstein(c) => ("wasserstein", c),
            Command::Cvm(c) => ("cvm", c),
            Command::Conditions(c) => ("conditions", c),
            Command::Inequalities(c) => ("inequalities", c),
            Command::ErgodicRate(c) => ("ergodic_rate", c),
        }
    }
}

fn load_config(kind: &str, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?;
            if cfg.experiment.name() != kind {
                bail!("config {} describes a {} experiment, not {kind}", path.display(), cfg.experiment.name());
            }
            cfg
        }
        None => ExperimentConfig { experiment: ExperimentKind::default_for(kind)?, ..Default::default() },
    };
    let env = std::env::var("MARTLAB_SEED").ok();
    cfg.resolve_seed(common.seed, env.as_deref())?;
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let (kind, common) = cli.command.split();
    let cfg = load_config(kind, common)?;
    let out = run(&cfg)?;
    let files = write_outputs(&out, &cfg, &cfg.out_dir)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match common.format {
        Format::Json => writeln!(lock, "{}", out.report.to_json()?)?,
        Format::Csv => out.report.write_rows_csv(&mut lock)?,
    }
    eprintln!(
        "{kind}: verdict {} (seed {}, {} workers, {:.2}s)",
        out.report.verdict(),
        cfg.seed,
        cfg.workers,
        out.report.runtime.wall_time_s
    );
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}
