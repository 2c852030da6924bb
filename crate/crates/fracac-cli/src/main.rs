use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use fracac_cli::{defaults, run, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    SubordinatorStats,
    VoteMath,
    Estimate,
    CouplingCheck,
    OracleRun,
    McfTrack,
    AssumptionReport,
    Acceptance,
}

/// Branching-process duality experiments for the fractional Allen–Cahn equation.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.
#[derive(Parser, Debug)]
#[command(name = "fracac", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// `key = value` config; keys override the command's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "fracac-out")]
    out: PathBuf,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let name = cli.command.to_possible_value().expect("named").get_name().to_string();
    let mut cfg = defaults(&name)?;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.merge(&RunConfig::parse(&text)?)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        anyhow::ensure!(w > 0, "usage: workers must be positive");
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        print!("{}", cfg.render());
        return Ok(true);
    }
    let out = run(&cfg)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    std::fs::write(cli.out.join("run.cfg"), cfg.render())?;
    for (name, bytes) in &out.files {
        std::fs::write(cli.out.join(name), bytes)?;
    }
    for c in &out.checks {
        println!("{}", c.line());
    }
    println!("wrote {} files to {}", out.files.len() + 1, cli.out.display());
    Ok(out.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
