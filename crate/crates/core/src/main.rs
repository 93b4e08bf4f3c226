use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use superrad::harness::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "superrad", version, about = "Collective superradiance, squeezing and dark-state storage")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads for parameter scans
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// cap on the symmetric-basis dimension
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// append entanglement-witness columns (cumulant-run, ed-run)
    #[arg(long, global = true)]
    witness: bool,
    /// configuration overrides, key=value
    #[arg(long = "set", short = 's', global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// V, dV/dθ, d²V/dθ² along θ
    Potential,
    /// dark states and critical points in a θ window
    Darkstates,
    /// HP squeezing spectrum versus NΓt
    HpSqueeze,
    /// steady-state HP squeezing over a (θ₀, β) grid
    HpMap,
    /// cumulant evolution of the leading Σ̃ eigenvalues
    CumulantRun,
    /// exact symmetric-subspace evolution
    EdRun,
    /// drive, rotate and store, on the engine selected by `engine`
    Protocol,
    /// best squeezing versus N and the fitted exponent
    Scaling,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Potential => Command::Potential,
            Cmd::Darkstates => Command::DarkStates,
            Cmd::HpSqueeze => Command::HpSqueeze,
            Cmd::HpMap => Command::HpMap,
            Cmd::CumulantRun => Command::CumulantRun,
            Cmd::EdRun => Command::EdRun,
            Cmd::Protocol => Command::Protocol,
            Cmd::Scaling => Command::Scaling,
        }
    }
}

fn execute(cli: &Cli) -> superrad::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| superrad::Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(m) = cli.max_dim {
        cfg.set("max_dim", &m.to_string())?;
    }
    if cli.witness {
        cfg.set("witness", "true")?;
    }
    let table = run(cli.command.into(), &cfg)?;
    let out = cli.out.clone().or_else(|| cfg.output.clone());
    match out {
        Some(p) => std::fs::write(p, table.to_csv())?,
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
