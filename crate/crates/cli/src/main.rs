mod commands;
mod grid;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memchan_core::conditions::GaussianConditionParams;
use memchan_core::Execution;
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::ConfigError;
use grid::{Grid, IntGrid};
use output::Table;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

/// Quantum capacity of dephasing channels with many-body memory environments.
#[derive(Parser)]
#[command(name = "memchan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output; metadata goes to the matching .meta.json. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a gnuplot script for the CSV
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads (MEMCHAN_JOBS takes precedence)
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit with status 2 if any point fails
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Markov-chain environment
    Markov(Common),
    /// Classical Ising environment, swept over beta, J, M, D
    Ising(Common),
    /// MPS capacity from enumerated diagonal entropies
    MpsCapacity {
        #[command(flatten)]
        common: Common,
        /// Lengths to enumerate, e.g. 8:13
        #[arg(long)]
        n: Option<IntGrid>,
    },
    /// Rank-1 MPS capacity through the Ising mapping
    MpsRank1(Common),
    /// Wolf-model capacity curve
    WolfSweep {
        #[command(flatten)]
        common: Common,
        /// Grid of g, e.g. -2:2:0.05
        #[arg(long, allow_hyphen_values = true)]
        g: Option<Grid>,
    },
    /// Quantum Ising (or Wolf) ground-state capacity by exact diagonalization
    QisingSweep {
        #[command(flatten)]
        common: Common,
        /// Chain lengths, e.g. 6,8,10
        #[arg(long)]
        n: Option<IntGrid>,
        #[arg(long, allow_hyphen_values = true)]
        g: Option<Grid>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decay of the mutual-information bound between harmonic-chain blocks
    GaussianDecay {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
    },
    /// Convergence of block covariances with chain length
    GaussianLongshort {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
    },
    /// Forgetfulness checks for an MPS environment
    ConditionsMps(Common),
    /// Forgetfulness checks for a harmonic chain
    ConditionsGaussian {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
    },
    /// Finite-n coherent information table
    Hashing {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<IntGrid>,
    },
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, ConfigError> {
    let (text, name) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => ("{}".to_string(), "<no config>".to_string()),
    };
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{name}: {e}")))
}

fn jobs(requested: Option<usize>) -> Result<usize, ConfigError> {
    let from_env = match std::env::var("MEMCHAN_JOBS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| ConfigError(format!("MEMCHAN_JOBS={v:?} is not a count")))?),
        Err(_) => None,
    };
    let n = from_env.or(requested).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(ConfigError("jobs must be at least 1".into()));
    }
    Ok(n)
}

fn execute<C: Serialize>(
    name: &str,
    common: &Common,
    config: C,
    run: impl FnOnce(&C, Execution) -> Result<Table, ConfigError> + Send,
) -> Result<ExitCode, ConfigError>
where
    C: Sync,
{
    let jobs = jobs(common.jobs)?;
    let table = if jobs == 1 {
        run(&config, Execution::Sequential)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| run(&config, Execution::Parallel))?
    };
    output::write_outputs(&table, name, &config, jobs, common.out.as_deref(), common.plot.as_deref())?;
    for w in &table.failures {
        eprintln!("warning: {w}");
    }
    if common.strict && !table.failures.is_empty() {
        return Ok(ExitCode::from(EXIT_NUMERIC));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(command: Command) -> Result<ExitCode, ConfigError> {
    match command {
        Command::Markov(c) => {
            let cfg: commands::MarkovConfig = load(c.config.as_deref())?;
            execute("markov", &c, cfg, |cfg, _| commands::markov(cfg))
        }
        Command::Ising(c) => {
            let cfg: commands::IsingConfig = load(c.config.as_deref())?;
            execute("ising", &c, cfg, commands::ising)
        }
        Command::MpsCapacity { common: c, n } => {
            let mut cfg: commands::MpsCapacityConfig = load(c.config.as_deref())?;
            if let Some(n) = n {
                cfg.n = n;
            }
            execute("mps-capacity", &c, cfg, commands::mps_capacity)
        }
        Command::MpsRank1(c) => {
            let cfg: commands::Rank1Config = load(c.config.as_deref())?;
            execute("mps-rank1", &c, cfg, commands::mps_rank1)
        }
        Command::WolfSweep { common: c, g } => {
            let mut cfg: commands::WolfConfig = load(c.config.as_deref())?;
            if let Some(g) = g {
                cfg.g = g;
            }
            execute("wolf-sweep", &c, cfg, commands::wolf_sweep)
        }
        Command::QisingSweep { common: c, n, g, seed } => {
            let mut cfg: commands::QisingConfig = load(c.config.as_deref())?;
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(g) = g {
                cfg.g = g;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            execute("qising-sweep", &c, cfg, commands::qising_sweep)
        }
        Command::GaussianDecay { common: c, kappa } => {
            let mut cfg: commands::GaussianDecayConfig = load(c.config.as_deref())?;
            if let Some(k) = kappa {
                cfg.kappa = k;
            }
            execute("gaussian-decay", &c, cfg, commands::gaussian_decay)
        }
        Command::GaussianLongshort { common: c, kappa } => {
            let mut cfg: commands::GaussianLongshortConfig = load(c.config.as_deref())?;
            if let Some(k) = kappa {
                cfg.kappa = k;
            }
            execute("gaussian-longshort", &c, cfg, commands::gaussian_longshort)
        }
        Command::ConditionsMps(c) => {
            let cfg: commands::ConditionsMpsConfig = load(c.config.as_deref())?;
            execute("conditions-mps", &c, cfg, commands::conditions_mps)
        }
        Command::ConditionsGaussian { common: c, kappa } => {
            let mut cfg: GaussianConditionParams = match c.config.as_deref() {
                Some(p) => load(Some(p))?,
                None => GaussianConditionParams::with_kappa(0.2),
            };
            if let Some(k) = kappa {
                cfg.kappa = k;
            }
            execute("conditions-gaussian", &c, cfg, commands::conditions_gaussian)
        }
        Command::Hashing { common: c, n } => {
            let mut cfg: commands::HashingConfig = load(c.config.as_deref())?;
            if let Some(n) = n {
                cfg.n = n;
            }
            execute("hashing", &c, cfg, commands::hashing)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
