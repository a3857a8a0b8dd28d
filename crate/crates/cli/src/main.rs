use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use openrates_cli::config::{self, EvlConfig, HittingConfig, SftConfig, SweepConfig};
use openrates_cli::{commands, selftest, CliError};

#[derive(Parser)]
#[command(name = "openrates", version, about = "Escape rates, extremal indices and hitting statistics for open systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps and sampling.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Leading eigenvalue and escape rate along an ε-sweep.
    EscapeRate,
    /// θ_{N,ε} along an ε-sweep, extrapolated to ε = 0.
    ExtremalIndex,
    /// Survival curves and the exponential law for hitting times.
    Hitting,
    /// Extreme value law for a distance observable.
    Evl,
    /// Entropy drop of a subshift when blocks are forbidden.
    SftEntropy,
    /// Reduced-scale acceptance checks from a pinned config.
    Selftest,
}

fn need_config(path: &Option<PathBuf>) -> Result<&Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config("this subcommand needs --config PATH".into()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = &cli.out;
    let ignore_seed = || {
        if cli.seed.is_some() {
            log::warn!("--seed has no effect on this subcommand");
        }
    };
    match cli.command {
        Command::EscapeRate | Command::ExtremalIndex => {
            ignore_seed();
            let cfg: SweepConfig = config::load(need_config(&cli.config)?)?;
            let s = if matches!(cli.command, Command::EscapeRate) {
                commands::escape_rate(&cfg, out)?
            } else {
                commands::extremal_index(&cfg, out)?
            };
            match s.theta_hat() {
                Some(t) => println!("theta_hat = {t:.8}"),
                None => println!("theta_hat = n/a"),
            }
        }
        Command::Hitting => {
            let mut cfg: HittingConfig = config::load(need_config(&cli.config)?)?;
            cfg.seed = cli.seed.or(cfg.seed);
            let items = commands::hitting(&cfg, out)?;
            for it in &items {
                match &it.scaling {
                    Some(s) => println!("epsilon = {:e}: xi = {:.6}, C_hat = {:.4}", it.epsilon, s.xi_eps, s.c_hat),
                    None => println!("epsilon = {:e}: zero-mass hole", it.epsilon),
                }
            }
        }
        Command::Evl => {
            let mut cfg: EvlConfig = config::load(need_config(&cli.config)?)?;
            cfg.seed = cli.seed.or(cfg.seed);
            let s = commands::run_evl(&cfg, out)?;
            println!("theta_hat = {:.6} +- {:.6}, predicted {:.6}", s.theta_hat, s.theta_hat_stderr, s.theta);
        }
        Command::SftEntropy => {
            ignore_seed();
            let cfg: SftConfig = config::load(need_config(&cli.config)?)?;
            let s = commands::sft_entropy(&cfg, out)?;
            println!("h_closed = {:.12}", s.h_closed);
        }
        Command::Selftest => {
            if cli.config.is_some() {
                return Err(CliError::Config("selftest runs a pinned config; drop --config".into()));
            }
            let checks = selftest::run(cli.seed, out)?;
            for c in &checks {
                println!("{} {} {} {:e}", if c.pass { "PASS" } else { "FAIL" }, c.criterion, c.name, c.value);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OPENRATES_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
