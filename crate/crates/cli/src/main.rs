//! `xlmd` command-line front end.
//!
//! Settings come from built-in defaults, then `--config FILE`, then each
//! `--set KEY=VALUE` in order, then the named flags. Later sources win.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Environment variable that fixes the worker-thread count.
const THREADS_ENV: &str = "XLMD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "xlmd", version, about = "Exact, extended-Lagrangian and stochastic extended-Lagrangian MD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trajectory and write it as CSV.
    Run(Settings),
    /// Sweep one parameter and write per-seed and summary errors as CSV.
    Sweep(Settings),
    /// Estimate convergence orders from a sweep CSV or a `value,error` CSV.
    Order {
        input: PathBuf,
        /// Only values at or below this enter the fit.
        #[arg(long, default_value_t = f64::INFINITY)]
        threshold: f64,
    },
    /// Compare cost and accuracy of exact MD and Stochastic-XLMD.
    Compare(Settings),
    /// Analyse the frozen-r latent Langevin dynamics.
    Langevin(Settings),
}

#[derive(Args, Debug, Default)]
struct Settings {
    /// File of `key = value` lines (`#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Set any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,

    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    temp: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "tf")]
    t_f: Option<String>,
    #[arg(long)]
    scf_tol: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x_init: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    sample_interval: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    param: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    ref_dt: Option<String>,
    #[arg(long)]
    cache_dir: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
}

impl Settings {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("model", &self.model),
            ("method", &self.method),
            ("eps", &self.eps),
            ("temp", &self.temp),
            ("gamma", &self.gamma),
            ("dt", &self.dt),
            ("t_f", &self.t_f),
            ("scf_tol", &self.scf_tol),
            ("solver", &self.solver),
            ("seed", &self.seed),
            ("x_init", &self.x_init),
            ("output", &self.output),
            ("stride", &self.stride),
            ("sample_interval", &self.sample_interval),
            ("seeds", &self.seeds),
            ("param", &self.param),
            ("grid", &self.grid),
            ("threshold", &self.threshold),
            ("ref_dt", &self.ref_dt),
            ("cache_dir", &self.cache_dir),
            ("preset", &self.preset),
            ("r", &self.r),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    let with_config = |s: &Settings, f: fn(&RunConfig) -> Result<()>| -> Result<()> {
        let cfg = s.resolve()?;
        if s.dump_config {
            print!("{}", cfg.dump());
            return Ok(());
        }
        f(&cfg)
    };
    match &cli.command {
        Command::Run(s) => with_config(s, commands::run),
        Command::Sweep(s) => with_config(s, commands::sweep),
        Command::Compare(s) => with_config(s, commands::compare),
        Command::Langevin(s) => with_config(s, commands::langevin),
        Command::Order { input, threshold } => commands::order(input, *threshold),
    }
}

/// A reader such as `head` closing stdout early is not a failure.
fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c
            .downcast_ref::<std::io::Error>()
            .or_else(|| match c.downcast_ref::<xlmd::Error>() {
                Some(xlmd::Error::Io(io)) => Some(io),
                _ => None,
            });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
