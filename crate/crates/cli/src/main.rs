//! `simcli`: BER sweeps and channel condition statistics from the command line.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gmud::channel;
use gmud::sim::{self, SimConfig};
use gmud::{ConfigError, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "simcli",
    version,
    about = "Multi-user precoding link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep over SNR and write the curve as CSV.
    Run(Box<RunArgs>),
    /// Print median and mean channel condition numbers.
    CondStats(CondArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key=value` configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    snr_min: Option<String>,
    #[arg(long)]
    snr_max: Option<String>,
    #[arg(long)]
    snr_step: Option<String>,
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    paths: Option<String>,
    /// qpsk or qam16
    #[arg(long = "mod")]
    modulation: Option<String>,
    /// gmud or svd
    #[arg(long)]
    precoder: Option<String>,
    /// siso-multipath or mimo-flat
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// sum-inv-sinr, max-min-sinr or sum-sinr
    #[arg(long)]
    objective: Option<String>,
    /// Output CSV path; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> [(&'static str, &'static str, &Option<String>); 12] {
        [
            ("snr_db_min", "--snr-min", &self.snr_min),
            ("snr_db_max", "--snr-max", &self.snr_max),
            ("snr_db_step", "--snr-step", &self.snr_step),
            ("users", "--users", &self.users),
            ("paths", "--paths", &self.paths),
            ("modulation", "--mod", &self.modulation),
            ("precoder", "--precoder", &self.precoder),
            ("mode", "--mode", &self.mode),
            ("trials", "--trials", &self.trials),
            ("blocks_per_trial", "--blocks", &self.blocks),
            ("seed", "--seed", &self.seed),
            ("objective", "--objective", &self.objective),
        ]
    }

    fn config(&self) -> Result<SimConfig, Error> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            cfg.apply_text(&text)?;
        }
        for (key, flag, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v, flag)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CondArgs {
    /// siso-multipath or mimo-flat
    #[arg(long, default_value = "siso-multipath")]
    mode: String,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    users: usize,
    /// Taps per user, or antennas per side in MIMO mode.
    #[arg(long, default_value_t = 2)]
    paths: usize,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run(args: &RunArgs) -> Result<(), (u8, Error)> {
    let cfg = args.config().map_err(|e| (exit_code(&e), e))?;
    let runtime = |e: Error| (EXIT_RUNTIME, e);
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let start = Instant::now();
    let points = sim::run_sweep_with_workers(&cfg, workers).map_err(runtime)?;
    match &args.out {
        Some(path) => sim::write_csv(&points, &cfg, path).map_err(runtime)?,
        None => print!("{}", sim::render_csv(&points, &cfg)),
    }
    print!("{}", sim::summary(&points, &cfg, start.elapsed()));
    Ok(())
}

fn cond_stats(args: &CondArgs) -> Result<(), (u8, Error)> {
    if args.trials == 0 {
        let err = ConfigError::Validation("--trials must be at least 1".into());
        return Err((EXIT_CONFIG, err.into()));
    }
    let mut cfg = SimConfig {
        users: args.users,
        paths: args.paths,
        seed: args.seed,
        ..SimConfig::default()
    };
    cfg.set("mode", &args.mode, "--mode")
        .map_err(|e| (EXIT_CONFIG, e.into()))?;
    cfg.validate().map_err(|e| (EXIT_CONFIG, e.into()))?;
    let spec = cfg.ensemble().map_err(|e| (EXIT_CONFIG, e))?;
    let stats = channel::condition_stats(&spec, args.trials).map_err(|e| (exit_code(&e), e))?;
    println!(
        "mode {} | samples {} | median cond {:.6} | mean cond {:.6}",
        sim::mode_name(cfg.mode),
        stats.samples,
        stats.median,
        stats.mean
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::CondStats(args) => cond_stats(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
