//! `boundtrack`: track, forecast and evaluate bounded time series.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boundtrack::pipeline::experiment::DEFAULT_METHODS;
use boundtrack::pipeline::{self, Method, RunConfig};
use boundtrack::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boundtrack", version, about = "Online tracking of GLN models with a moving upper bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic series with a sinusoidal bound.
    Simulate(Common),
    /// Track parameters over a series and write the trajectory.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Issue one-step-ahead forecasts.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Trajectory written by `track`; tracked afresh when omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Score forecast files against the data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "forecasts", required = true)]
        forecasts: Vec<PathBuf>,
    },
    /// Select hyperparameters on a validation slice and score the test slice.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Monte Carlo comparison of all methods on synthetic replicas.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Also run batch NGD (slow).
        #[arg(long)]
        with_ngd: bool,
    },
}

fn load_config(common: &Common) -> boundtrack::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {path}: {source}")),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.method {
        cfg.method = m.parse()?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> boundtrack::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn run(cli: Cli) -> boundtrack::Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load_config(&common)?;
            ensure_dir(&common.out)?;
            for p in pipeline::cmd_simulate(&cfg, &common.out)? {
                println!("{}", p.display());
            }
        }
        Command::Track { common, data } => {
            let cfg = load_config(&common)?;
            ensure_dir(&common.out)?;
            let records = pipeline::cmd_track(&cfg, &data, &common.out)?;
            println!("{}: {} estimates", cfg.method, records.len());
        }
        Command::Forecast {
            common,
            data,
            trajectory,
        } => {
            let cfg = load_config(&common)?;
            ensure_dir(&common.out)?;
            let rows = pipeline::cmd_forecast(&cfg, &data, trajectory.as_deref(), &common.out)?;
            println!("{}: {} forecasts", cfg.method, rows.len());
        }
        Command::Evaluate {
            common,
            data,
            forecasts,
        } => {
            let cfg = load_config(&common)?;
            ensure_dir(&common.out)?;
            for r in pipeline::cmd_evaluate(&cfg, &data, &forecasts, &common.out)? {
                println!("{}: mean CRPS {:.4}% over {} forecasts", r.method, r.mean_crps, r.n);
            }
        }
        Command::Backtest { common, data } => {
            let cfg = load_config(&common)?;
            ensure_dir(&common.out)?;
            let o = pipeline::cmd_backtest(&cfg, &data, &common.out)?;
            let chosen: Vec<String> = o.winner.describe().iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!(
                "{}: chosen {}; validation CRPS {:.4}%, test CRPS {:.4}%",
                cfg.method,
                chosen.join(" "),
                o.validation_crps,
                o.test.mean_crps
            );
        }
        Command::Experiment { common, with_ngd } => {
            let cfg = load_config(&common)?;
            let mut methods = DEFAULT_METHODS.to_vec();
            if with_ngd {
                methods.push(Method::Ngd);
            }
            let summaries = pipeline::cmd_experiment(&cfg, &methods, &common.out)?;
            for m in methods {
                let crps = pipeline::experiment::average_crps(&summaries, m);
                println!("{m}: mean CRPS {crps:.4}%");
            }
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Divergence(_) => 4,
        Error::Data { .. } | Error::Input(_) | Error::Csv(_) | Error::Domain(_) | Error::Boundary { .. } => 3,
        Error::Io { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
