use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use stfbc::config::{load_config, SimConfig};
use stfbc::harness::{self, aggregate, format_table, read_records, write_cdf, write_report};
use stfbc::montecarlo::write_sample_dump;

const WORKERS_ENV: &str = "STFBC_WORKERS";

#[derive(Parser)]
#[command(name = "stfbc", version, about = "Orthogonal-coding D-MIMO rate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every drop of one configuration.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also dump raw SINR samples of the coded scheme per drop.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Repeat a run while varying one size parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-aggregate a stored rates file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Optional CDF output path.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    M,
    K,
    L,
    N,
}

impl SweepParam {
    fn apply(self, cfg: &mut SimConfig, v: usize) {
        match self {
            SweepParam::M => cfg.m_rus = v,
            SweepParam::K => cfg.k_ues = v,
            SweepParam::L => cfg.l_per_ru = v,
            SweepParam::N => cfg.n_per_ue = v,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepParam::M => "m",
            SweepParam::K => "k",
            SweepParam::L => "l",
            SweepParam::N => "n",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<stfbc::Error> for Failure {
    fn from(e: stfbc::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn config_from(
    path: Option<&Path>,
    edit: impl FnOnce(&mut SimConfig),
) -> Result<SimConfig, Failure> {
    let mut cfg = match path {
        Some(p) => load_config(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => SimConfig::default(),
    };
    edit(&mut cfg);
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn run_one(cfg: &SimConfig, out: &Path, dump: bool) -> Result<(), Failure> {
    info!(
        "M={} K={} L={} N={} drops={} trials={}",
        cfg.m_rus, cfg.k_ues, cfg.l_per_ru, cfg.n_per_ue, cfg.n_drops, cfg.n_trial
    );
    let reports = harness::run(cfg)?;
    let summary = write_report(out, cfg, &reports)?;
    if dump {
        for d in 0..cfg.n_drops {
            let samples = harness::coded_samples(cfg, d)?;
            write_sample_dump(&samples, out.join(format!("samples_drop{d}")))?;
        }
    }
    print!("{}", format_table(&summary.percentiles));
    if !summary.power_violations.is_empty() {
        info!("{} per-antenna power violations", summary.power_violations.len());
    }
    if summary.fallback_users > 0 {
        info!("{} users used the quadrature fallback", summary.fallback_users);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            drops,
            seed,
            trials,
            dump_samples,
        } => {
            let cfg = config_from(config.as_deref(), |c| {
                if let Some(d) = drops {
                    c.n_drops = d;
                }
                if let Some(s) = seed {
                    c.seed = s;
                }
                if let Some(t) = trials {
                    c.n_trial = t;
                }
            })?;
            run_one(&cfg, &out, dump_samples)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            drops,
            trials,
        } => {
            for v in values {
                let cfg = config_from(config.as_deref(), |c| {
                    param.apply(c, v);
                    if let Some(d) = drops {
                        c.n_drops = d;
                    }
                    if let Some(t) = trials {
                        c.n_trial = t;
                    }
                })?;
                println!("{}={v}", param.label());
                run_one(&cfg, &out.join(format!("{}{v}", param.label())), false)?;
            }
            Ok(())
        }
        Command::Stats { input, cdf } => {
            let records = read_records(&input)?;
            let summaries = aggregate(&records)?;
            if let Some(path) = cdf {
                write_cdf(path, &summaries)?;
            }
            print!("{}", format_table(&summaries));
            Ok(())
        }
    }
}

fn init_workers() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match init_workers().and_then(|_| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
