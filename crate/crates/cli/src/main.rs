use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sixdma::harness::{self, validate, ExperimentConfig, SchemeId, SweepAxis};

#[derive(Parser)]
#[command(name = "sixdma", version, about = "Two-timescale rotatable-IRS and 6DMA downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON experiment file; built-in defaults otherwise.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Laptop-sized profile, applied before --seed and --scheme.
    #[arg(long)]
    desk: bool,
    /// Output directory.
    #[arg(long, value_name = "PATH", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme on every S-CSI realization.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "NAME")]
        scheme: Option<String>,
    },
    /// Sweep schemes along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// power | elements | paths | aperture
        #[arg(long, value_name = "NAME")]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        points: Option<Vec<f64>>,
        /// Comma-separated scheme names.
        #[arg(long = "scheme", value_name = "NAME", value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Emit per-iteration DE and SSCA traces.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Trace the single-user position DE instead of the multi-user solvers.
        #[arg(long)]
        single_user: bool,
    },
    /// Run the oracle checks.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if common.desk {
        cfg.apply_desk();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn report(dir: &Path, what: &str) {
    eprintln!("{what} written to {}", dir.display());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { common, scheme } => {
            let mut cfg = load(&common)?;
            if let Some(s) = scheme {
                cfg.scheme = SchemeId::parse(&s)?;
            }
            let out = harness::run(&cfg)?;
            out.write(&common.out, "run", &cfg, git_hash())?;
            for row in &out.summary {
                println!("{} {:.4} ± {:.4} bit/s/Hz over {} realizations", row.scheme, row.mean_rate, row.std_error, row.seeds);
            }
            report(&common.out, "results");
        }
        Command::Sweep { common, axis, points, schemes } => {
            let mut cfg = load(&common)?;
            if let Some(a) = axis {
                cfg.sweep.axis = SweepAxis::parse(&a)?;
            }
            if let Some(p) = points {
                cfg.sweep.points = p;
            }
            if let Some(s) = schemes {
                cfg.sweep.schemes = s.iter().map(|n| SchemeId::parse(n)).collect::<sixdma::Result<_>>()?;
            }
            let out = harness::run_sweep(&cfg, &cfg.sweep.schemes, cfg.sweep.axis, &cfg.sweep.points)?;
            out.write(&common.out, "sweep", &cfg, git_hash())?;
            for row in &out.summary {
                println!("{} {}={} {:.4} ± {:.4}", row.scheme, row.axis, row.value.unwrap_or(f64::NAN), row.mean_rate, row.std_error);
            }
            report(&common.out, "sweep");
        }
        Command::Convergence { common, single_user } => {
            let cfg = load(&common)?;
            let rows = if single_user { harness::single_user_convergence(&cfg)? } else { harness::multi_user_convergence(&cfg)? };
            harness::write_traces(&common.out, &rows, "convergence", &cfg, git_hash())?;
            println!("{} trace rows", rows.len());
            report(&common.out, "traces");
        }
        Command::Validate { common } => {
            let cfg = load(&common)?;
            let checks = validate::run_suite(&cfg)?;
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(common.out.join("validate.json"), serde_json::to_string_pretty(&checks)? + "\n")?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Config { common } => {
            print!("{}", load(&common)?.to_toml()?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
