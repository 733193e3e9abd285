//! `ep-spectra`: deterministic spectral experiments around exceptional
//! points, with JSON/CSV reports and a run manifest.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use report::{Format, RunWriter};

#[derive(Parser)]
#[command(name = "ep-spectra", version, about = "Spectra near exceptional points: finite chain models, their perturbation unfolding, and the truncated imaginary cubic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory for report files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report format: json, csv or both
    #[arg(long, default_value = "both")]
    format: String,
    /// TOML config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random families
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a coupling ray and locate the coalescence point
    EpnSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "J")]
        j: Option<usize>,
        /// Coupling direction, outermost first, or `standard`
        #[arg(long)]
        direction: Option<String>,
        /// Linear grid `start:end:count`
        #[arg(long = "t-grid")]
        t_grid: Option<String>,
    },
    /// Locate the coalescence and build the Jordan chain of the realized matrix
    EpnCanon {
        #[command(flatten)]
        common: Common,
        #[arg(long = "J")]
        j: Option<usize>,
        #[arg(long)]
        direction: Option<String>,
        #[arg(long = "t-grid")]
        t_grid: Option<String>,
    },
    /// Solve the secular equation for a perturbation family at one scale
    EpnPerturb {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<usize>,
        /// corner | admissible | diagonal | random-benign | random-malign
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        /// `direct` or `series:<order>`
        #[arg(long)]
        mode: Option<String>,
    },
    /// Classify a family and report its rescaling growth and splitting exponent
    EpnClassify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        family: Option<String>,
        /// Geometric grid `start:end:count` for the rescaling table
        #[arg(long = "lambda-grid")]
        lambda_grid: Option<String>,
        /// Geometric grid for the splitting-exponent fit
        #[arg(long = "fit-grid")]
        fit_grid: Option<String>,
    },
    /// Truncated oscillator spectrum with convergence and parallelization diagnostics
    IcSpectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: Option<u8>,
        /// Ascending truncation list, e.g. `64,128`
        #[arg(long = "M")]
        m: Option<String>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
        /// Build the rank-K truncated metric and its residual
        #[arg(long = "metric-K")]
        metric_k: Option<usize>,
    },
    /// Chain basis over the converged tail with conditioning diagnostics
    IepBasis {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: Option<u8>,
        #[arg(long = "M")]
        m: Option<usize>,
        /// Partition index (default: converged window / 4, at least 2)
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "p-max")]
        p_max: Option<usize>,
    },
    /// First-order perturbation of the bidiagonal canonical form
    IepPerturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: Option<u8>,
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long = "n-trunc")]
        n_trunc: Option<usize>,
        /// dense | diagonal
        #[arg(long)]
        family: Option<String>,
        /// Geometric grid for the remainder ladder
        #[arg(long = "lambda-grid")]
        lambda_grid: Option<String>,
    },
}

/// Config-file lookup: `[table]` section keyed by the command name with
/// underscores, values match the flag names.
struct FileConfig {
    table: Option<toml::Table>,
}

impl FileConfig {
    fn load(path: Option<&PathBuf>, command: &str) -> Result<Self> {
        let table = match path {
            None => None,
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let root: toml::Table = text.parse().context("parsing config TOML")?;
                match root.get(command) {
                    Some(toml::Value::Table(t)) => Some(t.clone()),
                    Some(_) => anyhow::bail!("config section [{command}] must be a table"),
                    None => None,
                }
            }
        };
        Ok(Self { table })
    }

    fn str(&self, key: &str) -> Option<String> {
        self.table
            .as_ref()
            .and_then(|t| t.get(key))
            .and_then(|v| v.as_str().map(str::to_string))
    }

    fn uint(&self, key: &str) -> Option<u64> {
        self.table
            .as_ref()
            .and_then(|t| t.get(key))
            .and_then(|v| v.as_integer())
            .map(|v| v as u64)
    }

    fn float(&self, key: &str) -> Option<f64> {
        self.table.as_ref().and_then(|t| t.get(key)).and_then(|v| {
            v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
        })
    }
}

fn writer_for(common: &Common, command: &str) -> Result<RunWriter> {
    let format: Format = common.format.parse()?;
    RunWriter::new(&common.out, command, format)
}

fn resolved_seed(common: &Common, cfg: &FileConfig) -> u64 {
    common.seed.or_else(|| cfg.uint("seed")).unwrap_or(0)
}

fn run() -> Result<()> {
    if let Ok(threads) = std::env::var("EP_SPECTRA_THREADS") {
        let n: usize = threads
            .parse()
            .context("EP_SPECTRA_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .ok();
    }
    let cli = Cli::parse();
    match cli.command {
        Command::EpnSweep {
            common,
            j,
            direction,
            t_grid,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "epn_sweep")?;
            let j = j.or(cfg.uint("J").map(|v| v as usize)).unwrap_or(1);
            let direction = direction
                .or_else(|| cfg.str("direction"))
                .unwrap_or_else(|| "standard".into());
            let t_grid = t_grid
                .or_else(|| cfg.str("t_grid"))
                .unwrap_or_else(|| "0:0.999:200".into());
            let writer = writer_for(&common, "epn-sweep")?;
            commands::epn_sweep(&writer, j, &direction, &t_grid, resolved_seed(&common, &cfg))
        }
        Command::EpnCanon {
            common,
            j,
            direction,
            t_grid,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "epn_canon")?;
            let j = j.or(cfg.uint("J").map(|v| v as usize)).unwrap_or(2);
            let direction = direction
                .or_else(|| cfg.str("direction"))
                .unwrap_or_else(|| "standard".into());
            let t_grid = t_grid
                .or_else(|| cfg.str("t_grid"))
                .unwrap_or_else(|| "0:0.99:100".into());
            let writer = writer_for(&common, "epn-canon")?;
            commands::epn_canon(&writer, j, &direction, &t_grid, resolved_seed(&common, &cfg))
        }
        Command::EpnPerturb {
            common,
            n,
            family,
            lambda,
            mode,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "epn_perturb")?;
            let n = n.or(cfg.uint("N").map(|v| v as usize)).unwrap_or(3);
            let family = family
                .or_else(|| cfg.str("family"))
                .unwrap_or_else(|| "corner".into());
            let lambda = lambda.or_else(|| cfg.float("lambda")).unwrap_or(1e-6);
            let mode = mode
                .or_else(|| cfg.str("mode"))
                .unwrap_or_else(|| "direct".into());
            let writer = writer_for(&common, "epn-perturb")?;
            commands::epn_perturb(
                &writer,
                n,
                &family,
                lambda,
                &mode,
                resolved_seed(&common, &cfg),
            )
        }
        Command::EpnClassify {
            common,
            n,
            family,
            lambda_grid,
            fit_grid,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "epn_classify")?;
            let n = n.or(cfg.uint("N").map(|v| v as usize)).unwrap_or(4);
            let family = family
                .or_else(|| cfg.str("family"))
                .unwrap_or_else(|| "admissible".into());
            let lambda_grid = lambda_grid
                .or_else(|| cfg.str("lambda_grid"))
                .unwrap_or_else(|| "1e-6:1e-2:3".into());
            let fit_grid = fit_grid
                .or_else(|| cfg.str("fit_grid"))
                .unwrap_or_else(|| "1e-7:1e-4:13".into());
            let writer = writer_for(&common, "epn-classify")?;
            commands::epn_classify(
                &writer,
                n,
                &family,
                &lambda_grid,
                &fit_grid,
                resolved_seed(&common, &cfg),
            )
        }
        Command::IcSpectrum {
            common,
            delta,
            m,
            n_max,
            metric_k,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "ic_spectrum")?;
            let delta = delta.or(cfg.uint("delta").map(|v| v as u8)).unwrap_or(1);
            let m = m
                .or_else(|| cfg.str("M"))
                .unwrap_or_else(|| "64,128".into());
            let n_max = n_max.or(cfg.uint("n_max").map(|v| v as usize));
            let metric_k = metric_k.or(cfg.uint("metric_K").map(|v| v as usize));
            let writer = writer_for(&common, "ic-spectrum")?;
            commands::ic_spectrum(
                &writer,
                delta,
                &m,
                n_max,
                metric_k,
                resolved_seed(&common, &cfg),
            )
        }
        Command::IepBasis {
            common,
            delta,
            m,
            k,
            p_max,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "iep_basis")?;
            let delta = delta.or(cfg.uint("delta").map(|v| v as u8)).unwrap_or(1);
            let m = m.or(cfg.uint("M").map(|v| v as usize)).unwrap_or(128);
            let k = k.or(cfg.uint("K").map(|v| v as usize));
            let p_max = p_max.or(cfg.uint("p_max").map(|v| v as usize)).unwrap_or(8);
            let writer = writer_for(&common, "iep-basis")?;
            commands::iep_basis(&writer, delta, m, k, p_max, resolved_seed(&common, &cfg))
        }
        Command::IepPerturb {
            common,
            delta,
            m,
            n_trunc,
            family,
            lambda_grid,
        } => {
            let cfg = FileConfig::load(common.config.as_ref(), "iep_perturb")?;
            let delta = delta.or(cfg.uint("delta").map(|v| v as u8)).unwrap_or(1);
            let m = m.or(cfg.uint("M").map(|v| v as usize)).unwrap_or(128);
            let n_trunc = n_trunc
                .or(cfg.uint("n_trunc").map(|v| v as usize))
                .unwrap_or(24);
            let family = family
                .or_else(|| cfg.str("family"))
                .unwrap_or_else(|| "dense".into());
            let lambda_grid = lambda_grid
                .or_else(|| cfg.str("lambda_grid"))
                .unwrap_or_else(|| "1e-8:1e-4:5".into());
            let writer = writer_for(&common, "iep-perturb")?;
            commands::iep_perturb(
                &writer,
                delta,
                m,
                n_trunc,
                &family,
                &lambda_grid,
                resolved_seed(&common, &cfg),
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<ep_spectra_core::Error>() {
                // out-of-range parameters are validation failures even when
                // the library is the one to notice
                Some(ep_spectra_core::Error::InvalidArgument(_)) | None => ExitCode::from(2),
                Some(_) => ExitCode::from(3),
            }
        }
    }
}
