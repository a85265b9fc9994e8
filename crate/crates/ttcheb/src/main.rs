//! Command-line driver: single checkpointed runs, Chebyshev-order
//! convergence sweeps, split-operator comparison sweeps, Bessel-table dumps,
//! and default-configuration printing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ttcheb::config::RunConfig;
use ttcheb::runner::{
    load_checkpoint, run_convergence_study, run_simulation, run_simulation_from,
    run_soft_comparison, write_bessel_table,
};
use ttcheb::TtError;

#[derive(Parser)]
#[command(name = "ttcheb", version, about = "Chebyshev wavepacket propagation on tensor trains")]
struct Cli {
    /// Flat key = value configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for independent sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Force sequential, deterministic execution (same as --jobs 1).
    #[arg(long, global = true)]
    single_thread: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate one run, writing survival.csv, slices, and checkpoints.
    Run {
        /// Resume from a checkpoint_<index> state file written by a prior run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sweep the Chebyshev order against the analytic coherent state.
    Converge {
        /// Comma-separated list of series orders to test.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        /// Comma-separated list of final times (default: the configured t_final).
        #[arg(long, value_delimiter = ',')]
        t_list: Vec<f64>,
    },
    /// Compare per-step Chebyshev against split-operator over a dt ladder.
    SoftCompare {
        /// Comma-separated list of time steps; each must divide t_final.
        #[arg(long, value_delimiter = ',', required = true)]
        dt_list: Vec<f64>,
    },
    /// Dump a CSV of Bessel weights J_k(x) for auditing the series.
    Bessel {
        /// Series argument t⁻.
        #[arg(long)]
        x: f64,
        /// Number of orders to tabulate.
        #[arg(long, default_value_t = 200)]
        terms: usize,
        /// Output file.
        #[arg(long, default_value = "bessel.csv")]
        file: PathBuf,
    },
    /// Print the default configuration in config-file form.
    PrintDefaults,
}

fn load_config(cli: &Cli) -> Result<RunConfig, TtError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Checkpoint index encoded in a `checkpoint_<index>.<ext>` file name.
fn checkpoint_index(path: &PathBuf) -> Result<usize, TtError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| TtError::Config(format!("bad checkpoint path {}", path.display())))?;
    stem.strip_prefix("checkpoint_")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| {
            TtError::Config(format!(
                "cannot read a checkpoint index from '{stem}'; expected checkpoint_<index>"
            ))
        })
}

fn real_main(cli: &Cli) -> Result<(), TtError> {
    let jobs = if cli.single_thread { 1 } else { cli.jobs.max(1) };
    match &cli.cmd {
        Cmd::Run { resume } => {
            let cfg = load_config(cli)?;
            let report = match resume {
                Some(path) => {
                    let idx = checkpoint_index(path)?;
                    let state = load_checkpoint(path, cfg.format)?;
                    run_simulation_from(&cfg, Some((state, idx)))?
                }
                None => run_simulation(&cfg)?,
            };
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let last = report.rows.last().expect("a run has at least one checkpoint");
            println!(
                "completed {} checkpoints; final |S| = {:.6e}, norm = {:.8}, max rank = {}",
                report.rows.len(),
                last.s.norm(),
                last.norm,
                report.rows.iter().map(|r| r.max_rank).max().unwrap_or(0)
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Cmd::Converge { n_list, t_list } => {
            let cfg = load_config(cli)?;
            let ts = if t_list.is_empty() { vec![cfg.t_final] } else { t_list.clone() };
            let rows = run_convergence_study(&cfg, &ts, n_list, jobs)?;
            for r in &rows {
                println!("t = {:<8} N = {:<6} l2_error = {:.6e}", r.t, r.n_poly, r.l2);
            }
            println!("wrote {}/convergence.csv", cfg.out_dir);
        }
        Cmd::SoftCompare { dt_list } => {
            let cfg = load_config(cli)?;
            let rows = run_soft_comparison(&cfg, dt_list, jobs)?;
            for r in &rows {
                println!(
                    "dt = {:<10} err_ttc = {:.4e} err_soft = {:.4e} acorr_ttc = {:.4e} acorr_soft = {:.4e}",
                    r.dt, r.err_ttc, r.err_soft, r.acorr_err_ttc, r.acorr_err_soft
                );
            }
            println!("wrote {}/soft_compare.csv", cfg.out_dir);
        }
        Cmd::Bessel { x, terms, file } => {
            write_bessel_table(file, *terms, *x)?;
            println!("wrote {}", file.display());
        }
        Cmd::PrintDefaults => {
            print!("{}", RunConfig::print_defaults());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                TtError::Divergence(_) => 3,
                TtError::Io(_) | TtError::Format(_) => 4,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
