use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use coprop_core::harness::{self, config_fingerprint, plan_sweep, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "coprop", version, about = "Quantum/classical co-propagation crosstalk sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's output_dir, then runs/<fingerprint>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trajectory ensembles.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reduced preset: channels 34-42, 16 trajectories, 2^14-point grid.
    #[arg(long, global = true)]
    desk_scale: bool,
    /// Replace an existing run directory written by a different config.
    #[arg(long, global = true)]
    force: bool,
    /// Record per-row wall time in the CSV.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep.
    Simulate { config: PathBuf },
    /// Check a config and report the grids it resolves to.
    Validate { config: PathBuf },
    /// Run the deterministic cross-validation suite.
    Oracle,
}

fn resolve(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = harness::load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if cli.desk_scale {
        cfg = cfg.desk_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(cli: &Cli) -> RunOptions {
    let mut opts = RunOptions { timings: cli.timings, ..RunOptions::default() };
    if let Some(w) = cli.workers {
        opts.workers = w.max(1);
    }
    opts
}

fn simulate(cli: &Cli, path: &Path) -> Result<bool> {
    let cfg = resolve(cli, path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&config_fingerprint(&cfg)[..12]));
    let summary = harness::simulate(&cfg, &out, &options(cli), cli.force).with_context(|| format!("run in {}", out.display()))?;
    for (name, rows) in &summary.series {
        println!("{name}");
        for r in rows {
            println!("  x={:<12} C={:.6} ± {:.2e}  rms_co={:.6} rms_df={:.6}", r.x, r.c, r.c_stderr, r.rms_co, r.rms_df);
        }
    }
    println!("{} points computed, {} reused; results in {}", summary.computed, summary.reused, out.display());
    for f in &summary.failures {
        eprintln!("failed: {f}");
    }
    Ok(summary.failures.is_empty())
}

fn validate(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = resolve(cli, path)?;
    let series = plan_sweep(&cfg);
    let points: usize = series.iter().map(|s| s.points.len()).sum();
    println!("config ok: {} series, {} points, {} trajectories per ensemble, seed {}", series.len(), points, cfg.effective_ensemble(), cfg.master_seed);
    for s in &series {
        let mut t0s: Vec<f64> = s.points.iter().map(|p| p.t0).collect();
        t0s.dedup();
        for t0 in t0s {
            let setup = harness::sweep::build_setup(&cfg, t0, &s.grid_channels)?;
            let g = &setup.grid;
            println!(
                "  {}: t0={t0:e} s, n_tau={}, window={:.4}, d_zeta={:e}, steps={}, zeta_max={:.5}",
                s.name,
                g.n_tau,
                g.tau_window,
                g.d_zeta,
                g.n_steps,
                g.zeta_max()
            );
        }
    }
    Ok(())
}

fn oracle() -> Result<bool> {
    let checks = harness::run_oracle_suite()?;
    for c in &checks {
        println!("{} {:<45} {:.3e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config } => simulate(&cli, config),
        Command::Validate { config } => validate(&cli, config).map(|_| true),
        Command::Oracle => oracle(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
