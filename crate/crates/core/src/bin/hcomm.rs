use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hcomm::experiments::{
    run_besov, run_certify, run_commutator, run_constancy, run_equivalence, run_kernel_checks,
    run_schatten, run_structure_checks, ExperimentConfig, Lab, Report,
};

/// Commutator experiments on the Heisenberg group.
#[derive(Parser, Debug)]
#[command(name = "hcomm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for sphere-table caches.
    #[arg(long, global = true)]
    kernel_cache: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write per-figure CSVs.
    #[arg(long, global = true)]
    emit_plot_data: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Group, tiling and Haar suites.
    Structure,
    /// Heat and Riesz kernels, closed forms, sphere scans.
    Kernel,
    /// Partner-tile certification.
    Certify,
    /// Commutator assembly with the NWO and mixed-norm bounds.
    Commutator,
    /// Singular values and Schatten norms.
    Schatten,
    /// Besov estimators.
    Besov,
    /// Schatten/Besov ratios across the symbol family.
    Equivalence,
    /// Oscillation and spectral sums at depths D and D+1.
    Constancy,
    /// Prints the effective config.
    Config,
}

fn run(cli: &Cli) -> hcomm::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &cli.kernel_cache {
        cfg.cache_dir = Some(d.clone());
    }
    if let Some(d) = &cli.out {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| hcomm::Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Config = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(true);
    }
    let lab = Lab::new(cfg)?;
    let report: Report = match cli.command {
        Command::Structure => run_structure_checks(&lab),
        Command::Kernel => run_kernel_checks(&lab),
        Command::Certify => run_certify(&lab),
        Command::Commutator => run_commutator(&lab),
        Command::Schatten => run_schatten(&lab),
        Command::Besov => run_besov(&lab),
        Command::Equivalence => run_equivalence(&lab),
        Command::Constancy => run_constancy(&lab),
        Command::Config => unreachable!(),
    };
    for r in &report.rows {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        let note = if r.note.is_empty() {
            String::new()
        } else {
            format!("  ({})", r.note)
        };
        println!(
            "{verdict} {:<40} {:>9.2}s{note}",
            r.check,
            r.runtime.as_secs_f64()
        );
    }
    let files = report.write(&lab.cfg.output_dir, cli.emit_plot_data)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    println!(
        "{}: {}/{} checks passed (config {}, build {})",
        report.experiment,
        report.rows.iter().filter(|r| r.pass).count(),
        report.rows.len(),
        report.config_hash,
        report.build_id
    );
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
