use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sqmean::harness::{
    compare_naive, emit_results, render_results, run_sweep, run_trials, verify, ExperimentConfig,
    Format, OracleModel, ResultRow,
};

#[derive(Parser)]
#[command(
    name = "sqmean",
    version,
    about = "Range-independent mean estimation with statistical queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and print a per-trial report.
    Estimate(Common),
    /// Run the sweep grid of a config and write all rows.
    Sweep(Common),
    /// Run naive-mean next to the configured estimator.
    Compare(Common),
    /// Run the configured estimator with VSTAT answered from one-bit samples.
    SimulateComm {
        #[command(flatten)]
        common: Common,
        /// Queries covered by the union bound (overrides the config).
        #[arg(long)]
        q_total: Option<u64>,
        /// Failure probability over all queries (overrides the config).
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run every acceptance suite; exits nonzero on any violation.
    Verify {
        /// Directory for the determinism check output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Write result rows here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: Format,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: sqmean::Error| e.to_string())
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::from_file(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(trials) = self.trials {
            c.trials = trials;
        }
        Ok(c)
    }

    fn write_rows(&self, rows: &[ResultRow]) -> Result<()> {
        match &self.out {
            Some(path) => emit_results(rows, self.format, path)
                .with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{}", render_results(rows, self.format)?);
                Ok(())
            }
        }
    }
}

fn estimate(common: &Common, config: &ExperimentConfig) -> Result<()> {
    if config.sweep.is_some() {
        bail!("config defines a sweep; use the sweep subcommand");
    }
    let records = run_trials(config)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{} with {} oracle, {} trial(s), seed {}",
        config.estimator.name(),
        config.oracle.label(),
        config.trials,
        config.seed
    )?;
    for r in &records {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(
            stdout,
            "trial {}: estimate [{}] truth [{}] error {:.3e} bound {:.3e} queries {} bits {} n {}",
            r.row.trial,
            fmt(&r.estimate),
            fmt(&r.truth),
            r.row.realized_error,
            r.row.theoretical_bound,
            r.row.queries,
            r.row.bits,
            r.row.n
        )?;
    }
    if let Some(path) = &common.out {
        let rows: Vec<_> = records.into_iter().map(|r| r.row).collect();
        emit_results(&rows, common.format, path)?;
    }
    Ok(())
}

fn compare(common: &Common, config: &ExperimentConfig) -> Result<()> {
    let cmp = compare_naive(config)?;
    common.write_rows(&cmp.rows)?;
    eprintln!(
        "policy {}: naive error {:.6e}, {} error {:.6e}, ratio {}",
        cmp.policy,
        cmp.naive_error,
        config.estimator.name(),
        cmp.estimator_error,
        cmp.ratio
    );
    Ok(())
}

fn simulate_comm(
    common: &Common,
    mut config: ExperimentConfig,
    q_total: Option<u64>,
    delta: Option<f64>,
) -> Result<()> {
    let (q0, d0) = match config.oracle.model {
        OracleModel::CommSim { q_total, delta } => (q_total, delta),
        _ => (64, 0.1),
    };
    config.oracle.model = OracleModel::CommSim {
        q_total: q_total.unwrap_or(q0),
        delta: delta.unwrap_or(d0),
    };
    let rows = if config.sweep.is_some() {
        run_sweep(&config)?
    } else {
        run_trials(&config)?.into_iter().map(|r| r.row).collect()
    };
    common.write_rows(&rows)?;
    let bits: u64 = rows.iter().map(|r| r.bits).sum();
    eprintln!("bits_consumed {bits} over {} row(s)", rows.len());
    Ok(())
}

fn run_verify(out: Option<&Path>) -> Result<()> {
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => std::env::temp_dir().join(format!("sqmean-verify-{}", std::process::id())),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let outcomes = verify::run_all(&dir);
    for o in &outcomes {
        println!("{o}");
    }
    if out.is_none() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        bail!("{failed} of {} criteria failed", outcomes.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Estimate(c) => estimate(c, &c.load()?),
        Command::Sweep(c) => {
            let rows = run_sweep(&c.load()?)?;
            c.write_rows(&rows)
        }
        Command::Compare(c) => compare(c, &c.load()?),
        Command::SimulateComm {
            common,
            q_total,
            delta,
        } => simulate_comm(common, common.load()?, *q_total, *delta),
        Command::Verify { out } => run_verify(out.as_deref()),
    }
}
