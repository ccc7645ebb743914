//! Command-line driver for replicated bandit experiments.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use gambitts_core::agents::AgentSnapshot;
use gambitts_core::harness::{
    run_experiment_with, snapshot_probabilities, sweep, sweep_values, write_experiment, write_probs,
    ExperimentOutput, RunOptions, SweepAxis,
};
use gambitts_core::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gambitts", version, about = "Generator-mediated bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every agent for every replication and write raw.csv and agg.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Save each run's policy state every N steps under <out>/snapshots.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run one experiment per value of a sweep axis, each into <out>/<axis>_<value>.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// K, d, sigma2, draws_per_cell or misspec_weight; defaults to the
        /// config's sweep axis.
        #[arg(long)]
        axis: Option<SweepAxis>,
    },
    /// Estimate selection probabilities of saved policy states.
    Probs {
        #[arg(long)]
        config: PathBuf,
        /// Snapshot file written by `run --snapshot-every`.
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n_outer: usize,
        /// Output CSV path.
        #[arg(long, default_value = "probs.csv")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn summarize(output: &ExperimentOutput) {
    println!("sigma1 = {:.4}, sigma2 = {:.4}", output.sigma1, output.sigma2);
    for c in &output.curves {
        println!("  {:<20} final cumulative regret {:>10.3} ± {:.3} (n = {})", c.agent, c.final_mean(), c.final_ci(), c.n);
    }
}

fn write_snapshots(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    let dir = dir.join("snapshots");
    std::fs::create_dir_all(&dir)?;
    for run in output.runs.iter().filter(|r| !r.snapshots.is_empty()) {
        let path = dir.join(format!("{}_rep{}.jsonl", output.labels[run.agent], run.rep));
        let mut out = BufWriter::new(File::create(&path)?);
        for snap in &run.snapshots {
            snap.write_line(&mut out)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, snapshot_every } => {
            let cfg = load_config(&common.config, common.seed)?;
            if snapshot_every == Some(0) {
                bail!("--snapshot-every must be at least 1");
            }
            let options = RunOptions { snapshot_every };
            let output = thread_pool(common.threads)?.install(|| run_experiment_with(&cfg, &options))?;
            write_experiment(&common.out, &output)?;
            if snapshot_every.is_some() {
                write_snapshots(&common.out, &output)?;
            }
            summarize(&output);
            println!("wrote {}", common.out.display());
        }
        Command::Sweep { common, axis } => {
            let cfg = load_config(&common.config, common.seed)?;
            let Some(axis) = axis.or(cfg.sweep.as_ref().map(|s| s.axis)) else {
                bail!("no --axis given and the config has no sweep block");
            };
            let values = sweep_values(&cfg, axis);
            let results =
                thread_pool(common.threads)?.install(|| sweep(&cfg, axis, &values, &RunOptions::default()))?;
            for (value, output) in &results {
                let dir = common.out.join(format!("{axis}_{value}"));
                write_experiment(&dir, output)?;
                println!("{axis} = {value}");
                summarize(output);
            }
            println!("wrote {}", common.out.display());
        }
        Command::Probs { config, snapshot, n_outer, out, threads } => {
            let cfg = load_config(&config, None)?;
            let file = File::open(&snapshot).with_context(|| format!("opening {}", snapshot.display()))?;
            let snaps = AgentSnapshot::read_all(BufReader::new(file))?;
            if snaps.is_empty() {
                bail!("{} contains no snapshots", snapshot.display());
            }
            if n_outer == 0 {
                bail!("--n-outer must be at least 1");
            }
            let space = &cfg.environment.context_space;
            let rows = thread_pool(threads)?.install(|| snapshot_probabilities(space, &snaps, n_outer, cfg.seed))?;
            write_probs(BufWriter::new(File::create(&out)?), &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}
