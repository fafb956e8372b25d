//! `paws` command-line pipeline: ingest → saliency → weights → sample or
//! compress → metrics → bench, over a workspace directory.

pub mod bench;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use paws_core::dataset::ColumnSelector;

use crate::bench::{parse_list, parse_sizes, run_bench, BenchSpec};
use crate::commands::*;
use crate::config::Config;

#[derive(Debug, Parser)]
#[command(name = "paws", version, about = "Perception-aware sampling for scatterplots")]
pub struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    /// Directory holding dataset.csv, saliency.salf, weights.csv, samples/, partitions/, reports/.
    #[arg(long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load two columns of a CSV file as the workspace dataset.
    Ingest {
        input: PathBuf,
        /// Column index or header name for x.
        #[arg(short, long, default_value = "0")]
        x: ColumnSelector,
        #[arg(short, long, default_value = "1")]
        y: ColumnSelector,
    },
    /// Generate a hidden-correlation dataset.
    Gen {
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0.975)]
        corr_fraction: f64,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
    },
    /// Render the dataset, or a sample, to a PNG.
    Render {
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long)]
        ps: Option<f64>,
        #[arg(long)]
        op: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Aggregate saliency over the stimulus grid.
    Saliency {
        #[arg(long, default_value = "builtin", value_parser = ["builtin", "external"])]
        model: String,
        /// Precomputed maps (SALF or grayscale PNG) for `--model external`.
        #[arg(long = "map")]
        maps: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Per-point perception weights from the stored saliency map.
    Weights {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Draw a sample with one algorithm.
    Sample {
        #[arg(long)]
        algo: String,
        #[arg(short)]
        k: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Build a perception-aware quad-tree partition.
    Compress {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_parser = ["low", "medium", "high"])]
        preset: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a sample from a partition without reading the dataset.
    Approx {
        #[arg(long)]
        partition: PathBuf,
        #[arg(short)]
        k: usize,
        /// Representatives drawn per box.
        #[arg(short = 'C')]
        c: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score a sample against the dataset.
    Metrics {
        #[arg(long)]
        sample: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every (algorithm, size, seed) cell and write a summary.
    Bench {
        #[arg(long, default_value = "paws,random,maxmin,dbs,bluenoise,vas")]
        algos: String,
        #[arg(long, default_value = "geometric:250,1.5,[0,1,3,5,7,9]")]
        sizes: String,
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        /// Skip cells whose outputs already exist.
        #[arg(long)]
        resume: bool,
    },
}

pub fn context(cli: &Cli) -> Result<Ctx> {
    let mut cfg = Config::default();
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_overrides(&cli.set)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let mut ctx = Ctx::new(cli.workspace.clone(), cfg);
    ctx.verbose = cli.verbose;
    Ok(ctx)
}

/// Runs a parsed command line; the value is the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    if let Some(j) = cli.jobs {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let ctx = context(&cli)?;
    let seed = ctx.cfg.seed;
    let written = match &cli.command {
        Command::Ingest { input, x, y } => cmd_ingest(&ctx, input, x, y)?,
        Command::Gen { n, corr_fraction, rho } => cmd_gen(&ctx, *n, *corr_fraction, *rho, seed)?,
        Command::Render { sample, ps, op, out } => cmd_render(
            &ctx,
            sample.as_deref(),
            ps.unwrap_or(ctx.cfg.render_ps),
            op.unwrap_or(ctx.cfg.render_op),
            out,
        )?,
        Command::Saliency { model, maps, out } => cmd_saliency(&ctx, model, maps, out.as_deref())?,
        Command::Weights { out } => cmd_weights(&ctx, out.as_deref())?,
        Command::Sample { algo, k, out } => cmd_sample(&ctx, algo, *k, seed, out.as_deref())?,
        Command::Compress { lambda, sigma, preset, out } => {
            cmd_compress(&ctx, *lambda, *sigma, preset.as_deref(), seed, out.as_deref())?
        }
        Command::Approx { partition, k, c, out } => cmd_approx(&ctx, partition, *k, *c, seed, out.as_deref())?,
        Command::Metrics { sample, out } => cmd_metrics(&ctx, sample, out.as_deref())?,
        Command::Bench { algos, sizes, seeds, out, resume } => {
            let spec = BenchSpec {
                algos: parse_list("algorithm", algos)?,
                sizes: parse_sizes(sizes)?,
                seeds: parse_list("seed", seeds)?,
                out: out.clone(),
                resume: *resume,
                jobs: cli.jobs.unwrap_or_else(rayon::current_num_threads),
            };
            let outcome = run_bench(&ctx, &spec)?;
            let failed = outcome.cells.iter().filter(|(_, r)| r.is_err()).count();
            println!("{}", outcome.summary.display());
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", outcome.cells.len());
                return Ok(1);
            }
            return Ok(0);
        }
    };
    println!("{}", written.display());
    Ok(0)
}
