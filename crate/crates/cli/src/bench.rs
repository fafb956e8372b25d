//! The (algorithm × size × seed) benchmark grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use paws_core::compress::{Partition, PartitionParams};
use paws_core::dataset::{sample_size_series, Dataset};
use paws_core::metrics::{Evaluator, MetricReport, Scores};
use paws_core::perception::PerceptionWeights;
use paws_core::raster::{render, RenderConfig};
use paws_core::saliency::CenterSurround;
use paws_core::samplers::SamplerConfig;

use crate::commands::{
    approx_to, build_for, default_sample_name, evaluator, load_weights, sample_to, write_json, write_partition,
    write_report, Ctx,
};

/// Sample sizes: `geometric:BASE,FACTOR,[E1,E2,...]` or a plain list `250,375`.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let sizes = if let Some(rest) = spec.strip_prefix("geometric:") {
        let open = rest.find('[').ok_or_else(|| anyhow!("geometric sizes need an exponent list in [...]"))?;
        let close = rest.rfind(']').ok_or_else(|| anyhow!("unclosed exponent list in {spec:?}"))?;
        let head: Vec<&str> = rest[..open].split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if head.len() != 2 {
            bail!("geometric sizes are BASE,FACTOR,[EXPONENTS]; got {spec:?}");
        }
        let base: usize = head[0].parse().map_err(|_| anyhow!("bad base {:?}", head[0]))?;
        let factor: f64 = head[1].parse().map_err(|_| anyhow!("bad factor {:?}", head[1]))?;
        if base < 1 || !(factor > 0.0) {
            bail!("geometric sizes need base >= 1 and factor > 0");
        }
        let exps: Vec<i32> = rest[open + 1..close]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| anyhow!("bad exponent {s:?}")))
            .collect::<Result<_>>()?;
        sample_size_series(base, factor, &exps)
    } else {
        spec.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| anyhow!("bad sample size {s:?}")))
            .collect::<Result<_>>()?
    };
    if sizes.is_empty() {
        bail!("no sample sizes in {spec:?}");
    }
    Ok(sizes)
}

pub fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| anyhow!("bad {what} {x:?}")))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        bail!("empty {what} list");
    }
    Ok(v)
}

pub struct BenchSpec {
    pub algos: Vec<String>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub resume: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub algo: String,
    pub k: usize,
    pub seed: u64,
}

impl Cell {
    fn stem(&self) -> String {
        default_sample_name(&self.algo, self.k, self.seed).trim_end_matches(".csv").to_string()
    }
}

pub struct CellResult {
    pub report: MetricReport,
    pub elapsed: f64,
    pub resumed: bool,
}

pub struct BenchOutcome {
    pub cells: Vec<(Cell, Result<CellResult>)>,
    pub summary: PathBuf,
}

impl BenchOutcome {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|(_, r)| r.is_ok())
    }
}

struct Shared<'a> {
    ctx: &'a Ctx,
    dataset: Dataset,
    weights: std::result::Result<PerceptionWeights, String>,
    partitions: BTreeMap<u64, std::result::Result<(Partition, PathBuf), String>>,
    eval: Evaluator<'a>,
    render_cfg: RenderConfig,
    out: PathBuf,
}

fn load_resumed(sample_side: &Path, report: &Path) -> Option<CellResult> {
    let side: Value = serde_json::from_str(&fs::read_to_string(sample_side).ok()?).ok()?;
    let report: MetricReport = serde_json::from_str(&fs::read_to_string(report).ok()?).ok()?;
    Some(CellResult { report, elapsed: side["elapsed_seconds"].as_f64()?, resumed: true })
}

fn run_cell(sh: &Shared, cell: &Cell, resume: bool) -> Result<CellResult> {
    let stem = cell.stem();
    let sample_path = sh.out.join("samples").join(format!("{stem}.csv"));
    let report_path = sh.out.join("reports").join(format!("{stem}.json"));
    let png_path = sh.out.join("renders").join(format!("{stem}.png"));
    if resume && sample_path.exists() && png_path.exists() {
        if let Some(r) = load_resumed(&sample_path.with_extension("json"), &report_path) {
            return Ok(r);
        }
    }
    let sample = if cell.algo == "approx" {
        let (part, src) = sh.partitions[&cell.seed].as_ref().map_err(|e| anyhow!("{e}"))?;
        approx_to(sh.ctx, part, src, cell.k, sh.ctx.cfg.approx_c, cell.seed, &sample_path)?
    } else {
        let needs = sh.ctx.cfg.sampler(&cell.algo)?.needs_weights();
        let w = if needs { Some(sh.weights.as_ref().map_err(|e| anyhow!("{e}"))?) } else { None };
        sample_to(sh.ctx, &sh.dataset, w, &cell.algo, cell.k, cell.seed, &sample_path)?
    };
    let report = sh.eval.evaluate(&sample.points)?;
    write_report(sh.ctx, &report, &sample_path, &report_path)?;
    render(&sample.points, &sh.render_cfg).write_png(&png_path)?;
    Ok(CellResult { report, elapsed: sample.elapsed, resumed: false })
}

pub fn summary_csv(cells: &[(Cell, Result<CellResult>)]) -> String {
    let mut s = String::from("algo,k,seed,metric,mean,ci95,elapsed\n");
    for (c, r) in cells {
        if let Ok(r) = r {
            for m in Scores::NAMES {
                let _ = writeln!(
                    s,
                    "{},{},{},{m},{},{},{}",
                    c.algo,
                    c.k,
                    c.seed,
                    r.report.means.get(m).unwrap(),
                    r.report.ci95.get(m).unwrap(),
                    r.elapsed
                );
            }
        }
    }
    s
}

pub fn run_bench(ctx: &Ctx, spec: &BenchSpec) -> Result<BenchOutcome> {
    for a in &spec.algos {
        if a != "approx" {
            SamplerConfig::by_name(a)?;
        }
    }
    if spec.sizes.is_empty() || spec.seeds.is_empty() {
        bail!("bench needs at least one size and one seed");
    }
    let out = ctx.path(&spec.out);
    for sub in ["samples", "reports", "renders"] {
        fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.join(sub).display()))?;
    }
    let dataset = ctx.load_dataset()?;
    let needs_weights = spec.algos.iter().any(|a| a == "paws" || a == "approx");
    let weights = if needs_weights {
        load_weights(ctx, &dataset).map_err(|e| e.to_string())
    } else {
        Err("not loaded".to_string())
    };

    let mut partitions = BTreeMap::new();
    if spec.algos.iter().any(|a| a == "approx") {
        let preset = PartitionParams::preset(&ctx.cfg.compress_preset, 0)?;
        for &seed in &spec.seeds {
            let path = out.join("partitions").join(format!("{}_s{seed}.csv", ctx.cfg.compress_preset));
            let built = match &weights {
                Err(e) => Err(e.clone()),
                Ok(_) if spec.resume && path.exists() => {
                    Partition::read(&path).map(|p| (p, path.clone())).map_err(|e| e.to_string())
                }
                Ok(w) => {
                    let started = std::time::Instant::now();
                    build_for(ctx, &dataset, w, preset.lambda, preset.sigma, seed)
                        .and_then(|p| {
                            write_partition(ctx, &p, &path, started.elapsed().as_secs_f64())?;
                            Ok((p, path.clone()))
                        })
                        .map_err(|e| e.to_string())
                }
            };
            partitions.insert(seed, built);
        }
    }

    let render_cfg = RenderConfig::new(ctx.cfg.render_ps, ctx.cfg.render_op, ctx.cfg.width, ctx.cfg.height)?;
    let dataset_png = out.join("renders").join("dataset.png");
    if !(spec.resume && dataset_png.exists()) {
        render(dataset.points(), &render_cfg).write_png(&dataset_png)?;
    }

    let model = CenterSurround::default();
    ctx.log("rendering reference saliency maps");
    let eval = evaluator(ctx, &dataset, &model)?;
    let sh = Shared { ctx, dataset, weights, partitions, eval, render_cfg, out: out.clone() };

    let mut cells = Vec::new();
    for a in &spec.algos {
        for &k in &spec.sizes {
            for &seed in &spec.seeds {
                cells.push(Cell { algo: a.clone(), k, seed });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.jobs.max(1)).build()?;
    let results: Vec<(Cell, Result<CellResult>)> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|c| {
                let r = run_cell(&sh, &c, spec.resume);
                match &r {
                    Ok(res) if res.resumed => ctx.log(format!("{} (resumed)", c.stem())),
                    Ok(res) => ctx.log(format!("{} ssim {:.4}", c.stem(), res.report.means.ssim)),
                    Err(e) => eprintln!("cell {} failed: {e:#}", c.stem()),
                }
                (c, r)
            })
            .collect()
    });

    let summary = out.join("summary.csv");
    fs::write(&summary, summary_csv(&results)).with_context(|| format!("writing {}", summary.display()))?;
    let status: Vec<Value> = results
        .iter()
        .map(|(c, r)| {
            json!({
                "algo": c.algo, "k": c.k, "seed": c.seed,
                "status": if r.is_ok() { "ok".to_string() } else { "failed".to_string() },
                "error": r.as_ref().err().map(|e| format!("{e:#}")),
            })
        })
        .collect();
    write_json(
        &out.join("summary.json"),
        &json!({
            "dataset": ctx.rel(&ctx.dataset_path()),
            "algos": spec.algos, "sizes": spec.sizes, "seeds": spec.seeds,
            "config": ctx.cfg, "cells": status,
        }),
    )?;
    Ok(BenchOutcome { cells: results, summary })
}
