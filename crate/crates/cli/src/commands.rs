//! One function per subcommand. Paths are resolved against the workspace.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use paws_core::compress::{appro_paws, build_partition, Partition, PartitionParams};
use paws_core::dataset::{gen_hidden_correlation, load_csv, ColumnSelector, Dataset};
use paws_core::metrics::{Evaluator, MetricReport};
use paws_core::perception::{perception_weights, PerceptionWeights};
use paws_core::raster::{render, RenderConfig};
use paws_core::saliency::{aggregate, aggregate_saliency_for, load_map, store_map, CenterSurround, SaliencyMap};
use paws_core::samplers::{run_sampler, Sample};

use crate::config::Config;

pub struct Ctx {
    pub root: PathBuf,
    pub cfg: Config,
    pub verbose: bool,
}

impl Ctx {
    pub fn new(root: impl Into<PathBuf>, cfg: Config) -> Self {
        Ctx { root: root.into(), cfg, verbose: false }
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// `p` relative to the workspace root when it lies inside it, for sidecars.
    pub fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).display().to_string()
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn saliency_path(&self) -> PathBuf {
        self.root.join("saliency.salf")
    }

    pub fn weights_path(&self) -> PathBuf {
        self.root.join("weights.csv")
    }

    pub fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let p = self.dataset_path();
        if !p.exists() {
            bail!("no dataset at {}; run `paws ingest` or `paws gen` first", p.display());
        }
        Ok(Dataset::read_normalized(&p)?)
    }

    fn canvas(&self) -> (usize, usize) {
        (self.cfg.width, self.cfg.height)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn sidecar_of(artifact: &Path) -> PathBuf {
    if artifact.extension().is_some_and(|e| e == "json") {
        artifact.with_extension("meta.json")
    } else {
        artifact.with_extension("json")
    }
}

fn store_dataset(ctx: &Ctx, d: &Dataset, extra: Value) -> Result<PathBuf> {
    let out = ctx.dataset_path();
    ensure_parent(&out)?;
    d.write_csv(&out, false)?;
    let mut side = json!({
        "source": d.source,
        "n": d.len(),
        "original_ranges": d.original_ranges,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut side, extra) {
        m.extend(e);
    }
    write_json(&sidecar_of(&out), &side)?;
    Ok(out)
}

pub fn cmd_ingest(ctx: &Ctx, input: &Path, x: &ColumnSelector, y: &ColumnSelector) -> Result<PathBuf> {
    let loaded = load_csv(&ctx.path(input), x, y)?;
    if loaded.skipped_rows > 0 {
        eprintln!("skipped {} rows with missing or non-numeric values", loaded.skipped_rows);
    }
    ctx.log(format!("ingested {} points", loaded.dataset.len()));
    store_dataset(
        ctx,
        &loaded.dataset,
        json!({ "x_col": x.to_string(), "y_col": y.to_string(), "skipped_rows": loaded.skipped_rows }),
    )
}

pub fn cmd_gen(ctx: &Ctx, n: usize, corr_fraction: f64, rho: f64, seed: u64) -> Result<PathBuf> {
    let d = gen_hidden_correlation(n, corr_fraction, rho, seed)?;
    store_dataset(ctx, &d, json!({ "generator": "hidden_correlation", "corr_fraction": corr_fraction, "rho": rho, "seed": seed }))
}

/// Renders the dataset, or a sample of it, to a grayscale PNG.
pub fn cmd_render(ctx: &Ctx, sample: Option<&Path>, ps: f64, op: f64, out: &Path) -> Result<PathBuf> {
    let rc = RenderConfig::new(ps, op, ctx.cfg.width, ctx.cfg.height)?;
    let (points, source) = match sample {
        Some(s) => {
            let d = ctx.load_dataset()?;
            let p = ctx.path(s);
            (Sample::read_csv(&p, Some(&d))?.points, p)
        }
        None => (ctx.load_dataset()?.points().to_vec(), ctx.dataset_path()),
    };
    let out = ctx.path(out);
    ensure_parent(&out)?;
    render(&points, &rc).write_png(&out)?;
    write_json(&sidecar_of(&out), &json!({ "source": ctx.rel(&source), "render": rc }))?;
    Ok(out)
}

pub fn cmd_saliency(ctx: &Ctx, model: &str, maps: &[PathBuf], out: Option<&Path>) -> Result<PathBuf> {
    let (w, h) = ctx.canvas();
    let agg = match model {
        "builtin" => {
            let d = ctx.load_dataset()?;
            ctx.log(format!("computing saliency over {} stimuli", ctx.cfg.grid().len()));
            aggregate_saliency_for(d.points(), &ctx.cfg.grid(), w, h, &CenterSurround::default())?
        }
        "external" => {
            if maps.is_empty() {
                bail!("--model external needs at least one --map");
            }
            let loaded: Vec<SaliencyMap> =
                maps.iter().map(|m| load_map(&ctx.path(m))).collect::<paws_core::Result<_>>()?;
            let agg = aggregate(&loaded)?;
            if (agg.width_px, agg.height_px) != (w, h) {
                bail!(
                    "external maps are {}x{} but the canvas is {w}x{h}; set width/height to match",
                    agg.width_px,
                    agg.height_px
                );
            }
            agg
        }
        other => bail!("unknown saliency model {other:?}; expected builtin or external"),
    };
    let out = out.map(|p| ctx.path(p)).unwrap_or_else(|| ctx.saliency_path());
    ensure_parent(&out)?;
    store_map(&agg, &out)?;
    write_json(
        &sidecar_of(&out),
        &json!({ "model": model, "maps": maps, "width": w, "height": h, "config": ctx.cfg }),
    )?;
    Ok(out)
}

fn compute_weights(ctx: &Ctx, d: &Dataset) -> Result<PerceptionWeights> {
    let sal = ctx.saliency_path();
    if !sal.exists() {
        bail!("no saliency map at {}; run `paws saliency` first", sal.display());
    }
    let map = load_map(&sal)?;
    Ok(perception_weights(d.points(), &map, (map.width_px, map.height_px), &ctx.cfg.weight_params()?)?)
}

pub fn cmd_weights(ctx: &Ctx, out: Option<&Path>) -> Result<PathBuf> {
    let d = ctx.load_dataset()?;
    let w = compute_weights(ctx, &d)?;
    let out = out.map(|p| ctx.path(p)).unwrap_or_else(|| ctx.weights_path());
    ensure_parent(&out)?;
    w.write_csv(d.points(), &out, &ctx.cfg.weight_params()?)?;
    ctx.log(format!("gamma = {}", w.gamma_used));
    Ok(out)
}

/// Stored weights when present, otherwise derived from the stored saliency map.
pub fn load_weights(ctx: &Ctx, d: &Dataset) -> Result<PerceptionWeights> {
    let p = ctx.weights_path();
    if p.exists() {
        let w = PerceptionWeights::read_csv(&p)?;
        if w.len() != d.len() {
            bail!("{} has {} rows but the dataset has {} points; rerun `paws weights`", p.display(), w.len(), d.len());
        }
        return Ok(w);
    }
    compute_weights(ctx, d).map_err(|e| anyhow!("paws needs perception weights: {e}"))
}

pub fn default_sample_name(algo: &str, k: usize, seed: u64) -> String {
    format!("{algo}_k{k}_s{seed}.csv")
}

fn write_sample(ctx: &Ctx, sample: &Sample, out: &Path, extra: Value) -> Result<()> {
    ensure_parent(out)?;
    sample.write_csv(out)?;
    let mut side = sample.sidecar();
    if let (Value::Object(m), Value::Object(e)) = (&mut side, extra) {
        m.extend(e);
    }
    side["config"] = serde_json::to_value(&ctx.cfg)?;
    write_json(&sidecar_of(out), &side)
}

/// Runs one sampler on a loaded dataset and writes the sample with its sidecar.
pub fn sample_to(
    ctx: &Ctx,
    d: &Dataset,
    weights: Option<&PerceptionWeights>,
    algo: &str,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<Sample> {
    let sc = ctx.cfg.sampler(algo)?;
    let sample = run_sampler(&sc, d, weights, k, seed)?;
    write_sample(ctx, &sample, out, json!({ "dataset": ctx.rel(&ctx.dataset_path()) }))?;
    Ok(sample)
}

pub fn cmd_sample(ctx: &Ctx, algo: &str, k: usize, seed: u64, out: Option<&Path>) -> Result<PathBuf> {
    let sc = ctx.cfg.sampler(algo)?;
    let d = ctx.load_dataset()?;
    let w = if sc.needs_weights() { Some(load_weights(ctx, &d)?) } else { None };
    let out = match out {
        Some(p) => ctx.path(p),
        None => ctx.dir("samples")?.join(default_sample_name(algo, k, seed)),
    };
    let s = sample_to(ctx, &d, w.as_ref(), algo, k, seed, &out)?;
    ctx.log(format!("{algo}: {} points in {:.3}s", s.k(), s.elapsed));
    Ok(out)
}

/// Threshold choice for `compress`: explicit values or a named preset.
pub fn resolve_thresholds(lambda: Option<f64>, sigma: Option<f64>, preset: Option<&str>) -> Result<(f64, f64, String)> {
    match (lambda, sigma, preset) {
        (Some(l), Some(s), None) => Ok((l, s, format!("l{l}_s{s}"))),
        (None, None, Some(p)) => {
            let pp = PartitionParams::preset(p, 0)?;
            Ok((pp.lambda, pp.sigma, p.to_string()))
        }
        (None, None, None) => bail!("give --lambda and --sigma, or --preset low|medium|high"),
        _ => bail!("--preset cannot be combined with --lambda/--sigma, and both thresholds are needed"),
    }
}

pub fn build_for(ctx: &Ctx, d: &Dataset, weights: &PerceptionWeights, lambda: f64, sigma: f64, seed: u64) -> Result<Partition> {
    Ok(build_partition(d.points(), &weights.weights, &ctx.cfg.partition_params(lambda, sigma, seed))?)
}

pub fn write_partition(ctx: &Ctx, p: &Partition, out: &Path, elapsed: f64) -> Result<()> {
    ensure_parent(out)?;
    p.write(out)?;
    let side_path = sidecar_of(out);
    let mut side: Value = serde_json::from_str(&fs::read_to_string(&side_path)?)?;
    side["dataset"] = json!(ctx.rel(&ctx.dataset_path()));
    side["build_elapsed_seconds"] = json!(elapsed);
    side["config"] = serde_json::to_value(&ctx.cfg)?;
    write_json(&side_path, &side)
}

pub fn cmd_compress(
    ctx: &Ctx,
    lambda: Option<f64>,
    sigma: Option<f64>,
    preset: Option<&str>,
    seed: u64,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let (l, s, name) = resolve_thresholds(lambda, sigma, preset)?;
    let d = ctx.load_dataset()?;
    let w = load_weights(ctx, &d)?;
    let started = std::time::Instant::now();
    let p = build_for(ctx, &d, &w, l, s, seed)?;
    let elapsed = started.elapsed().as_secs_f64();
    let out = match out {
        Some(o) => ctx.path(o),
        None => ctx.dir("partitions")?.join(format!("{name}_s{seed}.csv")),
    };
    write_partition(ctx, &p, &out, elapsed)?;
    ctx.log(format!("{} boxes in {elapsed:.3}s", p.boxes.len()));
    Ok(out)
}

pub fn approx_to(ctx: &Ctx, partition: &Partition, source: &Path, k: usize, c: usize, seed: u64, out: &Path) -> Result<Sample> {
    let started = std::time::Instant::now();
    let mut s = appro_paws(partition, k, c, seed)?;
    s.elapsed = started.elapsed().as_secs_f64();
    write_sample(ctx, &s, out, json!({ "partition": ctx.rel(source) }))?;
    Ok(s)
}

pub fn cmd_approx(ctx: &Ctx, partition: &Path, k: usize, c: Option<usize>, seed: u64, out: Option<&Path>) -> Result<PathBuf> {
    let pp = ctx.path(partition);
    let p = Partition::read(&pp).with_context(|| format!("loading partition {}", pp.display()))?;
    let c = c.unwrap_or(ctx.cfg.approx_c);
    let out = match out {
        Some(o) => ctx.path(o),
        None => ctx.dir("samples")?.join(default_sample_name("approx", k, seed)),
    };
    approx_to(ctx, &p, &pp, k, c, seed, &out)?;
    Ok(out)
}

pub fn evaluator<'a>(ctx: &Ctx, d: &Dataset, model: &'a CenterSurround) -> Result<Evaluator<'a>> {
    Ok(Evaluator::new(d.points(), &ctx.cfg.grid(), ctx.cfg.width, ctx.cfg.height, model)?)
}

pub fn write_report(ctx: &Ctx, report: &MetricReport, sample: &Path, out: &Path) -> Result<()> {
    write_json(out, &serde_json::to_value(report)?)?;
    write_json(
        &sidecar_of(out),
        &json!({
            "sample": ctx.rel(sample),
            "dataset": ctx.rel(&ctx.dataset_path()),
            "model": "builtin",
            "config": ctx.cfg,
        }),
    )
}

pub fn cmd_metrics(ctx: &Ctx, sample: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let d = ctx.load_dataset()?;
    let sp = ctx.path(sample);
    let s = Sample::read_csv(&sp, Some(&d)).with_context(|| format!("reading sample {}", sp.display()))?;
    let model = CenterSurround::default();
    let report = evaluator(ctx, &d, &model)?.evaluate(&s.points)?;
    let out = match out {
        Some(o) => ctx.path(o),
        None => {
            let stem = sp.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
            ctx.dir("reports")?.join(format!("{stem}.json"))
        }
    };
    write_report(ctx, &report, &sp, &out)?;
    if ctx.verbose {
        let m = &report.means;
        eprintln!("ssim {:.4} cc {:.4} sim {:.4} jsd {:.4} emd {:.4}", m.ssim, m.cc, m.sim, m.jsd, m.emd);
    }
    Ok(out)
}
