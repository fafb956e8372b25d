//! Flat `key = value` configuration with command-line overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use paws_core::compress::PartitionParams;
use paws_core::perception::{DensityMethod, GammaParams, WeightParams};
use paws_core::raster::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use paws_core::saliency::StimulusGrid;
use paws_core::samplers::{BlueNoiseParams, SamplerConfig, VasParams};

/// Every tunable the pipeline reads. Serialized into artifact sidecars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub width: usize,
    pub height: usize,
    pub point_sizes: Vec<f64>,
    pub opacities: Vec<f64>,
    pub kde: String,
    pub kde_exact_threshold: usize,
    pub kde_grid_resolution: usize,
    pub gamma_a: f64,
    pub gamma_v0: f64,
    pub dbs_k: usize,
    pub bluenoise_r0: Option<f64>,
    pub bluenoise_max_fail: usize,
    pub bluenoise_shrink: f64,
    pub vas_epsilon: f64,
    pub vas_max_iters: usize,
    pub approx_c: usize,
    pub compress_preset: String,
    pub eval_points: usize,
    pub min_leaf: usize,
    pub max_depth: u32,
    pub render_ps: f64,
    pub render_op: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let grid = StimulusGrid::default();
        Config {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            point_sizes: grid.point_sizes,
            opacities: grid.opacities,
            kde: "auto".into(),
            kde_exact_threshold: 100_000,
            kde_grid_resolution: 512,
            gamma_a: 50.0,
            gamma_v0: 0.05,
            dbs_k: 50,
            bluenoise_r0: None,
            bluenoise_max_fail: 1000,
            bluenoise_shrink: 0.7,
            vas_epsilon: 2f64.sqrt() / 100.0,
            vas_max_iters: 10,
            approx_c: 4,
            compress_preset: "high".into(),
            eval_points: 64,
            min_leaf: 4,
            max_depth: 12,
            render_ps: 4.0,
            render_op: 1.0,
            seed: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("config key {key}: cannot parse {v:?}"))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s.trim())).collect()
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "width" => self.width = num(key, v)?,
            "height" => self.height = num(key, v)?,
            "point_sizes" => self.point_sizes = list(key, v)?,
            "opacities" => self.opacities = list(key, v)?,
            "kde" => self.kde = v.to_string(),
            "kde_exact_threshold" => self.kde_exact_threshold = num(key, v)?,
            "kde_grid_resolution" => self.kde_grid_resolution = num(key, v)?,
            "gamma_a" => self.gamma_a = num(key, v)?,
            "gamma_v0" => self.gamma_v0 = num(key, v)?,
            "dbs_k" => self.dbs_k = num(key, v)?,
            "bluenoise_r0" => self.bluenoise_r0 = if v == "auto" { None } else { Some(num(key, v)?) },
            "bluenoise_max_fail" => self.bluenoise_max_fail = num(key, v)?,
            "bluenoise_shrink" => self.bluenoise_shrink = num(key, v)?,
            "vas_epsilon" => self.vas_epsilon = num(key, v)?,
            "vas_max_iters" => self.vas_max_iters = num(key, v)?,
            "approx_c" => self.approx_c = num(key, v)?,
            "compress_preset" => self.compress_preset = v.to_string(),
            "eval_points" => self.eval_points = num(key, v)?,
            "min_leaf" => self.min_leaf = num(key, v)?,
            "max_depth" => self.max_depth = num(key, v)?,
            "render_ps" => self.render_ps = num(key, v)?,
            "render_op" => self.render_op = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
            self.set(k, v).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
    }

    /// Applies `KEY=VALUE` overrides from the command line.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {pair:?}"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().configs(self.width, self.height)?;
        self.density()?;
        if self.dbs_k < 1 {
            bail!("dbs_k must be at least 1");
        }
        if !(self.bluenoise_shrink > 0.0 && self.bluenoise_shrink < 1.0) {
            bail!("bluenoise_shrink must be in (0,1)");
        }
        if matches!(self.bluenoise_r0, Some(r) if !(r >= 0.0)) {
            bail!("bluenoise_r0 must be non-negative");
        }
        if !(self.vas_epsilon > 0.0) || self.vas_max_iters < 1 {
            bail!("vas_epsilon must be positive and vas_max_iters at least 1");
        }
        if self.approx_c < 1 || self.eval_points < 1 {
            bail!("approx_c and eval_points must be at least 1");
        }
        PartitionParams::preset(&self.compress_preset, 0)?;
        paws_core::raster::RenderConfig::new(self.render_ps, self.render_op, self.width, self.height)?;
        Ok(())
    }

    pub fn grid(&self) -> StimulusGrid {
        StimulusGrid { point_sizes: self.point_sizes.clone(), opacities: self.opacities.clone() }
    }

    pub fn density(&self) -> Result<DensityMethod> {
        Ok(match self.kde.as_str() {
            "auto" => DensityMethod::Auto {
                exact_threshold: self.kde_exact_threshold,
                grid_resolution: self.kde_grid_resolution,
            },
            "exact" => DensityMethod::Exact,
            "grid" => DensityMethod::Grid { resolution: self.kde_grid_resolution },
            other => bail!("kde must be auto, exact or grid; got {other:?}"),
        })
    }

    pub fn weight_params(&self) -> Result<WeightParams> {
        Ok(WeightParams { gamma: GammaParams { a: self.gamma_a, v0: self.gamma_v0 }, density: self.density()? })
    }

    pub fn sampler(&self, name: &str) -> Result<SamplerConfig> {
        Ok(match SamplerConfig::by_name(name)? {
            SamplerConfig::Dbs { .. } => SamplerConfig::Dbs { neighbors: self.dbs_k },
            SamplerConfig::Bluenoise(_) => SamplerConfig::Bluenoise(BlueNoiseParams {
                r0: self.bluenoise_r0,
                max_fail: self.bluenoise_max_fail,
                shrink: self.bluenoise_shrink,
            }),
            SamplerConfig::Vas(_) => {
                SamplerConfig::Vas(VasParams { epsilon: self.vas_epsilon, max_iters: self.vas_max_iters })
            }
            other => other,
        })
    }

    pub fn partition_params(&self, lambda: f64, sigma: f64, seed: u64) -> PartitionParams {
        PartitionParams {
            lambda,
            sigma,
            seed,
            eval_points: self.eval_points,
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }
}
