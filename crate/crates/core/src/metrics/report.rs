//! Scoring a sample against its dataset across a grid of stimuli.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::Point;
use crate::error::{Error, Result};
use crate::raster::{render, RenderConfig};
use crate::saliency::{SaliencyMap, SaliencyModel, StimulusGrid};

use super::{cc, emd, jsd, sim, ssim};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ssim: f64,
    pub cc: f64,
    pub sim: f64,
    pub jsd: f64,
    pub emd: f64,
}

impl Scores {
    pub const NAMES: [&'static str; 5] = ["ssim", "cc", "sim", "jsd", "emd"];

    pub fn compute(a: &SaliencyMap, b: &SaliencyMap) -> Result<Scores> {
        Ok(Scores { ssim: ssim(a, b)?, cc: cc(a, b)?, sim: sim(a, b)?, jsd: jsd(a, b)?, emd: emd(a, b)? })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "ssim" => self.ssim,
            "cc" => self.cc,
            "sim" => self.sim,
            "jsd" => self.jsd,
            "emd" => self.emd,
            _ => return None,
        })
    }

    fn from_fn(mut f: impl FnMut(&str) -> f64) -> Scores {
        Scores { ssim: f("ssim"), cc: f("cc"), sim: f("sim"), jsd: f("jsd"), emd: f("emd") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigScores {
    pub ps: f64,
    pub op: f64,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: Vec<ConfigScores>,
    pub means: Scores,
    pub ci95: Scores,
}

impl MetricReport {
    pub fn from_configs(config: Vec<ConfigScores>) -> Result<MetricReport> {
        if config.is_empty() {
            return Err(Error::Empty("no configurations were scored".into()));
        }
        let column = |name: &str| -> Vec<f64> { config.iter().map(|c| c.scores.get(name).unwrap()).collect() };
        let means = Scores::from_fn(|m| {
            let v = column(m);
            v.iter().sum::<f64>() / v.len() as f64
        });
        let ci95 = Scores::from_fn(|m| ci95_half_width(&column(m)));
        Ok(MetricReport { config, means, ci95 })
    }
}

/// Half-width of the two-sided 95% interval for the mean, `t·s/√n` with the
/// Student t quantile on n−1 degrees of freedom. Zero for a single value.
pub fn ci95_half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    t * var.sqrt() / (n as f64).sqrt()
}

/// Holds the dataset's per-configuration saliency maps so that many samples
/// of the same dataset can be scored without recomputing them.
pub struct Evaluator<'a> {
    configs: Vec<RenderConfig>,
    reference: Vec<SaliencyMap>,
    model: &'a dyn SaliencyModel,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        dataset: &[Point],
        grid: &StimulusGrid,
        width_px: usize,
        height_px: usize,
        model: &'a dyn SaliencyModel,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("dataset has no points".into()));
        }
        let configs = grid.configs(width_px, height_px)?;
        let reference = configs.par_iter().map(|cfg| model.saliency(&render(dataset, cfg))).collect();
        Ok(Evaluator { configs, reference, model })
    }

    pub fn configs(&self) -> &[RenderConfig] {
        &self.configs
    }

    pub fn evaluate(&self, sample: &[Point]) -> Result<MetricReport> {
        if sample.is_empty() {
            return Err(Error::Empty("sample has no points".into()));
        }
        let per: Vec<ConfigScores> = self
            .configs
            .par_iter()
            .zip(&self.reference)
            .map(|(cfg, reference)| {
                let map = self.model.saliency(&render(sample, cfg));
                Ok(ConfigScores { ps: cfg.point_size_px, op: cfg.opacity, scores: Scores::compute(reference, &map)? })
            })
            .collect::<Result<_>>()?;
        MetricReport::from_configs(per)
    }
}

/// One-shot scoring of `sample` against `dataset`.
pub fn evaluate(
    dataset: &[Point],
    sample: &[Point],
    grid: &StimulusGrid,
    width_px: usize,
    height_px: usize,
    model: &dyn SaliencyModel,
) -> Result<MetricReport> {
    Evaluator::new(dataset, grid, width_px, height_px, model)?.evaluate(sample)
}
