//! Samplers: PAwS and the baselines, behind one configuration enum.

mod blue_noise;
mod dbs;
pub(crate) mod greedy;
mod vas;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dataset::{Dataset, Point};
use crate::error::{Error, Result};
use crate::perception::PerceptionWeights;
use crate::rng;

pub use blue_noise::{blue_noise, BlueNoiseParams};
pub use dbs::{dbs, knn_distances};
pub use vas::{vas_es, vas_loss, VasParams, VasRun};

/// An ordered selection. Index samples reference a dataset; synthesized
/// samples (ApproPAwS) carry only points.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Option<Vec<usize>>,
    pub points: Vec<Point>,
    pub algorithm: String,
    pub seed: u64,
    pub params: Map<String, Value>,
    pub elapsed: f64,
}

impl Sample {
    pub fn from_indices(dataset: &Dataset, indices: Vec<usize>, algorithm: &str, seed: u64) -> Self {
        let points = indices.iter().map(|&i| dataset.points()[i]).collect();
        Sample { indices: Some(indices), points, algorithm: algorithm.into(), seed, params: Map::new(), elapsed: 0.0 }
    }

    pub fn synthesized(points: Vec<Point>, algorithm: &str, seed: u64) -> Self {
        Sample { indices: None, points, algorithm: algorithm.into(), seed, params: Map::new(), elapsed: 0.0 }
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// `rank,index,x,y` rows; `index` is empty for synthesized points.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            writeln!(w, "rank,index,x,y")?;
            for (rank, p) in self.points.iter().enumerate() {
                match &self.indices {
                    Some(ix) => writeln!(w, "{rank},{},{},{}", ix[rank], p.x, p.y)?,
                    None => writeln!(w, "{rank},,{},{}", p.x, p.y)?,
                }
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))
    }

    pub fn sidecar(&self) -> Value {
        json!({
            "algorithm": self.algorithm,
            "k": self.k(),
            "seed": self.seed,
            "params": self.params,
            "synthesized": self.indices.is_none(),
            "elapsed_seconds": self.elapsed,
        })
    }

    /// Reads a sample CSV. When `dataset` is given, index rows resolve to the
    /// dataset's points instead of the printed coordinates.
    pub fn read_csv(path: &Path, dataset: Option<&Dataset>) -> Result<Sample> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "rank,index,x,y" => {}
            _ => return Err(Error::Parse { line: 1, message: "expected header rank,index,x,y".into() }),
        }
        let mut indices = Vec::new();
        let mut points = Vec::new();
        let mut synthesized = false;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse { line: line_no, message: m.to_string() };
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let x: f64 = cells[2].parse().map_err(|_| bad("x is not a number"))?;
            let y: f64 = cells[3].parse().map_err(|_| bad("y is not a number"))?;
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(bad("point outside the unit square"));
            }
            let mut p = Point::new(x, y);
            if cells[1].is_empty() {
                synthesized = true;
            } else {
                let ix: usize = cells[1].parse().map_err(|_| bad("index is not a non-negative integer"))?;
                if let Some(d) = dataset {
                    p = *d.points().get(ix).ok_or_else(|| bad("index beyond dataset size"))?;
                }
                indices.push(ix);
            }
            points.push(p);
        }
        if points.is_empty() {
            return Err(Error::Empty(format!("{} has no sample rows", path.display())));
        }
        let side = path.with_extension("json");
        let meta: Value = std::fs::read_to_string(&side)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or(Value::Null);
        Ok(Sample {
            indices: (!synthesized).then_some(indices),
            points,
            algorithm: meta["algorithm"].as_str().unwrap_or("unknown").to_string(),
            seed: meta["seed"].as_u64().unwrap_or(0),
            params: meta["params"].as_object().cloned().unwrap_or_default(),
            elapsed: meta["elapsed_seconds"].as_f64().unwrap_or(0.0),
        })
    }
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::invalid(format!("sample size k={k} must be in [1, {n}]")));
    }
    Ok(())
}

/// PAwS: weighted farthest-first traversal from a seeded random start.
pub fn paws(dataset: &Dataset, weights: &PerceptionWeights, k: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    let start = rng::seeded(seed).random_range(0..dataset.len());
    paws_from(dataset, weights, k, start, seed)
}

/// PAwS with an explicit first point.
pub fn paws_from(dataset: &Dataset, weights: &PerceptionWeights, k: usize, start: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    if weights.len() != dataset.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} points",
            weights.len(),
            dataset.len()
        )));
    }
    if start >= dataset.len() {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let order = greedy::farthest_first(dataset.points(), Some(&weights.weights), k, start);
    Ok(Sample::from_indices(dataset, order, "paws", seed))
}

/// Max-Min diversification via GMM farthest-first traversal.
pub fn maxmin_gmm(dataset: &Dataset, k: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    let start = rng::seeded(seed).random_range(0..dataset.len());
    maxmin_from(dataset, k, start, seed)
}

pub fn maxmin_from(dataset: &Dataset, k: usize, start: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    if start >= dataset.len() {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let order = greedy::farthest_first(dataset.points(), None, k, start);
    Ok(Sample::from_indices(dataset, order, "maxmin", seed))
}

/// Uniform sampling without replacement.
pub fn random_sample(dataset: &Dataset, k: usize, seed: u64) -> Result<Sample> {
    check_k(k, dataset.len())?;
    let mut rng = rng::seeded(seed);
    let indices = rand::seq::index::sample(&mut rng, dataset.len(), k).into_vec();
    Ok(Sample::from_indices(dataset, indices, "random", seed))
}

/// Which sampler to run and with what parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "algorithm")]
pub enum SamplerConfig {
    Paws,
    Random,
    Maxmin,
    Dbs { neighbors: usize },
    Bluenoise(BlueNoiseParams),
    Vas(VasParams),
}

impl SamplerConfig {
    pub const NAMES: [&'static str; 6] = ["paws", "random", "maxmin", "dbs", "bluenoise", "vas"];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerConfig::Paws => "paws",
            SamplerConfig::Random => "random",
            SamplerConfig::Maxmin => "maxmin",
            SamplerConfig::Dbs { .. } => "dbs",
            SamplerConfig::Bluenoise(_) => "bluenoise",
            SamplerConfig::Vas(_) => "vas",
        }
    }

    /// Default parameters for a sampler name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "paws" => SamplerConfig::Paws,
            "random" => SamplerConfig::Random,
            "maxmin" => SamplerConfig::Maxmin,
            "dbs" => SamplerConfig::Dbs { neighbors: 50 },
            "bluenoise" => SamplerConfig::Bluenoise(BlueNoiseParams::default()),
            "vas" => SamplerConfig::Vas(VasParams::default()),
            other => {
                return Err(Error::invalid(format!(
                    "unknown algorithm {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn needs_weights(&self) -> bool {
        matches!(self, SamplerConfig::Paws)
    }
}

/// Runs a sampler, recording its parameters and wall time in the sample.
pub fn run_sampler(
    cfg: &SamplerConfig,
    dataset: &Dataset,
    weights: Option<&PerceptionWeights>,
    k: usize,
    seed: u64,
) -> Result<Sample> {
    let started = Instant::now();
    let mut sample = match cfg {
        SamplerConfig::Paws => {
            let w = weights.ok_or_else(|| Error::invalid("paws requires perception weights"))?;
            paws(dataset, w, k, seed)?
        }
        SamplerConfig::Random => random_sample(dataset, k, seed)?,
        SamplerConfig::Maxmin => maxmin_gmm(dataset, k, seed)?,
        SamplerConfig::Dbs { neighbors } => dbs(dataset, k, *neighbors, seed)?,
        SamplerConfig::Bluenoise(p) => blue_noise(dataset, k, p, seed)?,
        SamplerConfig::Vas(p) => vas_es(dataset, k, p, seed)?.sample,
    };
    sample.elapsed = started.elapsed().as_secs_f64();
    if let Value::Object(mut m) = serde_json::to_value(cfg)? {
        m.remove("algorithm");
        for (key, v) in m {
            sample.params.entry(key).or_insert(v);
        }
    }
    Ok(sample)
}
