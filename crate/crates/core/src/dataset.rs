//! Two-dimensional datasets normalized to the unit square.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    #[inline]
    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Raw extent of each axis before min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Ranges {
    pub const UNIT: Ranges = Ranges { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };

    fn of(raw: &[Point]) -> Ranges {
        raw.iter().fold(
            Ranges {
                xmin: f64::INFINITY,
                xmax: f64::NEG_INFINITY,
                ymin: f64::INFINITY,
                ymax: f64::NEG_INFINITY,
            },
            |r, p| Ranges {
                xmin: r.xmin.min(p.x),
                xmax: r.xmax.max(p.x),
                ymin: r.ymin.min(p.y),
                ymax: r.ymax.max(p.y),
            },
        )
    }
}

fn normalize_axis(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

fn denormalize_axis(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + v * (hi - lo)
    } else {
        lo
    }
}

/// An ordered list of points in `[0,1]²` plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Point>,
    pub source: String,
    pub original_ranges: Ranges,
}

impl Dataset {
    /// Wraps points that are already normalized.
    pub fn new(points: Vec<Point>, source: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("dataset has no points".into()));
        }
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
        {
            return Err(Error::ValueOutOfRange(format!(
                "point {i} ({}, {}) lies outside the unit square",
                p.x, p.y
            )));
        }
        Ok(Dataset { points, source: source.into(), original_ranges: Ranges::UNIT })
    }

    /// Min-max normalizes raw coordinates per axis. Degenerate axes map to 0.5.
    pub fn from_raw(raw: &[Point], source: impl Into<String>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("dataset has no points".into()));
        }
        let r = Ranges::of(raw);
        let points = raw
            .iter()
            .map(|p| Point::new(normalize_axis(p.x, r.xmin, r.xmax), normalize_axis(p.y, r.ymin, r.ymax)))
            .collect();
        Ok(Dataset { points, source: source.into(), original_ranges: r })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn denormalize(&self, p: Point) -> Point {
        let r = &self.original_ranges;
        Point::new(denormalize_axis(p.x, r.xmin, r.xmax), denormalize_axis(p.y, r.ymin, r.ymax))
    }

    /// Writes `x,y` rows with nine significant digits.
    pub fn write_csv(&self, path: &Path, header: bool) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            if header {
                writeln!(w, "x,y")?;
            }
            for p in &self.points {
                writeln!(w, "{},{}", sig9(p.x), sig9(p.y))?;
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))
    }

    /// Reads a file produced by [`Dataset::write_csv`] without renormalizing.
    pub fn read_normalized(path: &Path) -> Result<Self> {
        let loaded = load_rows(path, &ColumnSelector::Index(0), &ColumnSelector::Index(1))?;
        if loaded.skipped_rows > 0 {
            return Err(Error::Parse {
                line: loaded.first_skipped_line.unwrap_or(0),
                message: "non-numeric value in normalized dataset".into(),
            });
        }
        Dataset::new(loaded.raw, path.display().to_string())
    }
}

/// Formats a value with nine significant digits, trailing zeros trimmed.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".to_string() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Picks a CSV column by zero-based index or by header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.trim().to_string()),
        })
    }
}

impl fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "{i}"),
            ColumnSelector::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub skipped_rows: usize,
    pub header: Option<Vec<String>>,
}

struct RawRows {
    raw: Vec<Point>,
    skipped_rows: usize,
    first_skipped_line: Option<usize>,
    header: Option<Vec<String>>,
}

fn parse_cell(record: &csv::StringRecord, col: usize) -> Option<f64> {
    record.get(col).and_then(|c| c.trim().parse::<f64>().ok()).filter(|v| v.is_finite())
}

fn resolve(sel: &ColumnSelector, header: Option<&[String]>, width: usize) -> Result<usize> {
    match sel {
        ColumnSelector::Index(i) if *i < width => Ok(*i),
        ColumnSelector::Index(i) => {
            Err(Error::Column(format!("index {i} but the first row has {width} columns")))
        }
        ColumnSelector::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::Column(format!("no header column named {name:?}"))),
    }
}

fn load_rows(path: &Path, x_col: &ColumnSelector, y_col: &ColumnSelector) -> Result<RawRows> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Empty(format!("{} has no rows", path.display()))),
    };
    let first_cells: Vec<String> = first.iter().map(str::to_string).collect();
    // Name selectors imply a header; otherwise the first row is a header only
    // if one of the selected cells does not parse.
    let named = matches!(x_col, ColumnSelector::Name(_)) || matches!(y_col, ColumnSelector::Name(_));
    let xi = resolve(x_col, Some(&first_cells), first.len())?;
    let yi = resolve(y_col, Some(&first_cells), first.len())?;
    let is_header = named || parse_cell(&first, xi).is_none() || parse_cell(&first, yi).is_none();

    let mut out = RawRows { raw: Vec::new(), skipped_rows: 0, first_skipped_line: None, header: None };
    let take = |record: &csv::StringRecord, line: usize, out: &mut RawRows| {
        match (parse_cell(record, xi), parse_cell(record, yi)) {
            (Some(x), Some(y)) => out.raw.push(Point::new(x, y)),
            _ => {
                out.skipped_rows += 1;
                out.first_skipped_line.get_or_insert(line);
            }
        }
    };
    if is_header {
        out.header = Some(first_cells);
    } else {
        take(&first, 1, &mut out);
    }
    for (i, record) in records.enumerate() {
        take(&record?, i + 2, &mut out);
    }
    if out.raw.is_empty() {
        return Err(Error::Empty(format!("{} has no parseable rows", path.display())));
    }
    Ok(out)
}

/// Loads two numeric columns from a CSV file and min-max normalizes them.
/// Rows whose selected cells are missing or non-numeric are skipped and counted.
pub fn load_csv(path: &Path, x_col: &ColumnSelector, y_col: &ColumnSelector) -> Result<LoadedCsv> {
    let rows = load_rows(path, x_col, y_col)?;
    let dataset = Dataset::from_raw(&rows.raw, path.display().to_string())?;
    Ok(LoadedCsv { dataset, skipped_rows: rows.skipped_rows, header: rows.header })
}

/// Synthetic "hidden correlation" data: a strongly correlated Gaussian bulk
/// with an uncorrelated Gaussian minority laid over it.
pub fn gen_hidden_correlation(n: usize, corr_fraction: f64, rho_main: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid(format!("n must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&corr_fraction) {
        return Err(Error::invalid(format!("corr_fraction must be in [0,1], got {corr_fraction}")));
    }
    if !(rho_main.abs() <= 1.0) {
        return Err(Error::invalid(format!("rho_main must be in [-1,1], got {rho_main}")));
    }
    let n_corr = (corr_fraction * n as f64).round() as usize;
    let mut rng = rng::seeded(seed);
    let slope = (1.0 - rho_main * rho_main).sqrt();
    let raw: Vec<Point> = (0..n)
        .map(|i| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            if i < n_corr {
                Point::new(a, rho_main * a + slope * b)
            } else {
                Point::new(a, b)
            }
        })
        .collect();
    Dataset::from_raw(
        &raw,
        format!("hidden-correlation n={n} corr_fraction={corr_fraction} rho={rho_main} seed={seed}"),
    )
}

/// `round(base · factor^e)` for each exponent, halves rounded up.
pub fn sample_size_series(base: usize, factor: f64, exponents: &[i32]) -> Vec<usize> {
    exponents
        .iter()
        .map(|&e| (base as f64 * factor.powi(e) + 0.5).floor() as usize)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn idx(i: usize) -> ColumnSelector {
        ColumnSelector::Index(i)
    }

    #[test]
    fn min_max_normalization() {
        let f = write_tmp("10,20\n30,40\n20,30\n");
        let l = load_csv(f.path(), &idx(0), &idx(1)).unwrap();
        assert_eq!(
            l.dataset.points(),
            &[Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(0.5, 0.5)]
        );
        assert_eq!(l.skipped_rows, 0);
        assert!(l.header.is_none());
    }

    #[test]
    fn single_row_is_degenerate() {
        let f = write_tmp("5,7\n");
        let l = load_csv(f.path(), &idx(0), &idx(1)).unwrap();
        assert_eq!(l.dataset.points(), &[Point::new(0.5, 0.5)]);
    }

    #[test]
    fn header_and_na_rows() {
        let f = write_tmp("a,b\n1,2\nNA,3\n4,5\n");
        let l = load_csv(f.path(), &idx(0), &idx(1)).unwrap();
        assert_eq!(l.dataset.len(), 2);
        assert_eq!(l.skipped_rows, 1);
        assert_eq!(l.header.unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn named_columns() {
        let f = write_tmp("id,price,size\n0,3,10\n1,5,30\n");
        let l = load_csv(f.path(), &"size".parse().unwrap(), &"price".parse().unwrap()).unwrap();
        assert_eq!(l.dataset.points(), &[Point::new(0.0, 0.0), Point::new(1.0, 1.0)]);
        assert!(matches!(
            load_csv(f.path(), &"nope".parse().unwrap(), &idx(1)),
            Err(Error::Column(_))
        ));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), &idx(0), &idx(1)),
            Err(Error::Io { .. })
        ));
        let f = write_tmp("x,y\nNA,NA\n");
        assert!(matches!(load_csv(f.path(), &idx(0), &idx(1)), Err(Error::Empty(_))));
        let f = write_tmp("1,2\n");
        assert!(matches!(load_csv(f.path(), &idx(0), &idx(5)), Err(Error::Column(_))));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.5), "0.5");
        assert_eq!(sig9(0.123456789123), "0.123456789");
        assert_eq!(sig9(0.000123456789123), "0.000123456789");
        assert_eq!(sig9(0.99999999999), "1");
    }

    #[test]
    fn write_then_read_normalized() {
        let d = Dataset::new(vec![Point::new(0.25, 1.0), Point::new(0.0, 0.3333333333)], "t").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(f.path(), true).unwrap();
        let back = Dataset::read_normalized(f.path()).unwrap();
        assert_eq!(back.points()[0], Point::new(0.25, 1.0));
        assert!((back.points()[1].y - 0.3333333333).abs() < 1e-9);
    }

    fn pearson(points: &[Point]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
        let my = points.iter().map(|p| p.y).sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for p in points {
            sxy += (p.x - mx) * (p.y - my);
            sxx += (p.x - mx).powi(2);
            syy += (p.y - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn hidden_correlation_structure() {
        let d = gen_hidden_correlation(1000, 1.0, 0.9, 7).unwrap();
        assert!((pearson(d.points()) - 0.9).abs() <= 0.05);
        let d = gen_hidden_correlation(1000, 0.0, 0.9, 7).unwrap();
        assert!(pearson(d.points()).abs() <= 0.1);
        assert_eq!(gen_hidden_correlation(500, 0.975, 0.9, 3).unwrap(), gen_hidden_correlation(500, 0.975, 0.9, 3).unwrap());
        assert!(gen_hidden_correlation(1, 0.5, 0.9, 0).is_err());
        assert!(gen_hidden_correlation(10, 1.5, 0.9, 0).is_err());
        assert!(gen_hidden_correlation(10, 0.5, 1.1, 0).is_err());
    }

    #[test]
    fn size_series() {
        assert_eq!(sample_size_series(250, 1.5, &[0, 1, 3, 5, 7, 9]), vec![250, 375, 844, 1898, 4271, 9611]);
        assert_eq!(sample_size_series(100, 1.0, &[0, 1, 2]), vec![100, 100, 100]);
        assert_eq!(sample_size_series(10, 2.0, &[0, 3]), vec![10, 80]);
    }

    proptest::proptest! {
        #[test]
        fn denormalize_roundtrip(raw in proptest::collection::vec((-1e6f64..1e6, -1e3f64..1e3), 2..50)) {
            let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let d = Dataset::from_raw(&pts, "p").unwrap();
            let r = d.original_ranges;
            for (p, q) in pts.iter().zip(d.points()) {
                let back = d.denormalize(*q);
                if r.xmax > r.xmin {
                    proptest::prop_assert!((back.x - p.x).abs() <= 1e-9 * (r.xmax - r.xmin).max(p.x.abs()));
                }
                if r.ymax > r.ymin {
                    proptest::prop_assert!((back.y - p.y).abs() <= 1e-9 * (r.ymax - r.ymin).max(p.y.abs()));
                }
            }
        }

        #[test]
        fn size_series_monotone(base in 1usize..1000, factor in 1.0f64..3.0, mut exps in proptest::collection::vec(0i32..12, 1..8)) {
            exps.sort();
            let s = sample_size_series(base, factor, &exps);
            proptest::prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
