//! Binary classification datasets: a synthetic generator and loaders for
//! sparse `label index:value ...` files and dense CSV.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::rng::stream;

pub const TRAIN_FRACTION: f64 = 0.8;

/// Dense feature matrix with ±1 labels and a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
    generating_weights: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset with every row in the training split.
    pub fn new(n_features: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return input_err("dataset needs at least one feature");
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                got: features.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return input_err("labels must be +1 or -1");
        }
        if features.iter().any(|v| !v.is_finite()) {
            return input_err("non-finite feature value");
        }
        let train = (0..labels.len()).collect();
        Ok(Self {
            n_features,
            features,
            labels,
            train,
            test: Vec::new(),
            generating_weights: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Weights used by [`make_synthetic_logistic`], when known.
    pub fn generating_weights(&self) -> Option<&[f64]> {
        self.generating_weights.as_deref()
    }

    /// Random split with `round(train_fraction · n)` training rows.
    pub fn with_split(mut self, seed: u64, train_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return input_err("train fraction must lie in [0, 1]");
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut stream(seed, 0));
        let n_train = (train_fraction * self.len() as f64).round() as usize;
        let mut test = idx.split_off(n_train);
        idx.sort_unstable();
        test.sort_unstable();
        self.train = idx;
        self.test = test;
        Ok(self)
    }

    /// Appends a constant-one feature column.
    pub fn with_intercept(mut self) -> Self {
        let d = self.n_features;
        let mut features = Vec::with_capacity(self.len() * (d + 1));
        for row in self.features.chunks_exact(d) {
            features.extend_from_slice(row);
            features.push(1.0);
        }
        self.features = features;
        self.n_features = d + 1;
        if let Some(w) = self.generating_weights.as_mut() {
            w.push(0.0);
        }
        self
    }
}

/// Draws `w* = separation · N(0, I)`, features `x ~ N(0, I)` and labels with
/// `P(y = +1 | x) = σ(w*·x)`, then splits 80/20. Deterministic in `seed`.
pub fn make_synthetic_logistic(seed: u64, n: usize, d_f: usize, separation: f64) -> Result<Dataset> {
    if n < 10 || d_f < 1 {
        return input_err("synthetic dataset needs n >= 10 and d_f >= 1");
    }
    if !separation.is_finite() {
        return input_err("separation must be finite");
    }
    let mut rng = stream(seed, 0);
    let w: Vec<f64> = (0..d_f)
        .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut features = Vec::with_capacity(n * d_f);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d_f).map(|_| rng.sample(StandardNormal)).collect();
        let logit: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let p = super::logistic::sigmoid(logit);
        labels.push(if rng.random::<f64>() < p { 1.0 } else { -1.0 });
        features.extend(x);
    }
    let mut ds = Dataset::new(d_f, features, labels)?.with_split(seed.wrapping_add(1), TRAIN_FRACTION)?;
    ds.generating_weights = Some(w);
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `label index:value ...` with 1-based indices; absent indices are 0.
    LibsvmLike,
    /// Dense comma-separated rows, label in the last column.
    Csv,
}

/// Which raw label values mean +1 and -1. Any other value is a parse error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub positive: f64,
    pub negative: f64,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self {
            positive: 1.0,
            negative: -1.0,
        }
    }
}

impl LabelMap {
    /// Covertype convention: class 1 is +1, class 2 is -1.
    pub fn covertype() -> Self {
        Self {
            positive: 1.0,
            negative: 2.0,
        }
    }

    fn map(&self, raw: f64) -> Option<f64> {
        if raw == self.positive {
            Some(1.0)
        } else if raw == self.negative {
            Some(-1.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub format: DataFormat,
    #[serde(default)]
    pub labels: LabelMap,
    #[serde(default)]
    pub split_seed: u64,
    /// Append a constant-one feature.
    #[serde(default)]
    pub intercept: bool,
    /// CSV only: skip the first line.
    #[serde(default)]
    pub has_header: bool,
}

impl LoadOptions {
    pub fn new(format: DataFormat) -> Self {
        Self {
            format,
            labels: LabelMap::default(),
            split_seed: 0,
            intercept: false,
            has_header: false,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path)?;
    parse_dataset(BufReader::new(file), options)
}

/// Parses a dataset from any reader. Blank lines and lines starting with `#`
/// are skipped; line numbers in errors are 1-based.
pub fn parse_dataset<R: BufRead>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let (n_features, features, labels) = match options.format {
        DataFormat::LibsvmLike => parse_sparse(reader, &options.labels)?,
        DataFormat::Csv => parse_csv(reader, &options.labels, options.has_header)?,
    };
    let ds = Dataset::new(n_features, features, labels)?;
    let ds = if options.intercept { ds.with_intercept() } else { ds };
    ds.with_split(options.split_seed, TRAIN_FRACTION)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_label(token: &str, map: &LabelMap, line: usize) -> Result<f64> {
    let raw: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("bad label {token:?}")))?;
    map.map(raw)
        .ok_or_else(|| parse_err(line, format!("label {token:?} is neither positive nor negative class")))
}

type Parsed = (usize, Vec<f64>, Vec<f64>);

fn parse_sparse<R: BufRead>(reader: R, map: &LabelMap) -> Result<Parsed> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = 0;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), map, lineno)?;
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, "non-finite value"));
            }
            width = width.max(idx);
            entries.push((idx - 1, val));
        }
        rows.push(entries);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    if width == 0 {
        return Err(parse_err(0, "no features present"));
    }
    let mut features = vec![0.0; rows.len() * width];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[i * width + j] = v;
        }
    }
    Ok((width, features, labels))
}

fn parse_csv<R: BufRead>(reader: R, map: &LabelMap, has_header: bool) -> Result<Parsed> {
    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if has_header && k == 0 {
            continue;
        }
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = text.split(',').map(str::trim).collect();
        if cells.len() < 2 {
            return Err(parse_err(lineno, "need at least one feature and a label"));
        }
        let w = cells.len() - 1;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(parse_err(
                    lineno,
                    format!("expected {expected} features, found {w}"),
                ));
            }
            _ => {}
        }
        for cell in &cells[..w] {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, "non-finite value"));
            }
            features.push(v);
        }
        labels.push(parse_label(cells[w], map, lineno)?);
    }
    match width {
        Some(w) => Ok((w, features, labels)),
        None => Err(parse_err(0, "no data rows")),
    }
}
