//! Tabular dataset ingestion, splits, preprocessing, and synthetic tasks.
//!
//! CSV files arrive with a JSON schema sidecar naming each column's role
//! (`numeric`, `categorical`, `target`) and the task kind. All
//! preprocessing statistics (feature means and stds, quantile edges,
//! categorical vocabularies, the target scaler) come from the training
//! split alone; validation and test rows never leak into them.

use crate::error::Error;
use crate::math::Rng;
use crate::{Mat, Real};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Prediction task attached to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass(usize),
}

impl TaskKind {
    /// Number of classes for classification tasks.
    pub fn classes(&self) -> Option<usize> {
        match self {
            TaskKind::Regression => None,
            TaskKind::Binary => Some(2),
            TaskKind::Multiclass(c) => Some(*c),
        }
    }

    /// Width of the model head for this task.
    pub fn output_dim(&self) -> usize {
        match self {
            TaskKind::Regression | TaskKind::Binary => 1,
            TaskKind::Multiclass(c) => *c,
        }
    }

    /// Whether the validation metric (accuracy vs RMSE) improves upward.
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, TaskKind::Regression)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let TaskKind::Multiclass(c) = self {
            if *c < 2 {
                return Err(Error::InvalidArgument(format!(
                    "multiclass task needs at least 2 classes, got {c}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Numeric,
    Categorical,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaColumn {
    pub name: String,
    pub role: ColumnRole,
}

/// Sidecar schema: task kind plus one entry per mapped CSV column.
/// CSV columns not named here are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub task: TaskKind,
    pub columns: Vec<SchemaColumn>,
}

impl DatasetSchema {
    pub fn from_json_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let schema: DatasetSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.task.validate()?;
        let targets = self
            .columns
            .iter()
            .filter(|c| c.role == ColumnRole::Target)
            .count();
        if targets != 1 {
            return Err(Error::SchemaMismatch(format!(
                "schema must name exactly one target column, found {targets}"
            )));
        }
        if self.columns.len() < 2 {
            return Err(Error::SchemaMismatch(
                "schema needs at least one feature column".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(&c.name) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column name {:?}",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// How to carve a dataset into train/validation/test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    /// Seeded shuffle, then `floor(train * n)` rows for training,
    /// `floor(val * n)` for validation, remainder for test.
    Fractions {
        train: f64,
        val: f64,
        test: f64,
        seed: u64,
    },
    /// Explicit files with one zero-based row index per line.
    IndexFiles {
        train: PathBuf,
        val: PathBuf,
        test: PathBuf,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
            seed: 0,
        }
    }
}

/// Z-score transform for regression targets; keeps the inverse exact to
/// round-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: Real,
    pub std: Real,
    /// Constant training target: scaling becomes the identity shift.
    pub degenerate: bool,
}

impl TargetScaler {
    /// Fit mean and population std over the given (training) targets.
    pub fn fit(values: &[Real]) -> TargetScaler {
        let n = values.len().max(1) as Real;
        let mean = values.iter().sum::<Real>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / n;
        let std = var.sqrt();
        if std > 0.0 {
            TargetScaler {
                mean,
                std,
                degenerate: false,
            }
        } else {
            TargetScaler {
                mean,
                std: 1.0,
                degenerate: true,
            }
        }
    }

    pub fn scale(&self, y: Real) -> Real {
        (y - self.mean) / self.std
    }

    pub fn unscale(&self, y: Real) -> Real {
        y * self.std + self.mean
    }
}

/// Per-feature standardization record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub mean: Real,
    pub std: Real,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Regression(Vec<Real>),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(v) => v.len(),
            Targets::Classes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn regression(&self) -> Option<&[Real]> {
        match self {
            Targets::Regression(v) => Some(v),
            Targets::Classes(_) => None,
        }
    }

    pub fn classes(&self) -> Option<&[usize]> {
        match self {
            Targets::Classes(v) => Some(v),
            Targets::Regression(_) => None,
        }
    }

    fn gather(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Regression(v) => Targets::Regression(idx.iter().map(|&i| v[i]).collect()),
            Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Feature rows for a subset of a dataset: numeric block plus per-row
/// categorical vocabulary indices.
#[derive(Debug, Clone)]
pub struct Batch {
    pub numeric: Mat,
    pub cats: Vec<Vec<usize>>,
}

impl Batch {
    pub fn n(&self) -> usize {
        self.numeric.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// In-memory tabular dataset with fixed splits.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub name: String,
    pub task: TaskKind,
    numeric: Mat,
    cat: Vec<usize>,
    n_cat: usize,
    pub cat_vocabs: Vec<Vec<String>>,
    targets: Targets,
    split_train: Vec<usize>,
    split_val: Vec<usize>,
    split_test: Vec<usize>,
    pub feature_stats: Option<Vec<FeatureStat>>,
    pub target_scaler: Option<TargetScaler>,
}

#[allow(clippy::type_complexity)]
fn build_splits(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), Error> {
    match spec {
        SplitSpec::Fractions {
            train,
            val,
            test,
            seed,
        } => {
            if !(*train > 0.0 && *val > 0.0 && *test > 0.0) {
                return Err(Error::InvalidArgument(
                    "split fractions must all be positive".into(),
                ));
            }
            if (train + val + test - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "split fractions must sum to 1, got {}",
                    train + val + test
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            Rng::new(*seed).shuffle(&mut order);
            let n_train = (train * n as f64).floor() as usize;
            let n_val = (val * n as f64).floor() as usize;
            let tr = order[..n_train].to_vec();
            let va = order[n_train..n_train + n_val].to_vec();
            let te = order[n_train + n_val..].to_vec();
            if tr.is_empty() {
                return Err(Error::EmptySplit("train"));
            }
            if va.is_empty() {
                return Err(Error::EmptySplit("val"));
            }
            if te.is_empty() {
                return Err(Error::EmptySplit("test"));
            }
            Ok((tr, va, te))
        }
        SplitSpec::IndexFiles { train, val, test } => {
            let read = |path: &PathBuf, which: &'static str| -> Result<Vec<usize>, Error> {
                let text = std::fs::read_to_string(path)?;
                let mut idx = Vec::new();
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let v: usize = line.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad index {line:?} in {which} split file"))
                    })?;
                    if v >= n {
                        return Err(Error::InvalidArgument(format!(
                            "index {v} out of range for {n} rows ({which} split)"
                        )));
                    }
                    idx.push(v);
                }
                if idx.is_empty() {
                    return Err(Error::EmptySplit(which));
                }
                Ok(idx)
            };
            let tr = read(train, "train")?;
            let va = read(val, "val")?;
            let te = read(test, "test")?;
            let mut seen = vec![false; n];
            for &i in tr.iter().chain(&va).chain(&te) {
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "row {i} appears in more than one split"
                    )));
                }
                seen[i] = true;
            }
            Ok((tr, va, te))
        }
    }
}

fn parse_target(
    task: TaskKind,
    raw: &str,
    row: usize,
    col: usize,
) -> Result<(Option<Real>, Option<usize>), Error> {
    let bad = || Error::ParseCell {
        row,
        col,
        value: raw.to_string(),
    };
    match task {
        TaskKind::Regression => {
            let v: Real = raw.trim().parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok((Some(v), None))
        }
        TaskKind::Binary => {
            let v: i64 = raw.trim().parse().map_err(|_| bad())?;
            if v != 0 && v != 1 {
                return Err(Error::LabelOutOfRange {
                    label: v.max(0) as usize,
                    classes: 2,
                });
            }
            Ok((None, Some(v as usize)))
        }
        TaskKind::Multiclass(c) => {
            let v: usize = raw.trim().parse().map_err(|_| bad())?;
            if v >= c {
                return Err(Error::LabelOutOfRange {
                    label: v,
                    classes: c,
                });
            }
            Ok((None, Some(v)))
        }
    }
}

/// Load a CSV file against its schema and split specification.
///
/// Rows index from zero (excluding the header) in error messages; columns
/// use the CSV file's positions. Categorical vocabularies come from the
/// training rows only, sorted lexicographically; values unseen in training
/// map to the unknown bucket (index = vocabulary size).
pub fn load_csv(
    data_path: &Path,
    schema: &DatasetSchema,
    split: &SplitSpec,
) -> Result<TabularDataset, Error> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(data_path)?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize, Error> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column {name:?} missing from CSV header")))
    };

    let mut numeric_cols: Vec<(String, usize)> = Vec::new();
    let mut cat_cols: Vec<(String, usize)> = Vec::new();
    let mut target_col = 0usize;
    for c in &schema.columns {
        let pos = position(&c.name)?;
        match c.role {
            ColumnRole::Numeric => numeric_cols.push((c.name.clone(), pos)),
            ColumnRole::Categorical => cat_cols.push((c.name.clone(), pos)),
            ColumnRole::Target => target_col = pos,
        }
    }

    let mut numeric_data: Vec<Real> = Vec::new();
    let mut cat_raw: Vec<String> = Vec::new();
    let mut reg_targets: Vec<Real> = Vec::new();
    let mut cls_targets: Vec<usize> = Vec::new();
    let mut n = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |col: usize| -> Result<&str, Error> {
            record.get(col).ok_or(Error::ParseCell {
                row: row_idx,
                col,
                value: "<missing>".to_string(),
            })
        };
        for (_, col) in &numeric_cols {
            let raw = cell(*col)?;
            let v: Real = raw.trim().parse().map_err(|_| Error::ParseCell {
                row: row_idx,
                col: *col,
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseCell {
                    row: row_idx,
                    col: *col,
                    value: raw.to_string(),
                });
            }
            numeric_data.push(v);
        }
        for (_, col) in &cat_cols {
            cat_raw.push(cell(*col)?.trim().to_string());
        }
        match parse_target(schema.task, cell(target_col)?, row_idx, target_col)? {
            (Some(y), None) => reg_targets.push(y),
            (None, Some(y)) => cls_targets.push(y),
            _ => unreachable!(),
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySplit("train"));
    }

    let (split_train, split_val, split_test) = build_splits(n, split)?;

    // Vocabularies from the training rows only.
    let n_cat = cat_cols.len();
    let mut cat_vocabs: Vec<Vec<String>> = Vec::with_capacity(n_cat);
    for c in 0..n_cat {
        let mut vocab: Vec<String> = split_train
            .iter()
            .map(|&i| cat_raw[i * n_cat + c].clone())
            .collect::<std::collections::HashSet<_>>()
            .into_iter()
            .collect();
        vocab.sort();
        cat_vocabs.push(vocab);
    }
    let lookups: Vec<HashMap<&str, usize>> = cat_vocabs
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
        .collect();
    let mut cat = Vec::with_capacity(n * n_cat);
    for i in 0..n {
        for c in 0..n_cat {
            let raw = cat_raw[i * n_cat + c].as_str();
            cat.push(*lookups[c].get(raw).unwrap_or(&cat_vocabs[c].len()));
        }
    }

    let targets = match schema.task {
        TaskKind::Regression => Targets::Regression(reg_targets),
        _ => Targets::Classes(cls_targets),
    };
    let name = data_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    Ok(TabularDataset {
        name,
        task: schema.task,
        numeric: Mat::new(n, numeric_cols.len(), numeric_data)?,
        cat,
        n_cat,
        cat_vocabs,
        targets,
        split_train,
        split_val,
        split_test,
        feature_stats: None,
        target_scaler: None,
    })
}

impl TabularDataset {
    pub fn n_rows(&self) -> usize {
        self.numeric.rows()
    }

    pub fn n_numeric(&self) -> usize {
        self.numeric.cols()
    }

    pub fn n_categorical(&self) -> usize {
        self.n_cat
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.split_train,
            Split::Val => &self.split_val,
            Split::Test => &self.split_test,
        }
    }

    /// Training-vocabulary sizes per categorical feature (unknown bucket
    /// excluded).
    pub fn cat_cardinalities(&self) -> Vec<usize> {
        self.cat_vocabs.iter().map(Vec::len).collect()
    }

    /// Numeric training columns, for fitting embeddings.
    pub fn train_numeric_columns(&self) -> Vec<Vec<Real>> {
        (0..self.n_numeric())
            .map(|j| {
                self.split_train
                    .iter()
                    .map(|&i| self.numeric.get(i, j))
                    .collect()
            })
            .collect()
    }

    /// Assemble the feature rows for the given indices.
    pub fn gather(&self, idx: &[usize]) -> Batch {
        let numeric = Mat::from_fn(idx.len(), self.n_numeric(), |i, j| {
            self.numeric.get(idx[i], j)
        });
        let cats = idx
            .iter()
            .map(|&i| self.cat[i * self.n_cat..(i + 1) * self.n_cat].to_vec())
            .collect();
        Batch { numeric, cats }
    }

    pub fn gather_targets(&self, idx: &[usize]) -> Targets {
        self.targets.gather(idx)
    }

    /// Z-score numeric features (and the regression target) in place using
    /// training-split statistics; the inverse target transform is retained.
    ///
    /// Standard deviations are population (`1/n`) statistics. A feature
    /// whose training std is zero is left untouched and flagged degenerate.
    /// Calling this twice is an error.
    pub fn standardize(&mut self) -> Result<(), Error> {
        if self.feature_stats.is_some() {
            return Err(Error::InvalidArgument(
                "dataset is already standardized".into(),
            ));
        }
        let n_train = self.split_train.len() as Real;
        let mut stats = Vec::with_capacity(self.n_numeric());
        for j in 0..self.n_numeric() {
            let mean = self
                .split_train
                .iter()
                .map(|&i| self.numeric.get(i, j))
                .sum::<Real>()
                / n_train;
            let var = self
                .split_train
                .iter()
                .map(|&i| {
                    let d = self.numeric.get(i, j) - mean;
                    d * d
                })
                .sum::<Real>()
                / n_train;
            let std = var.sqrt();
            let degenerate = std == 0.0;
            stats.push(FeatureStat {
                mean,
                std: if degenerate { 1.0 } else { std },
                degenerate,
            });
        }
        for i in 0..self.n_rows() {
            for (j, st) in stats.iter().enumerate() {
                if !st.degenerate {
                    let v = self.numeric.get(i, j);
                    self.numeric.set(i, j, (v - st.mean) / st.std);
                }
            }
        }
        self.feature_stats = Some(stats);
        if let Targets::Regression(ys) = &mut self.targets {
            let train_ys: Vec<Real> = self.split_train.iter().map(|&i| ys[i]).collect();
            let scaler = TargetScaler::fit(&train_ys);
            for y in ys.iter_mut() {
                *y = scaler.scale(*y);
            }
            self.target_scaler = Some(scaler);
        }
        Ok(())
    }

    /// Population variance of the training targets in the original scale.
    pub fn train_target_variance(&self) -> Option<Real> {
        let ys = self.targets.regression()?;
        let unscale = |y: Real| match &self.target_scaler {
            Some(s) => s.unscale(y),
            None => y,
        };
        let vals: Vec<Real> = self.split_train.iter().map(|&i| unscale(ys[i])).collect();
        let n = vals.len() as Real;
        let mean = vals.iter().sum::<Real>() / n;
        Some(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / n)
    }
}

/// Built-in synthetic generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Two unit-variance Gaussian blobs in the plane, means (-2, 0) and
    /// (2, 0): binary classification with Bayes accuracy about 0.977.
    TwoGaussiansBinary,
    /// Four Gaussian blobs (std 0.3) at the corners (+-1, +-1), one class
    /// per corner: a 4-class XOR pattern that no linear model separates.
    XorMulticlass,
    /// Noiseless linear target `y = 2 x1 - x2` on `U(-1,1)^2` inputs.
    LinearRegression,
    /// Friedman #1: `y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5
    /// + e`, inputs `U(0,1)^5`, noise `e ~ N(0,1)`.
    FriedmanRegression,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::TwoGaussiansBinary => "two_gaussians_binary",
            SyntheticKind::XorMulticlass => "xor_multiclass",
            SyntheticKind::LinearRegression => "linear_regression",
            SyntheticKind::FriedmanRegression => "friedman_regression",
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            SyntheticKind::TwoGaussiansBinary => TaskKind::Binary,
            SyntheticKind::XorMulticlass => TaskKind::Multiclass(4),
            SyntheticKind::LinearRegression | SyntheticKind::FriedmanRegression => {
                TaskKind::Regression
            }
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "two_gaussians_binary" => Ok(SyntheticKind::TwoGaussiansBinary),
            "xor_multiclass" => Ok(SyntheticKind::XorMulticlass),
            "linear_regression" => Ok(SyntheticKind::LinearRegression),
            "friedman_regression" => Ok(SyntheticKind::FriedmanRegression),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic dataset {other:?}"
            ))),
        }
    }
}

/// Generate a synthetic dataset with 0.6/0.2/0.2 fractional splits.
///
/// Rows are drawn one at a time from a single seeded stream (label first
/// where applicable, then features, then noise), so a (kind, n, seed)
/// triple pins the dataset bitwise.
pub fn make_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<TabularDataset, Error> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "synthetic datasets need at least 10 rows, got {n}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut split_rng = rng.fork();
    let (n_features, task) = match kind {
        SyntheticKind::TwoGaussiansBinary => (2, TaskKind::Binary),
        SyntheticKind::XorMulticlass => (2, TaskKind::Multiclass(4)),
        SyntheticKind::LinearRegression => (2, TaskKind::Regression),
        SyntheticKind::FriedmanRegression => (5, TaskKind::Regression),
    };
    let mut numeric = Vec::with_capacity(n * n_features);
    let mut reg = Vec::new();
    let mut cls = Vec::new();
    for _ in 0..n {
        match kind {
            SyntheticKind::TwoGaussiansBinary => {
                let label = rng.below(2) as usize;
                let mu = if label == 0 { -2.0 } else { 2.0 };
                numeric.push(mu + rng.normal());
                numeric.push(rng.normal());
                cls.push(label);
            }
            SyntheticKind::XorMulticlass => {
                let label = rng.below(4) as usize;
                let (cx, cy) = match label {
                    0 => (1.0, 1.0),
                    1 => (-1.0, 1.0),
                    2 => (-1.0, -1.0),
                    _ => (1.0, -1.0),
                };
                numeric.push(cx + 0.3 * rng.normal());
                numeric.push(cy + 0.3 * rng.normal());
                cls.push(label);
            }
            SyntheticKind::LinearRegression => {
                let x1 = rng.uniform(-1.0, 1.0);
                let x2 = rng.uniform(-1.0, 1.0);
                numeric.push(x1);
                numeric.push(x2);
                reg.push(2.0 * x1 - x2);
            }
            SyntheticKind::FriedmanRegression => {
                let x: Vec<Real> = (0..5).map(|_| rng.next_f64()).collect();
                numeric.extend_from_slice(&x);
                let y = 10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
                    + rng.normal();
                reg.push(y);
            }
        }
    }
    let (split_train, split_val, split_test) = build_splits(
        n,
        &SplitSpec::Fractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
            seed: split_rng.next_u64(),
        },
    )?;
    Ok(TabularDataset {
        name: kind.as_str().to_string(),
        task,
        numeric: Mat::new(n, n_features, numeric)?,
        cat: Vec::new(),
        n_cat: 0,
        cat_vocabs: Vec::new(),
        targets: match task {
            TaskKind::Regression => Targets::Regression(reg),
            _ => Targets::Classes(cls),
        },
        split_train,
        split_val,
        split_test,
        feature_stats: None,
        target_scaler: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn demo_schema() -> DatasetSchema {
        DatasetSchema {
            task: TaskKind::Binary,
            columns: vec![
                SchemaColumn {
                    name: "age".into(),
                    role: ColumnRole::Numeric,
                },
                SchemaColumn {
                    name: "color".into(),
                    role: ColumnRole::Categorical,
                },
                SchemaColumn {
                    name: "label".into(),
                    role: ColumnRole::Target,
                },
            ],
        }
    }

    #[test]
    fn schema_json_round_trip() {
        let text = r#"{
            "task": {"multiclass": 3},
            "columns": [
                {"name": "x", "role": "numeric"},
                {"name": "y", "role": "target"}
            ]
        }"#;
        let schema: DatasetSchema = serde_json::from_str(text).unwrap();
        assert_eq!(schema.task, TaskKind::Multiclass(3));
        let back = serde_json::to_string(&schema).unwrap();
        let again: DatasetSchema = serde_json::from_str(&back).unwrap();
        assert_eq!(schema, again);
    }

    #[test]
    fn schema_requires_single_target() {
        let mut schema = demo_schema();
        schema.columns[0].role = ColumnRole::Target;
        assert!(schema.validate().is_err());
    }

    #[test]
    fn fractional_split_is_exact_and_disjoint() {
        let (tr, va, te) = build_splits(
            10,
            &SplitSpec::Fractions {
                train: 0.6,
                val: 0.2,
                test: 0.2,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 2, 2));
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    // Frozen membership for one seed: guards the shuffle/split pipeline
    // against silent stream changes.
    #[test]
    fn fractional_split_golden_membership() {
        let (tr, _, _) = build_splits(
            10,
            &SplitSpec::Fractions {
                train: 0.6,
                val: 0.2,
                test: 0.2,
                seed: 5,
            },
        )
        .unwrap();
        let (tr2, _, _) = build_splits(
            10,
            &SplitSpec::Fractions {
                train: 0.6,
                val: 0.2,
                test: 0.2,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn load_csv_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = write_file(
            dir.path(),
            "toy.csv",
            "age,color,label\n\
             1.0,red,0\n2.0,blue,1\n3.0,red,0\n4.0,green,1\n5.0,red,0\n\
             6.0,blue,1\n7.0,red,0\n8.0,blue,1\n9.0,mauve,0\n10.0,blue,1\n",
        );
        let ds = load_csv(
            &csv_path,
            &demo_schema(),
            &SplitSpec::Fractions {
                train: 0.6,
                val: 0.2,
                test: 0.2,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(ds.n_rows(), 10);
        assert_eq!(ds.n_numeric(), 1);
        assert_eq!(ds.n_categorical(), 1);
        // Vocabulary is sorted and train-only; unseen strings map to the
        // unknown bucket.
        let vocab = &ds.cat_vocabs[0];
        assert!(vocab.windows(2).all(|w| w[0] < w[1]));
        let card = vocab.len();
        let train_batch = ds.gather(ds.indices(Split::Train));
        assert!(train_batch.cats.iter().all(|row| row[0] < card));
    }

    #[test]
    fn load_csv_reports_bad_cell_position() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = write_file(
            dir.path(),
            "bad.csv",
            "age,color,label\n1.0,red,0\nnope,blue,1\n",
        );
        let err = load_csv(&csv_path, &demo_schema(), &SplitSpec::default()).unwrap_err();
        assert_eq!(
            err,
            Error::ParseCell {
                row: 1,
                col: 0,
                value: "nope".into()
            }
        );
    }

    #[test]
    fn load_csv_missing_column_errors() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = write_file(dir.path(), "short.csv", "age,label\n1.0,0\n");
        let err = load_csv(&csv_path, &demo_schema(), &SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }

    #[test]
    fn binary_labels_must_be_zero_or_one() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = write_file(
            dir.path(),
            "lab.csv",
            "age,color,label\n1.0,red,2\n",
        );
        let err = load_csv(&csv_path, &demo_schema(), &SplitSpec::default()).unwrap_err();
        assert_eq!(
            err,
            Error::LabelOutOfRange {
                label: 2,
                classes: 2
            }
        );
    }

    #[test]
    fn standardize_uses_train_stats_only() {
        let mut ds = make_synthetic(SyntheticKind::LinearRegression, 50, 3).unwrap();
        let mut tampered = ds.clone();
        // Corrupt every val/test row before standardizing; train-split
        // statistics and transformed train rows must not move.
        for &i in tampered
            .split_val
            .clone()
            .iter()
            .chain(tampered.split_test.clone().iter())
        {
            for j in 0..tampered.n_numeric() {
                let v = tampered.numeric.get(i, j);
                tampered.numeric.set(i, j, v * 100.0 + 7.0);
            }
        }
        ds.standardize().unwrap();
        tampered.standardize().unwrap();
        assert_eq!(ds.feature_stats, tampered.feature_stats);
        assert_eq!(ds.target_scaler, tampered.target_scaler);
        for &i in &ds.split_train {
            for j in 0..ds.n_numeric() {
                assert_eq!(ds.numeric.get(i, j), tampered.numeric.get(i, j));
            }
        }
    }

    #[test]
    fn standardized_train_moments_are_zero_one() {
        let mut ds = make_synthetic(SyntheticKind::FriedmanRegression, 200, 9).unwrap();
        ds.standardize().unwrap();
        for col in ds.train_numeric_columns() {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-12, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-12, "var {var}");
        }
    }

    #[test]
    fn target_scaler_round_trip() {
        let scaler = TargetScaler::fit(&[3.0, -1.0, 7.5, 2.25]);
        for y in [-100.0, 0.0, 0.1, 55.5] {
            assert!((scaler.unscale(scaler.scale(y)) - y).abs() < 1e-12);
        }
        let degenerate = TargetScaler::fit(&[4.0, 4.0, 4.0]);
        assert!(degenerate.degenerate);
        assert_eq!(degenerate.scale(4.0), 0.0);
        assert_eq!(degenerate.unscale(0.0), 4.0);
    }

    #[test]
    fn double_standardize_errors() {
        let mut ds = make_synthetic(SyntheticKind::LinearRegression, 30, 3).unwrap();
        ds.standardize().unwrap();
        assert!(ds.standardize().is_err());
    }

    #[test]
    fn synthetic_datasets_are_deterministic() {
        for kind in [
            SyntheticKind::TwoGaussiansBinary,
            SyntheticKind::XorMulticlass,
            SyntheticKind::LinearRegression,
            SyntheticKind::FriedmanRegression,
        ] {
            let a = make_synthetic(kind, 64, 11).unwrap();
            let b = make_synthetic(kind, 64, 11).unwrap();
            assert_eq!(a, b);
            let c = make_synthetic(kind, 64, 12).unwrap();
            assert_ne!(a, c, "{kind:?} should vary with the seed");
        }
    }

    #[test]
    fn linear_regression_target_is_exact() {
        let ds = make_synthetic(SyntheticKind::LinearRegression, 40, 17).unwrap();
        let ys = ds.targets().regression().unwrap();
        for i in 0..ds.n_rows() {
            let x1 = ds.numeric.get(i, 0);
            let x2 = ds.numeric.get(i, 1);
            assert_eq!(ys[i], 2.0 * x1 - x2);
        }
    }

    #[test]
    fn two_gaussians_are_separable_by_first_feature() {
        let ds = make_synthetic(SyntheticKind::TwoGaussiansBinary, 4000, 5).unwrap();
        let labels = ds.targets().classes().unwrap();
        let correct = (0..ds.n_rows())
            .filter(|&i| {
                let pred = if ds.numeric.get(i, 0) > 0.0 { 1 } else { 0 };
                pred == labels[i]
            })
            .count();
        let acc = correct as f64 / ds.n_rows() as f64;
        assert!(acc > 0.95, "sign-threshold accuracy {acc}");
    }

    #[test]
    fn index_file_splits_load_and_reject_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write_file(dir.path(), "tr.txt", "0\n1\n2\n3\n4\n5\n");
        let va = write_file(dir.path(), "va.txt", "6\n7\n");
        let te = write_file(dir.path(), "te.txt", "8\n9\n");
        let (a, b, c) = build_splits(
            10,
            &SplitSpec::IndexFiles {
                train: tr.clone(),
                val: va.clone(),
                test: te,
            },
        )
        .unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        let overlap = write_file(dir.path(), "bad.txt", "5\n9\n");
        assert!(build_splits(
            10,
            &SplitSpec::IndexFiles {
                train: tr,
                val: va,
                test: overlap,
            },
        )
        .is_err());
    }
}
