//! Tabular data ingestion, `[0, 1]` normalization and stratified splitting.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod synthetic;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Bounds used by the last normalization, if any.
    pub bounds: Option<Vec<FeatureBounds>>,
    /// Rows removed at load time because of missing values.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let width = feature_names.len();
        for row in &features {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite feature value"));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::invalid(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
            bounds: None,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at the given indices, in that order. Class names are preserved.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            bounds: self.bounds.clone(),
            dropped_rows: 0,
        }
    }

    /// Per-feature `(min, max)` over the given rows only.
    pub fn fit_bounds(&self, rows: &[usize]) -> Result<Vec<FeatureBounds>> {
        if rows.is_empty() {
            return Err(Error::Empty("row selection for normalization bounds"));
        }
        let mut bounds = vec![
            FeatureBounds {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            self.n_features()
        ];
        for &r in rows {
            for (b, &v) in bounds.iter_mut().zip(&self.features[r]) {
                b.min = b.min.min(v);
                b.max = b.max.max(v);
            }
        }
        Ok(bounds)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub delimiter: char,
    pub has_header: bool,
    /// Defaults to the last column.
    pub label_column: Option<LabelColumn>,
    pub missing: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: true,
            label_column: None,
            missing: "?".into(),
        }
    }
}

pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    if !opts.delimiter.is_ascii() {
        return Err(csv_err(format!("delimiter `{}` is not ASCII", opts.delimiter)));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter as u8)
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .from_reader(file);

    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(e.to_string()))?;
    let width = if opts.has_header {
        reader.headers().map_err(|e| csv_err(e.to_string()))?.len()
    } else {
        records.first().map(|r| r.len()).unwrap_or(0)
    };
    if width < 2 {
        return Err(csv_err("need at least one feature and one label column".into()));
    }
    let names: Vec<String> = if opts.has_header {
        reader
            .headers()
            .map_err(|e| csv_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        (0..width).map(|i| format!("f{i}")).collect()
    };

    let label_idx = match &opts.label_column {
        None => width - 1,
        Some(LabelColumn::Index(i)) if *i < width => *i,
        Some(LabelColumn::Index(i)) => {
            return Err(csv_err(format!("label column index {i} out of range")))
        }
        Some(LabelColumn::Name(n)) => names
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| csv_err(format!("unknown label column `{n}`")))?,
    };

    let mut features = Vec::with_capacity(records.len());
    let mut raw_labels = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for (row, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(csv_err(format!(
                "row {} has {} fields, expected {width}",
                row + 1,
                rec.len()
            )));
        }
        if rec.iter().any(|c| c.is_empty() || c == opts.missing) {
            dropped += 1;
            continue;
        }
        let mut x = Vec::with_capacity(width - 1);
        for (col, cell) in rec.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                csv_err(format!(
                    "non-numeric value `{cell}` in row {} column `{}`",
                    row + 1,
                    names[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(csv_err(format!("non-finite value in row {}", row + 1)));
            }
            x.push(v);
        }
        features.push(x);
        raw_labels.push(rec[label_idx].to_string());
    }
    if features.is_empty() {
        return Err(Error::Empty("dataset after dropping rows with missing values"));
    }

    let (labels, class_names) = reindex_labels(&raw_labels);
    let feature_names = names
        .into_iter()
        .enumerate()
        .filter_map(|(i, n)| (i != label_idx).then_some(n))
        .collect();
    let mut ds = Dataset::new(features, labels, feature_names, class_names)?;
    ds.dropped_rows = dropped;
    Ok(ds)
}

/// Dense `0..k` labels. Numeric labels are ordered by value, anything else
/// lexicographically.
fn reindex_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let mut distinct: Vec<String> = raw.to_vec();
    match &numeric {
        Some(_) => distinct.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        }),
        None => distinct.sort(),
    }
    distinct.dedup();
    let index: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let labels = raw.iter().map(|s| index[s.as_str()]).collect();
    (labels, distinct)
}

/// Min-max scaling into `[0, 1]`. Without explicit bounds they are fitted on
/// `ds` itself, which is expected to hold training rows only. Constant
/// features map to 0 and values outside the bounds are clamped.
pub fn normalize(ds: &Dataset, bounds: Option<&[FeatureBounds]>) -> Result<Dataset> {
    let bounds = match bounds {
        Some(b) => {
            if b.len() != ds.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: ds.n_features(),
                    got: b.len(),
                });
            }
            b.to_vec()
        }
        None => ds.fit_bounds(&(0..ds.len()).collect::<Vec<_>>())?,
    };
    let features = ds
        .features
        .iter()
        .map(|row| {
            row.iter()
                .zip(&bounds)
                .map(|(&v, b)| scale(v, b))
                .collect()
        })
        .collect();
    Ok(Dataset {
        features,
        labels: ds.labels.clone(),
        feature_names: ds.feature_names.clone(),
        class_names: ds.class_names.clone(),
        bounds: Some(bounds),
        dropped_rows: ds.dropped_rows,
    })
}

fn scale(v: f64, b: &FeatureBounds) -> f64 {
    let range = b.max - b.min;
    if range <= 0.0 {
        0.0
    } else {
        ((v - b.min) / range).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

impl Split {
    /// Normalized `(train, test)` sets, with bounds fitted on the training
    /// rows only.
    pub fn materialize(&self, ds: &Dataset) -> Result<(Dataset, Dataset)> {
        let bounds = ds.fit_bounds(&self.train)?;
        Ok((
            normalize(&ds.subset(&self.train), Some(&bounds))?,
            normalize(&ds.subset(&self.test), Some(&bounds))?,
        ))
    }
}

const FRACTION_EPS: f64 = 1e-9;

/// Seeded stratified split. Each class first receives `floor(frac * n_c)`
/// training rows; the slots left to reach `floor(frac * N)` go to the classes
/// with the largest fractional remainder, lower class index first on ties.
pub fn stratified_split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::invalid(format!(
            "train fraction {train_frac} outside [0, 1]"
        )));
    }
    let counts = ds.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::Stratification { class, count });
    }

    let exact: Vec<f64> = counts.iter().map(|&n| train_frac * n as f64).collect();
    let mut quota: Vec<usize> = exact
        .iter()
        .map(|&x| (x + FRACTION_EPS).floor() as usize)
        .collect();
    let target = (train_frac * ds.len() as f64 + FRACTION_EPS).floor() as usize;
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let remainder = |c: usize| {
        let r = exact[c] - quota[c] as f64;
        if r < FRACTION_EPS {
            0.0
        } else {
            r
        }
    };
    order.sort_by(|&a, &b| {
        let (ra, rb) = (remainder(a), remainder(b));
        if (ra - rb).abs() <= FRACTION_EPS {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &c in order.iter().take(target.saturating_sub(assigned)) {
        quota[c] = (quota[c] + 1).min(counts[c]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, &k) in quota.iter().enumerate() {
        let mut rows: Vec<usize> = (0..ds.len()).filter(|&r| ds.labels[r] == class).collect();
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let test_counts = counts.iter().zip(&quota).map(|(n, k)| n - k).collect();
    Ok(Split {
        train,
        test,
        seed,
        train_counts: quota,
        test_counts,
    })
}
