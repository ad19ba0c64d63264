//! Tabular data container, CSV ingestion, rare-feature filtering, and the
//! class-balanced train/test split.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An n x p numeric feature table with binary labels.
///
/// Values are stored row-major. Every entry is finite, every label is 0 or 1,
/// and feature names are pairwise distinct; constructors enforce this.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    label_name: String,
}

impl Dataset {
    pub fn new(
        values: Vec<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        label_name: String,
    ) -> Result<Self> {
        let p = feature_names.len();
        let n = labels.len();
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite feature value {bad}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::LabelOutOfRange {
                row: labels.iter().position(|y| y == bad).unwrap() + 1,
                value: bad.to_string(),
            });
        }
        for (i, name) in feature_names.iter().enumerate() {
            if feature_names[..i].contains(name) {
                return Err(Error::DuplicateFeatureName(name.clone()));
            }
        }
        Ok(Self {
            n,
            p,
            values,
            labels,
            feature_names,
            label_name,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    /// Row `d` as a slice of length p.
    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.p..(d + 1) * self.p]
    }

    pub fn value(&self, d: usize, i: usize) -> f64 {
        self.values[d * self.p + i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, d: usize) -> u8 {
        self.labels[d]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    /// Fraction of rows with label 1.
    pub fn base_rate(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.n as f64
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// Column `i` collected into a vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|d| self.value(d, i)).collect()
    }

    /// Population standard deviation of column `i`.
    pub fn column_std(&self, i: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mean = (0..self.n).map(|d| self.value(d, i)).sum::<f64>() / self.n as f64;
        let ss = (0..self.n)
            .map(|d| {
                let c = self.value(d, i) - mean;
                c * c
            })
            .sum::<f64>();
        (ss / self.n as f64).sqrt()
    }

    /// New dataset containing `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        let mut labels = Vec::with_capacity(rows.len());
        for &d in rows {
            values.extend_from_slice(self.row(d));
            labels.push(self.labels[d]);
        }
        Dataset {
            n: rows.len(),
            p: self.p,
            values,
            labels,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// New dataset keeping only the feature columns in `keep` (order preserved).
    pub fn select_columns(&self, keep: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.n * keep.len());
        for d in 0..self.n {
            let row = self.row(d);
            for &i in keep {
                values.push(row[i]);
            }
        }
        Dataset {
            n: self.n,
            p: keep.len(),
            values,
            labels: self.labels.clone(),
            feature_names: keep.iter().map(|&i| self.feature_names[i].clone()).collect(),
            label_name: self.label_name.clone(),
        }
    }

    /// Write the table back out as CSV (header row, label column last).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(|s| s.as_str()).collect();
        header.push(&self.label_name);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.p + 1);
        for d in 0..self.n {
            record.clear();
            for v in self.row(d) {
                record.push(format_value(*v));
            }
            record.push(self.labels[d].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<writer>".into(),
            source: e,
        })?;
        Ok(())
    }
}

fn format_value(v: f64) -> String {
    // Shortest round-trip representation; integers print without ".0".
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must be strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 2.0 / 3.0,
            seed: 0,
        }
    }
}

/// Parse a CSV file into a [`Dataset`].
///
/// The first row is the header; `label_column` names the 0/1 outcome column,
/// which is removed from the feature set. Row order is preserved.
pub fn load_table(path: &Path, label_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    load_table_from_reader(file, label_column)
}

pub fn load_table_from_reader<R: std::io::Read>(reader: R, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut feature_names: Vec<String> = Vec::with_capacity(header.len().saturating_sub(1));
    for (i, name) in header.iter().enumerate() {
        if i == label_idx {
            continue;
        }
        let name = name.to_string();
        if feature_names.contains(&name) {
            return Err(Error::DuplicateFeatureName(name));
        }
        feature_names.push(name);
    }
    let p = feature_names.len();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 1; // 1-based data row for error reporting
        if record.len() != header.len() {
            return Err(Error::InvalidConfig(format!(
                "data row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let y: f64 = cell.parse().map_err(|_| Error::LabelOutOfRange {
                    row,
                    value: cell.to_string(),
                })?;
                if y == 0.0 {
                    labels.push(0);
                } else if y == 1.0 {
                    labels.push(1);
                } else {
                    return Err(Error::LabelOutOfRange {
                        row,
                        value: cell.to_string(),
                    });
                }
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                    row,
                    column: header[col].to_string(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumericCell {
                        row,
                        column: header[col].to_string(),
                        value: cell.to_string(),
                    });
                }
                values.push(v);
            }
        }
    }

    debug_assert_eq!(values.len(), labels.len() * p);
    Dataset::new(values, labels, feature_names, label_column.to_string())
}

/// Drop features whose nonzero prevalence falls below `min_prevalence`.
///
/// Keeps exactly the features with (nonzero entries / n) >= min_prevalence,
/// preserving column order. Returns the filtered dataset and the dropped
/// feature names.
pub fn filter_rare_features(ds: &Dataset, min_prevalence: f64) -> Result<(Dataset, Vec<String>)> {
    if !(0.0..=1.0).contains(&min_prevalence) {
        return Err(Error::InvalidConfig(format!(
            "min_prevalence must be in [0,1], got {min_prevalence}"
        )));
    }
    let n = ds.n_rows();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..ds.n_features() {
        let nonzero = (0..n).filter(|&d| ds.value(d, i) != 0.0).count();
        let prevalence = if n == 0 { 0.0 } else { nonzero as f64 / n as f64 };
        if prevalence >= min_prevalence {
            keep.push(i);
        } else {
            dropped.push(ds.feature_names()[i].clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    Ok((ds.select_columns(&keep), dropped))
}

/// Seeded train/test partition with a class-balanced test set.
///
/// Rows are shuffled uniformly; round(train_fraction * n) go to training.
/// Within the hold-out the majority class is under-sampled without
/// replacement until the class counts match. Discarded hold-out rows are
/// dropped. Deterministic given the seed.
pub fn split_balanced(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be strictly between 0 and 1, got {}",
            spec.train_fraction
        )));
    }
    let n = ds.n_rows();
    if n < 6 {
        return Err(Error::InvalidConfig(format!(
            "split requires at least 6 rows, got {n}"
        )));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_train = (spec.train_fraction * n as f64).round() as usize;
    let n_train = n_train.min(n);
    let mut train_rows: Vec<usize> = order[..n_train].to_vec();
    let holdout: Vec<usize> = order[n_train..].to_vec();

    let mut pos: Vec<usize> = holdout.iter().copied().filter(|&d| ds.label(d) == 1).collect();
    let mut neg: Vec<usize> = holdout.iter().copied().filter(|&d| ds.label(d) == 0).collect();
    if pos.is_empty() {
        return Err(Error::CannotBalanceTestSet(1));
    }
    if neg.is_empty() {
        return Err(Error::CannotBalanceTestSet(0));
    }

    // Under-sample the majority class down to the minority count.
    let target = pos.len().min(neg.len());
    let majority = if pos.len() > neg.len() { &mut pos } else { &mut neg };
    majority.shuffle(&mut rng);
    majority.truncate(target);

    let mut test_rows: Vec<usize> = pos.into_iter().chain(neg).collect();
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    Ok((ds.select_rows(&train_rows), ds.select_rows(&test_rows)))
}
