//! Row-normalized cosine feature-similarity matrix.

use std::io::Write;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// p x p nonnegative feature-similarity weights with zero diagonal.
///
/// Each row sums to 1 (within 1e-12) or is entirely zero. A zero row marks a
/// feature dissimilar to everything; its smoothing penalty degenerates to a
/// plain pull toward 0.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    p: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Identity-free uniform matrix, mainly for tests: every off-diagonal
    /// entry equals 1/(p-1).
    pub fn uniform(p: usize) -> Self {
        let mut entries = vec![0.0; p * p];
        if p > 1 {
            let w = 1.0 / (p - 1) as f64;
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        entries[i * p + j] = w;
                    }
                }
            }
        }
        Self { p, entries }
    }

    pub fn from_rows(p: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                actual: entries.len(),
            });
        }
        let m = Self { p, entries };
        m.check_invariants()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    /// S * w.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|i| self.row(i).iter().zip(w).map(|(s, wi)| s * wi).sum())
            .collect()
    }

    /// S^T * u.
    pub fn mul_vec_transposed(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (j, s) in self.row(i).iter().enumerate() {
                out[j] += s * ui;
            }
        }
        out
    }

    fn check_invariants(&self) -> Result<()> {
        for i in 0..self.p {
            if self.entry(i, i) != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "similarity diagonal must be zero at {i}"
                )));
            }
            let row = self.row(i);
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "similarity row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum != 0.0 && (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "similarity row {i} sums to {sum}, expected 0 or 1"
                )));
            }
        }
        Ok(())
    }

    /// Write the matrix as p x p CSV, row-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.p {
            let record: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<writer>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Cosine similarity between raw data columns, clamped to be nonnegative,
/// diagonal zeroed, then each row normalized to sum to 1 (rows with no
/// positive entry stay zero).
pub fn cosine_similarity_matrix(ds: &Dataset) -> Result<SimilarityMatrix> {
    let p = ds.n_features();
    if p < 2 {
        return Err(Error::InvalidConfig(format!(
            "similarity needs at least 2 features, got {p}"
        )));
    }
    let n = ds.n_rows();

    let mut norms = vec![0.0; p];
    for (i, norm) in norms.iter_mut().enumerate() {
        let mut s = 0.0;
        for d in 0..n {
            let v = ds.value(d, i);
            s += v * v;
        }
        *norm = s.sqrt();
    }

    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        for j in (i + 1)..p {
            let raw = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let mut dot = 0.0;
                for d in 0..n {
                    dot += ds.value(d, i) * ds.value(d, j);
                }
                dot / (norms[i] * norms[j])
            };
            let clamped = raw.max(0.0);
            entries[i * p + j] = clamped;
            entries[j * p + i] = clamped;
        }
    }

    for i in 0..p {
        let row = &mut entries[i * p..(i + 1) * p];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }

    Ok(SimilarityMatrix { p, entries })
}
