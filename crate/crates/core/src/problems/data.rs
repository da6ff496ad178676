use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense features (`M × D`) with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data(format!("label {bad} is not -1 or +1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Two unit-variance Gaussian clusters centred at `±(separation/2)·u` for a
/// random unit vector `u`. Even rows are labelled +1, odd rows −1.
pub fn make_synthetic_blobs(d: usize, m: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::InvalidConfig("blobs need D >= 1".into()));
    }
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "blobs need an even sample count >= 2, got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut u = DVector::from_fn(d, |_, _| normal());
    while u.norm() == 0.0 {
        u = DVector::from_fn(d, |_, _| normal());
    }
    u /= u.norm();
    let labels: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut features = DMatrix::zeros(m, d);
    for i in 0..m {
        let shift = 0.5 * separation * labels[i];
        for j in 0..d {
            features[(i, j)] = shift * u[j] + normal();
        }
    }
    Dataset::new(features, labels)
}

/// Reads a dense CSV with one sample per row and the label in the last
/// column. Labels may be `{−1, +1}` or `{0, 1}`.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Data(format!(
                            "{} record {}: {field:?} is not a finite number",
                            path.display(),
                            line + 1
                        ))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() < 2 {
            return Err(Error::Data(format!(
                "{} record {}: need at least one feature and a label",
                path.display(),
                line + 1
            )));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let d = rows[0].len() - 1;
    let raw: Vec<f64> = rows.iter().map(|r| r[d]).collect();
    let zero_one = raw.iter().all(|&y| y == 0.0 || y == 1.0);
    let labels = raw
        .iter()
        .map(|&y| if zero_one { 2.0 * y - 1.0 } else { y })
        .collect();
    let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Dataset::new(features, labels)
}
