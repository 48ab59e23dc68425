//! Three-state feature discretization around per-feature train statistics.
//!
//! A value more than one sample standard deviation below the train mean maps
//! to -2, more than one above to +2, anything else (including every value of
//! a zero-variance feature) to 0. Thresholds are fitted once on training data
//! and reused verbatim at test time.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Per-feature mean and sample std learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizeThresholds {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl DiscretizeThresholds {
    /// Fits thresholds on a training matrix; callers supply >= 2 rows.
    pub fn fit(matrix: &FeatureMatrix) -> Self {
        let n = matrix.rows();
        debug_assert!(n >= 2, "thresholds need at least 2 samples");
        let d = matrix.feature_dim();
        let mut means = vec![0.0f64; d];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(matrix.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut stds = vec![0.0f64; d];
        if n >= 2 {
            for i in 0..n {
                for (s, (v, m)) in stds.iter_mut().zip(matrix.row(i).iter().zip(&means)) {
                    *s += (v - m) * (v - m);
                }
            }
            // sample (n-1) denominator
            stds.iter_mut().for_each(|s| *s = (*s / (n as f64 - 1.0)).sqrt());
        }
        DiscretizeThresholds { means, stds }
    }

    /// Maps every entry to {-2, 0, +2} using the stored thresholds.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<DiscretizedMatrix> {
        if matrix.feature_dim() != self.means.len() {
            return Err(Error::invalid_input(format!(
                "matrix has {} features, thresholds were fit on {}",
                matrix.feature_dim(),
                self.means.len()
            )));
        }
        let d = matrix.feature_dim();
        let mut data = Vec::with_capacity(matrix.rows() * d);
        for i in 0..matrix.rows() {
            for (f, &v) in matrix.row(i).iter().enumerate() {
                let state = if self.stds[f] == 0.0 {
                    0
                } else if v < self.means[f] - self.stds[f] {
                    -2
                } else if v > self.means[f] + self.stds[f] {
                    2
                } else {
                    0
                };
                data.push(state);
            }
        }
        Ok(DiscretizedMatrix {
            feature_dim: d,
            data,
        })
    }

    /// Persists as CSV `index,mean,std`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(writer, "index,mean,std").map_err(io)?;
        for (i, (m, s)) in self.means.iter().zip(&self.stds).enumerate() {
            writeln!(writer, "{i},{m},{s}").map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if idx == 0 || line.trim().is_empty() {
                continue; // header
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::parse(path, idx + 1, "expected index,mean,std"));
            }
            let parse = |t: &str| -> Result<f64> {
                t.trim()
                    .parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad number {t:?}")))
            };
            means.push(parse(parts[1])?);
            stds.push(parse(parts[2])?);
        }
        if means.is_empty() {
            return Err(Error::parse(path, 1, "no thresholds"));
        }
        Ok(DiscretizeThresholds { means, stds })
    }
}

/// Matrix of {-2, 0, +2} states, row-major like the source features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretizedMatrix {
    feature_dim: usize,
    data: Vec<i8>,
}

impl DiscretizedMatrix {
    /// Wraps row-major states directly, validating the {-2, 0, 2} domain.
    pub fn from_states(feature_dim: usize, data: Vec<i8>) -> Result<Self> {
        if feature_dim == 0 || data.len() % feature_dim != 0 {
            return Err(Error::invalid_input(format!(
                "{} states do not tile rows of width {feature_dim}",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|s| ![-2, 0, 2].contains(*s)) {
            return Err(Error::invalid_input(format!(
                "state {bad} outside {{-2, 0, 2}}"
            )));
        }
        Ok(DiscretizedMatrix { feature_dim, data })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn rows(&self) -> usize {
        if self.feature_dim == 0 {
            0
        } else {
            self.data.len() / self.feature_dim
        }
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Copies feature column `f` out of the row-major storage.
    pub fn column(&self, f: usize) -> Vec<i8> {
        (0..self.rows()).map(|i| self.row(i)[f]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: &[Vec<f64>]) -> FeatureMatrix {
        let rows = columns[0].len();
        let mut m = FeatureMatrix::new(columns.len());
        for i in 0..rows {
            let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            m.push_row(&row);
        }
        m
    }

    #[test]
    fn constant_column_is_all_zero() {
        let m = matrix(&[vec![5.0; 6]]);
        let t = DiscretizeThresholds::fit(&m);
        let d = t.apply(&m).unwrap();
        assert!(d.column(0).iter().all(|&s| s == 0));
    }

    #[test]
    fn outlier_column_matches_hand_computation() {
        // mean 20, sample std sqrt((4*400 + 6400)/4) = sqrt(2000) ~ 44.72:
        // only the 100 exceeds mean + std
        let m = matrix(&[vec![0.0, 0.0, 0.0, 0.0, 100.0]]);
        let t = DiscretizeThresholds::fit(&m);
        assert!((t.means[0] - 20.0).abs() < 1e-12);
        assert!((t.stds[0] - 2000.0f64.sqrt()).abs() < 1e-9);
        assert_eq!(t.apply(&m).unwrap().column(0), vec![0, 0, 0, 0, 2]);
    }

    #[test]
    fn all_states_in_domain() {
        let m = matrix(&[
            (0..20).map(|i| (i as f64 * 13.7) % 5.0).collect(),
            (0..20).map(|i| (i as f64).sin() * 10.0).collect(),
        ]);
        let t = DiscretizeThresholds::fit(&m);
        let d = t.apply(&m).unwrap();
        for i in 0..d.rows() {
            assert!(d.row(i).iter().all(|s| [-2, 0, 2].contains(s)));
        }
    }

    #[test]
    fn reapplication_is_idempotent() {
        let m = matrix(&[(0..30).map(|i| (i * i) as f64 * 0.3).collect()]);
        let t = DiscretizeThresholds::fit(&m);
        let a = t.apply(&m).unwrap();
        let b = t.apply(&m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thresholds_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("thresholds.csv");
        let m = matrix(&[vec![0.0, 1.0, 2.0], vec![5.0, 5.0, 8.0]]);
        let t = DiscretizeThresholds::fit(&m);
        t.save(&path).unwrap();
        let back = DiscretizeThresholds::load(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn mismatched_width_is_rejected() {
        let m = matrix(&[vec![0.0, 1.0]]);
        let t = DiscretizeThresholds::fit(&m);
        let wide = matrix(&[vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert!(t.apply(&wide).is_err());
    }
}
