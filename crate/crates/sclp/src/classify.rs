//! One-vs-all probabilistic classification on class-specific feature subsets.
//!
//! Each class gets an L2-regularized logistic regression over its selected
//! features, standardized to zero mean / unit variance on the training rows.
//! Training is full-batch gradient descent with Nesterov momentum and
//! gradient-based restarts, stopping at gradient norm `tolerance` or after
//! `max_iterations` rounds; everything is deterministic for a fixed seed.
//! A class with no positive training rows degrades to a constant predictor at
//! its prior frequency (zero) with a warning, rather than failing the run.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SelectedFeatures};

/// Classifier hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    /// L2 penalty on the weights (not the bias).
    pub lambda: f64,
    pub max_iterations: usize,
    /// Gradient-norm stopping threshold.
    pub tolerance: f64,
    /// Recorded for artifact provenance; training itself has no randomness
    /// (zero initialization).
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            lambda: 1e-3,
            max_iterations: 5000,
            tolerance: 1e-6,
            seed: 42,
        }
    }
}

/// A trained binary one-vs-all model for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassModel {
    pub class_id: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Standardization parameters over the class's selected columns.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Prior-frequency fallback for classes with no positive training rows;
    /// when set, prediction returns this constant.
    pub constant: Option<f64>,
}

impl BinaryClassModel {
    /// Probability for one already-selected, unstandardized input row.
    pub fn predict(&self, selected_values: &[f64]) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        debug_assert_eq!(selected_values.len(), self.weights.len());
        let mut z = self.bias;
        for i in 0..self.weights.len() {
            z += self.weights[i] * (selected_values[i] - self.means[i]) / self.stds[i];
        }
        sigmoid(z)
    }

    /// Persists as text: `class lambda seed`, means, stds, weights, bias, and
    /// a trailing constant line for fallback models.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(writer, "{} {} {}", self.class_id, self.lambda, self.seed).map_err(io)?;
        for line in [&self.means, &self.stds, &self.weights] {
            let parts: Vec<String> = line.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", parts.join(" ")).map_err(io)?;
        }
        writeln!(writer, "{}", self.bias).map_err(io)?;
        if let Some(c) = self.constant {
            writeln!(writer, "{c}").map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let lines: Vec<String> = reader
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        if lines.len() < 5 {
            return Err(Error::parse(path, 1, "truncated model file"));
        }
        let header: Vec<&str> = lines[0].split_whitespace().collect();
        if header.len() != 3 {
            return Err(Error::parse(path, 1, "expected header 'class lambda seed'"));
        }
        let bad = |line: usize, what: &str| Error::parse(path, line, format!("bad {what}"));
        let class_id: usize = header[0].parse().map_err(|_| bad(1, "class id"))?;
        let lambda: f64 = header[1].parse().map_err(|_| bad(1, "lambda"))?;
        let seed: u64 = header[2].parse().map_err(|_| bad(1, "seed"))?;
        let parse_vec = |idx: usize| -> Result<Vec<f64>> {
            lines[idx]
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(idx + 1, "number")))
                .collect()
        };
        let means = parse_vec(1)?;
        let stds = parse_vec(2)?;
        let weights = parse_vec(3)?;
        let bias: f64 = lines[4].trim().parse().map_err(|_| bad(5, "bias"))?;
        let constant = match lines.get(5).map(|l| l.trim()).filter(|l| !l.is_empty()) {
            Some(l) => Some(l.parse::<f64>().map_err(|_| bad(6, "constant"))?),
            None => None,
        };
        if means.len() != stds.len() || means.len() != weights.len() {
            return Err(Error::parse(path, 2, "means/stds/weights lengths differ"));
        }
        let model = BinaryClassModel {
            class_id,
            lambda,
            seed,
            means,
            stds,
            weights,
            bias,
            constant,
        };
        let finite = model.means.iter().chain(&model.stds).chain(&model.weights);
        if finite.clone().any(|v| !v.is_finite()) || !model.bias.is_finite() {
            return Err(Error::parse(path, 1, "non-finite model parameter"));
        }
        Ok(model)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy loss with L2 penalty, and its gradient in (weights, bias).
///
/// `rows` is row-major `n x d`, `targets` are 0/1. Exposed so the gradient can
/// be verified against finite differences.
pub fn logistic_loss_and_grad(
    rows: &[f64],
    d: usize,
    targets: &[f64],
    weights: &[f64],
    bias: f64,
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = targets.len();
    assert!(n > 0 && rows.len() == n * d && weights.len() == d);
    let mut loss = 0.0;
    let mut grad_w = vec![0.0f64; d];
    let mut grad_b = 0.0;
    for (j, &y) in targets.iter().enumerate() {
        let x = &rows[j * d..(j + 1) * d];
        let mut z = bias;
        for i in 0..d {
            z += weights[i] * x[i];
        }
        // stable form of -y ln s(z) - (1-y) ln(1 - s(z))
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let residual = sigmoid(z) - y;
        for i in 0..d {
            grad_w[i] += residual * x[i];
        }
        grad_b += residual;
    }
    loss /= n as f64;
    grad_b /= n as f64;
    for i in 0..d {
        grad_w[i] /= n as f64;
        grad_w[i] += lambda * weights[i];
        loss += 0.5 * lambda * weights[i] * weights[i];
    }
    (loss, grad_w, grad_b)
}

/// Minimizes the logistic objective with Nesterov-accelerated full-batch
/// gradient descent (fixed 1/L step from the standard curvature bound,
/// gradient-based restarts). Returns (weights, bias).
fn fit_logistic(
    rows: &[f64],
    d: usize,
    targets: &[f64],
    params: &TrainParams,
) -> (Vec<f64>, f64) {
    let n = targets.len();
    // L <= max eigenvalue of the Hessian <= (1/4n) sum ||x_j||^2 (+1 for bias) + lambda
    let sum_sq: f64 = rows.iter().map(|v| v * v).sum::<f64>() + n as f64;
    let lip = sum_sq / (4.0 * n as f64) + params.lambda;
    let step = 1.0 / lip;

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut w_prev = w.clone();
    let mut b_prev = b;
    let mut momentum = 0.0f64;
    for iter in 0..params.max_iterations {
        // lookahead point
        let mut yw: Vec<f64> = (0..d).map(|i| w[i] + momentum * (w[i] - w_prev[i])).collect();
        let yb = b + momentum * (b - b_prev);
        let (_, grad_w, grad_b) = logistic_loss_and_grad(rows, d, targets, &yw, yb, params.lambda);

        let grad_norm =
            (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm < params.tolerance {
            log::debug!("logistic fit converged after {iter} iterations");
            let (_, gw, gb) = logistic_loss_and_grad(rows, d, targets, &w, b, params.lambda);
            let full = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
            if full < params.tolerance {
                break;
            }
        }

        w_prev.copy_from_slice(&w);
        b_prev = b;
        for i in 0..d {
            yw[i] -= step * grad_w[i];
        }
        w.copy_from_slice(&yw);
        b = yb - step * grad_b;

        // restart momentum when the update fights the gradient direction
        let mut along = grad_b * (b - b_prev);
        for i in 0..d {
            along += grad_w[i] * (w[i] - w_prev[i]);
        }
        momentum = if along > 0.0 {
            0.0
        } else {
            (iter as f64) / (iter as f64 + 3.0)
        };
    }
    (w, b)
}

/// Trains one binary model per class on standardized selected features.
///
/// `labels[j]` is the class id of feature row `j`; void rows must be filtered
/// out upstream. Classes without positives get the constant fallback.
pub fn train_one_vs_all(
    features: &FeatureMatrix,
    labels: &[usize],
    class_count: usize,
    selected: &SelectedFeatures,
    params: &TrainParams,
) -> Result<Vec<BinaryClassModel>> {
    if features.rows() != labels.len() {
        return Err(Error::invalid_input(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::insufficient_data("no training rows"));
    }
    if selected.per_class.len() != class_count {
        return Err(Error::invalid_input(format!(
            "{} selected-feature lists for {class_count} classes",
            selected.per_class.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::invalid_input(format!(
            "label {bad} outside [0, {class_count})"
        )));
    }
    let n = labels.len();
    (0..class_count)
        .into_par_iter()
        .map(|class_id| {
            let columns = &selected.per_class[class_id];
            if let Some(&bad) = columns.iter().find(|&&c| c >= features.feature_dim()) {
                return Err(Error::invalid_input(format!(
                    "selected feature {bad} outside the {}-dim layout",
                    features.feature_dim()
                )));
            }
            let positives = labels.iter().filter(|&&l| l == class_id).count();
            if positives == 0 {
                log::warn!(
                    "class {class_id} has no positive training rows; \
                     falling back to its prior frequency (0)"
                );
                return Ok(BinaryClassModel {
                    class_id,
                    lambda: params.lambda,
                    seed: params.seed,
                    means: vec![0.0; columns.len()],
                    stds: vec![1.0; columns.len()],
                    weights: vec![0.0; columns.len()],
                    bias: 0.0,
                    constant: Some(0.0),
                });
            }

            // standardize the selected columns on the training rows
            let d = columns.len();
            let mut means = vec![0.0f64; d];
            for j in 0..n {
                let row = features.row(j);
                for (m, &c) in means.iter_mut().zip(columns) {
                    *m += row[c];
                }
            }
            means.iter_mut().for_each(|m| *m /= n as f64);
            let mut stds = vec![0.0f64; d];
            for j in 0..n {
                let row = features.row(j);
                for (s, (&c, m)) in stds.iter_mut().zip(columns.iter().zip(&means)) {
                    *s += (row[c] - m) * (row[c] - m);
                }
            }
            for s in &mut stds {
                *s = (*s / n as f64).sqrt();
                if *s == 0.0 {
                    *s = 1.0; // constant column: z-score pinned to 0
                }
            }

            let mut rows = Vec::with_capacity(n * d);
            for j in 0..n {
                let row = features.row(j);
                for i in 0..d {
                    rows.push((row[columns[i]] - means[i]) / stds[i]);
                }
            }
            let targets: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class_id { 1.0 } else { 0.0 })
                .collect();
            let (weights, bias) = fit_logistic(&rows, d, &targets, params);
            Ok(BinaryClassModel {
                class_id,
                lambda: params.lambda,
                seed: params.seed,
                means,
                stds,
                weights,
                bias,
                constant: None,
            })
        })
        .collect()
}

/// Applies every class model to one full-length feature row.
pub fn predict_proba(
    models: &[BinaryClassModel],
    feature_row: &[f64],
    selected: &SelectedFeatures,
) -> Result<Vec<f64>> {
    if models.len() != selected.per_class.len() {
        return Err(Error::invalid_input(format!(
            "{} models vs {} selected-feature lists",
            models.len(),
            selected.per_class.len()
        )));
    }
    let mut out = Vec::with_capacity(models.len());
    let mut buffer = Vec::new();
    for (model, columns) in models.iter().zip(&selected.per_class) {
        if columns.len() != model.weights.len() {
            return Err(Error::invalid_input(format!(
                "class {}: {} selected features vs {} weights",
                model.class_id,
                columns.len(),
                model.weights.len()
            )));
        }
        buffer.clear();
        for &c in columns {
            let v = feature_row.get(c).ok_or_else(|| {
                Error::invalid_input(format!(
                    "feature row of length {} lacks selected index {c}",
                    feature_row.len()
                ))
            })?;
            buffer.push(*v);
        }
        out.push(model.predict(&buffer));
    }
    Ok(out)
}

/// Argmax class and its probability; ties go to the lowest class id.
pub fn most_probable_class(probabilities: &[f64]) -> Result<(usize, f64)> {
    if probabilities.is_empty() {
        return Err(Error::invalid_input("empty probability vector"));
    }
    let mut best = 0usize;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > probabilities[best] {
            best = i;
        }
    }
    Ok((best, probabilities[best]))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated 3-feature clusters, one per class.
    fn separable() -> (FeatureMatrix, Vec<usize>, SelectedFeatures) {
        let mut m = FeatureMatrix::new(5);
        let mut labels = Vec::new();
        for i in 0..30 {
            let jitter = (i % 7) as f64 * 0.1;
            // columns 1 and 3 are noise shared by both classes
            m.push_row(&[-3.0 - jitter, 0.5, -2.0 + jitter, 9.9, -4.0]);
            labels.push(0);
            m.push_row(&[3.0 + jitter, 0.5, 2.0 - jitter, 9.9, 4.0]);
            labels.push(1);
        }
        let selected = SelectedFeatures {
            per_class: vec![vec![0, 2, 4], vec![0, 2, 4]],
        };
        (m, labels, selected)
    }

    #[test]
    fn separable_toy_reaches_perfect_training_accuracy() {
        let (m, labels, selected) = separable();
        let models = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        let mut correct = 0;
        for j in 0..m.rows() {
            let p = predict_proba(&models, m.row(j), &selected).unwrap();
            let (c, _) = most_probable_class(&p).unwrap();
            correct += usize::from(c == labels[j]);
            // per-class binary decisions are also perfect
            assert_eq!(p[labels[j]] > 0.5, true, "row {j}: {p:?}");
            assert!(p[1 - labels[j]] < 0.5);
        }
        assert_eq!(correct, m.rows());
    }

    #[test]
    fn heldout_positive_scores_high() {
        let (m, labels, selected) = separable();
        let models = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        let heldout = [3.2f64, 0.5, 2.2, 9.9, 4.1];
        let p = predict_proba(&models, &heldout, &selected).unwrap();
        assert!(p[1] > 0.9, "held-out positive scored {}", p[1]);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (m, labels, selected) = separable();
        let a = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        let b = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_positive_class_predicts_above_half() {
        let mut m = FeatureMatrix::new(2);
        for i in 0..10 {
            m.push_row(&[i as f64, 1.0]);
        }
        let labels = vec![1usize; 10];
        let selected = SelectedFeatures {
            per_class: vec![vec![0], vec![0]],
        };
        let models = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        // class 0 has no positives: constant fallback at its prior frequency
        assert_eq!(models[0].constant, Some(0.0));
        for j in 0..m.rows() {
            let p = predict_proba(&models, m.row(j), &selected).unwrap();
            assert!(p[1] > 0.5, "row {j}: {}", p[1]);
            assert_eq!(p[0], 0.0);
        }
    }

    #[test]
    fn zero_model_predicts_exactly_half() {
        let model = BinaryClassModel {
            class_id: 0,
            lambda: 1e-3,
            seed: 42,
            means: vec![0.0; 3],
            stds: vec![1.0; 3],
            weights: vec![0.0; 3],
            bias: 0.0,
            constant: None,
        };
        assert_eq!(model.predict(&[5.0, -2.0, 0.1]), 0.5);
    }

    #[test]
    fn most_probable_class_picks_argmax_with_low_tie() {
        assert_eq!(most_probable_class(&[0.1, 0.7, 0.2]).unwrap(), (1, 0.7));
        assert_eq!(most_probable_class(&[0.4, 0.4]).unwrap(), (0, 0.4));
        assert_eq!(most_probable_class(&[0.25; 4]).unwrap(), (0, 0.25));
        assert!(most_probable_class(&[]).is_err());
    }

    #[test]
    fn predictions_survive_joint_feature_rescaling() {
        let (m, labels, selected) = separable();
        let scale = 37.5;
        let mut scaled = FeatureMatrix::new(5);
        for j in 0..m.rows() {
            let row: Vec<f64> = m.row(j).iter().map(|v| v * scale).collect();
            scaled.push_row(&row);
        }
        let a = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        let b = train_one_vs_all(&scaled, &labels, 2, &selected, &TrainParams::default()).unwrap();
        for j in 0..m.rows() {
            let pa = predict_proba(&a, m.row(j), &selected).unwrap();
            let row_b: Vec<f64> = m.row(j).iter().map(|v| v * scale).collect();
            let pb = predict_proba(&b, &row_b, &selected).unwrap();
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() < 1e-9, "row {j}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        // deterministic congruential stream for reproducible instances
        let mut state = 0x853C49E6748FEA9Bu64;
        let mut next_f = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for trial in 0..20 {
            let n = 5 + (trial % 5) * 5;
            let d = 2 + trial % 4;
            let rows: Vec<f64> = (0..n * d).map(|_| next_f() * 3.0).collect();
            let targets: Vec<f64> = (0..n).map(|_| f64::from(next_f() > 0.0)).collect();
            let weights: Vec<f64> = (0..d).map(|_| next_f()).collect();
            let bias = next_f();
            let lambda = 1e-3;
            let (_, grad_w, grad_b) =
                logistic_loss_and_grad(&rows, d, &targets, &weights, bias, lambda);

            let h = 1e-6;
            let mut fd = Vec::with_capacity(d + 1);
            for i in 0..d {
                let mut wp = weights.clone();
                let mut wm = weights.clone();
                wp[i] += h;
                wm[i] -= h;
                let (lp, _, _) = logistic_loss_and_grad(&rows, d, &targets, &wp, bias, lambda);
                let (lm, _, _) = logistic_loss_and_grad(&rows, d, &targets, &wm, bias, lambda);
                fd.push((lp - lm) / (2.0 * h));
            }
            let (lp, _, _) = logistic_loss_and_grad(&rows, d, &targets, &weights, bias + h, lambda);
            let (lm, _, _) = logistic_loss_and_grad(&rows, d, &targets, &weights, bias - h, lambda);
            fd.push((lp - lm) / (2.0 * h));

            let analytic: Vec<f64> = grad_w.iter().copied().chain([grad_b]).collect();
            let diff: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                diff / norm.max(1e-8) < 1e-5,
                "trial {trial}: relative error {}",
                diff / norm
            );
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("class_0.txt");
        let model = BinaryClassModel {
            class_id: 3,
            lambda: 1e-3,
            seed: 42,
            means: vec![0.5, -1.25],
            stds: vec![2.0, 0.125],
            weights: vec![1.0 / 3.0, -7.0],
            bias: 0.75,
            constant: None,
        };
        model.save(&path).unwrap();
        assert_eq!(BinaryClassModel::load(&path).unwrap(), model);

        let fallback = BinaryClassModel {
            constant: Some(0.0),
            ..model
        };
        fallback.save(&path).unwrap();
        assert_eq!(BinaryClassModel::load(&path).unwrap(), fallback);
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        let (m, labels, selected) = separable();
        assert!(train_one_vs_all(&m, &labels[..5], 2, &selected, &TrainParams::default()).is_err());
        let models = train_one_vs_all(&m, &labels, 2, &selected, &TrainParams::default()).unwrap();
        assert!(predict_proba(&models, &[1.0, 2.0], &selected).is_err());
    }
}
