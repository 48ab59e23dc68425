//! Pixel-level evaluation: global accuracy, mean per-class recall, and the
//! row-normalized confusion matrix. Void ground-truth pixels never count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{LabelMap, VOID};

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Correct pixels over all evaluated pixels.
    pub global_accuracy: f64,
    /// Mean recall over classes with ground-truth support.
    pub class_accuracy: f64,
    /// Per-class recall; `None` when the class never appears in ground truth.
    pub per_class_recall: Vec<Option<f64>>,
    /// Raw pixel counts, ground truth in rows, predictions in columns.
    pub confusion_counts: Vec<Vec<u64>>,
    /// Row-normalized confusion; unsupported rows stay all-zero.
    pub confusion: Vec<Vec<f64>>,
    /// Evaluated (non-void) pixel total.
    pub evaluated_pixels: u64,
}

impl Metrics {
    /// Ground-truth pixel count per class.
    pub fn support(&self, class_id: usize) -> u64 {
        self.confusion_counts[class_id].iter().sum()
    }

    /// Renders the metrics table printed by `evaluate`.
    pub fn format_table(&self, class_names: &[String]) -> String {
        let mut out = String::new();
        out.push_str(&format!("global accuracy  {:.4}\n", self.global_accuracy));
        out.push_str(&format!("class accuracy   {:.4}\n", self.class_accuracy));
        out.push_str("class            recall   support\n");
        for (c, recall) in self.per_class_recall.iter().enumerate() {
            let name = class_names.get(c).map(String::as_str).unwrap_or("?");
            match recall {
                Some(r) => {
                    out.push_str(&format!("{name:<16} {r:.4}  {:>8}\n", self.support(c)));
                }
                None => out.push_str(&format!("{name:<16}      -         0\n")),
            }
        }
        out
    }

    /// Writes the row-normalized confusion matrix as CSV.
    pub fn write_confusion_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(writer, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Scores predictions against ground truth over a set of paired label maps.
pub fn evaluate(
    predicted: &[LabelMap],
    truth: &[LabelMap],
    class_count: usize,
) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid_input(format!(
            "{} predictions for {} ground-truth maps",
            predicted.len(),
            truth.len()
        )));
    }
    if class_count == 0 {
        return Err(Error::invalid_input("class count must be positive"));
    }
    let mut counts = vec![vec![0u64; class_count]; class_count];
    for (i, (pred, gt)) in predicted.iter().zip(truth).enumerate() {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::invalid_input(format!(
                "pair {i}: prediction is {}x{}, ground truth {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        for (&p, &t) in pred.labels().iter().zip(gt.labels()) {
            if t == VOID {
                continue;
            }
            if p == VOID || p as usize >= class_count {
                return Err(Error::invalid_input(format!(
                    "pair {i}: predicted label {p} outside [0, {class_count})"
                )));
            }
            counts[t as usize][p as usize] += 1;
        }
    }
    let evaluated: u64 = counts.iter().flatten().sum();
    if evaluated == 0 {
        return Err(Error::insufficient_data(
            "no non-void ground-truth pixels to evaluate",
        ));
    }
    let correct: u64 = (0..class_count).map(|c| counts[c][c]).sum();
    let mut per_class_recall = Vec::with_capacity(class_count);
    let mut confusion = vec![vec![0.0f64; class_count]; class_count];
    let mut recall_sum = 0.0;
    let mut supported = 0usize;
    for c in 0..class_count {
        let row_total: u64 = counts[c].iter().sum();
        if row_total == 0 {
            per_class_recall.push(None);
            continue;
        }
        for p in 0..class_count {
            confusion[c][p] = counts[c][p] as f64 / row_total as f64;
        }
        let recall = counts[c][c] as f64 / row_total as f64;
        per_class_recall.push(Some(recall));
        recall_sum += recall;
        supported += 1;
    }
    Ok(Metrics {
        global_accuracy: correct as f64 / evaluated as f64,
        class_accuracy: recall_sum / supported as f64,
        per_class_recall,
        confusion_counts: counts,
        confusion,
        evaluated_pixels: evaluated,
    })
}
