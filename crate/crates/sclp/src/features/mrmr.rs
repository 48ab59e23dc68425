//! Minimum-redundancy maximum-relevance feature selection on discretized
//! features, driven by plug-in mutual information estimates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::DiscretizedMatrix;

/// Plug-in mutual information of two discrete columns, in bits.
///
/// Estimated from the joint empirical distribution with log base 2; exactly
/// 0.0 when either column is constant.
pub fn mutual_information(x: &[i8], y: &[i8]) -> f64 {
    assert!(!x.is_empty() && x.len() == y.len(), "columns must align");
    let n = x.len() as f64;
    let mut joint: BTreeMap<(i8, i8), u32> = BTreeMap::new();
    let mut mx: BTreeMap<i8, u32> = BTreeMap::new();
    let mut my: BTreeMap<i8, u32> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_insert(0) += 1;
        *mx.entry(a).or_insert(0) += 1;
        *my.entry(b).or_insert(0) += 1;
    }
    let mut mi = 0.0;
    for (&(a, b), &nab) in &joint {
        let pab = nab as f64 / n;
        let ratio = (nab as f64 * n) / (mx[&a] as f64 * my[&b] as f64);
        mi += pab * ratio.log2();
    }
    mi
}

/// Greedy MID selection: the first feature maximizes relevance MI(f, target);
/// each later pick maximizes relevance minus the mean MI against the already
/// selected set. Ties go to the lowest feature index. Stops early (returning
/// fewer than `count` indices) once every remaining feature has zero
/// relevance.
pub fn mrmr_select(states: &DiscretizedMatrix, target: &[i8], count: usize) -> Result<Vec<usize>> {
    let d = states.feature_dim();
    if d == 0 || states.rows() == 0 {
        return Err(Error::invalid_input("empty feature matrix"));
    }
    if states.rows() != target.len() {
        return Err(Error::invalid_input(format!(
            "{} rows of states vs {} targets",
            states.rows(),
            target.len()
        )));
    }
    let columns: Vec<Vec<i8>> = (0..d).map(|f| states.column(f)).collect();
    let relevance: Vec<f64> = columns.iter().map(|c| mutual_information(c, target)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(count.min(d));
    let mut in_set = vec![false; d];
    let mut redundancy_sum = vec![0.0f64; d];
    while selected.len() < count.min(d) {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..d {
            if in_set[f] {
                continue;
            }
            let score = if selected.is_empty() {
                relevance[f]
            } else {
                relevance[f] - redundancy_sum[f] / selected.len() as f64
            };
            if best.map_or(true, |(_, b)| score > b) {
                best = Some((f, score));
            }
        }
        let (pick, _) = best.expect("candidates remain");
        if relevance.iter().zip(&in_set).all(|(&r, &s)| s || r == 0.0) {
            log::info!(
                "mRMR stopped early at {} of {count} features: remaining relevance is zero",
                selected.len()
            );
            break;
        }
        in_set[pick] = true;
        selected.push(pick);
        for f in 0..d {
            if !in_set[f] {
                redundancy_sum[f] += mutual_information(&columns[f], &columns[pick]);
            }
        }
    }
    Ok(selected)
}

/// Per-class ordered feature index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedFeatures {
    pub per_class: Vec<Vec<usize>>,
}

impl SelectedFeatures {
    /// Persists as one line per class: `class_id: i1 i2 ... iK`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        for (class, indices) in self.per_class.iter().enumerate() {
            let list: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
            writeln!(writer, "{class}: {}", list.join(" ")).map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut per_class = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (class_part, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(path, idx + 1, "expected 'class_id: indices'"))?;
            let class: usize = class_part
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, "bad class id"))?;
            if class != per_class.len() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("class ids must be consecutive, got {class}"),
                ));
            }
            let indices: Vec<usize> = rest
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::parse(path, idx + 1, format!("bad index {t:?}")))
                })
                .collect::<Result<_>>()?;
            per_class.push(indices);
        }
        if per_class.is_empty() {
            return Err(Error::parse(path, 1, "no selected features"));
        }
        Ok(SelectedFeatures { per_class })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a state matrix from columns of {-2, 0, 2} values.
    fn states_from_columns(columns: &[Vec<i8>]) -> DiscretizedMatrix {
        let rows = columns[0].len();
        let mut data = Vec::with_capacity(rows * columns.len());
        for i in 0..rows {
            for c in columns {
                data.push(c[i]);
            }
        }
        DiscretizedMatrix::from_states(columns.len(), data).unwrap()
    }

    #[test]
    fn identical_balanced_binaries_share_one_bit() {
        let x = [0i8, 0, 1, 1];
        assert!((mutual_information(&x, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_has_zero_information() {
        let x = [3i8, 3, 3, 3];
        let y = [0i8, 1, 0, 1];
        assert_eq!(mutual_information(&x, &y), 0.0);
        assert_eq!(mutual_information(&y, &x), 0.0);
    }

    #[test]
    fn independent_columns_have_zero_information() {
        let x = [0i8, 0, 1, 1];
        let y = [0i8, 1, 0, 1];
        assert!(mutual_information(&x, &y).abs() < 1e-12);
    }

    #[test]
    fn mi_is_symmetric() {
        let x = [0i8, 2, 2, 0, -2, 2, 0, 0];
        let y = [1i8, 1, 0, 0, 1, 0, 1, 0];
        assert!((mutual_information(&x, &y) - mutual_information(&y, &x)).abs() < 1e-12);
    }

    #[test]
    fn feature_equal_to_target_is_selected_first() {
        let target = vec![0i8, 0, 0, 1, 1, 1];
        let states = states_from_columns(&[
            vec![0, 2, 0, 2, 0, 2],  // weak
            vec![0, 0, 0, 2, 2, 2],  // tracks the target exactly
            vec![2, 0, 0, 2, 2, 0],  // weak
        ]);
        let picked = mrmr_select(&states, &target, 2).unwrap();
        assert_eq!(picked[0], 1);
    }

    #[test]
    fn duplicate_feature_is_penalized_against_fresh_one() {
        // hand-checked 6-sample case: strong has relevance ~0.459 bits and is
        // picked first; its duplicate then scores 0.459 - H(strong) < 0 while
        // the fresh feature (exactly independent of strong, relevance ~0.082)
        // scores +0.082
        let target = vec![0i8, 0, 0, 1, 1, 1];
        let strong = vec![0i8, 0, 2, 2, 2, 2];
        let duplicate = strong.clone();
        let fresh = vec![0i8, 2, 0, 0, 2, 2];
        let states = states_from_columns(&[strong.clone(), duplicate, fresh.clone()]);
        assert_eq!(mutual_information(&fresh, &strong), 0.0);
        let picked = mrmr_select(&states, &target, 2).unwrap();
        assert_eq!(picked, vec![0, 2], "fresh feature beats the exact duplicate");
    }

    #[test]
    fn empty_matrix_is_rejected() {
        use crate::features::{DiscretizeThresholds, FeatureMatrix};
        let empty = FeatureMatrix::new(3);
        let thresholds = DiscretizeThresholds {
            means: vec![0.0; 3],
            stds: vec![1.0; 3],
        };
        let states = thresholds.apply(&empty).unwrap();
        assert!(mrmr_select(&states, &[], 2).is_err());
    }

    #[test]
    fn zero_relevance_stops_selection_early() {
        let target = vec![0i8, 0, 1, 1];
        let states = states_from_columns(&[
            vec![0, 0, 2, 2],
            vec![2, 2, 2, 2], // constant: zero relevance
            vec![0, 0, 0, 0], // constant: zero relevance
        ]);
        let picked = mrmr_select(&states, &target, 3).unwrap();
        assert_eq!(picked, vec![0]);
    }

    #[test]
    fn misaligned_target_is_rejected() {
        let states = states_from_columns(&[vec![0, 2, 0]]);
        assert!(mrmr_select(&states, &[0, 1], 1).is_err());
    }

    /// Re-runs the greedy criterion from scratch at every step — no caching,
    /// no incremental redundancy sums — as an independent oracle.
    fn brute_force_oracle(states: &DiscretizedMatrix, target: &[i8], count: usize) -> Vec<usize> {
        let d = states.feature_dim();
        let columns: Vec<Vec<i8>> = (0..d).map(|f| states.column(f)).collect();
        let mut selected: Vec<usize> = Vec::new();
        while selected.len() < count.min(d) {
            if (0..d)
                .filter(|f| !selected.contains(f))
                .all(|f| mutual_information(&columns[f], target) == 0.0)
            {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for f in 0..d {
                if selected.contains(&f) {
                    continue;
                }
                let relevance = mutual_information(&columns[f], target);
                let score = if selected.is_empty() {
                    relevance
                } else {
                    let redundancy: f64 = selected
                        .iter()
                        .map(|&g| mutual_information(&columns[f], &columns[g]))
                        .sum();
                    relevance - redundancy / selected.len() as f64
                };
                if best.map_or(true, |(_, b)| score > b) {
                    best = Some((f, score));
                }
            }
            selected.push(best.unwrap().0);
        }
        selected
    }

    #[test]
    fn selection_matches_brute_force_oracle() {
        // deterministic pseudo-random instances over 8 features
        let mut state = 0x5DEECE66Du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for trial in 0..20 {
            let rows = 20 + next() % 180;
            let d = 3 + next() % 6;
            let columns: Vec<Vec<i8>> = (0..d)
                .map(|_| (0..rows).map(|_| [-2i8, 0, 2][next() % 3]).collect())
                .collect();
            let target: Vec<i8> = (0..rows).map(|_| (next() % 2) as i8).collect();
            let states = states_from_columns(&columns);
            let count = 1 + next() % d;
            let got = mrmr_select(&states, &target, count).unwrap();
            let want = brute_force_oracle(&states, &target, count);
            assert_eq!(got, want, "trial {trial} (rows={rows}, d={d}, count={count})");
        }
    }

    #[test]
    fn first_pick_has_maximal_relevance() {
        let target = vec![0i8, 1, 0, 1, 1, 0, 0, 1];
        let columns: Vec<Vec<i8>> = (0..5)
            .map(|f| (0..8).map(|i| [-2i8, 0, 2][(i * (f + 2)) % 3]).collect())
            .collect();
        let states = states_from_columns(&columns);
        let picked = mrmr_select(&states, &target, 3).unwrap();
        let relevance: Vec<f64> = columns
            .iter()
            .map(|c| mutual_information(c, &target))
            .collect();
        let max = relevance.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(relevance[picked[0]], max);
    }

    #[test]
    fn selected_features_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selected.txt");
        let s = SelectedFeatures {
            per_class: vec![vec![5, 2, 9], vec![1, 0, 3]],
        };
        s.save(&path).unwrap();
        assert_eq!(SelectedFeatures::load(&path).unwrap(), s);
    }
}
