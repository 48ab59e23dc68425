//! Contextual vote propagation and probability fusion.
//!
//! Every superpixel casts votes for the classes of every other superpixel:
//! globally through the block-pair prior (weighted by the voter's confidence
//! times its pixel count) and locally through the adjacency prior. Vote
//! vectors normalize into context probabilities, which a per-class linear
//! model fuses with the visual probabilities into the final distribution.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::prior::{GlobalPrior, LocalPrior};

/// One voting superpixel: its block, most-probable class, the visual
/// probability of that class, and its size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voter {
    pub block: usize,
    pub class_id: usize,
    pub confidence: f64,
    pub pixel_count: u64,
}

fn check_voter(voter: &Voter, class_count: usize, block_count: usize) -> Result<()> {
    if voter.class_id >= class_count {
        return Err(Error::invalid_input(format!(
            "voter class {} outside [0, {class_count})",
            voter.class_id
        )));
    }
    if voter.block >= block_count {
        return Err(Error::invalid_input(format!(
            "voter block {} outside [0, {block_count})",
            voter.block
        )));
    }
    if !(voter.confidence >= 0.0 && voter.confidence.is_finite()) {
        return Err(Error::invalid_input(format!(
            "voter confidence {} must be finite and non-negative",
            voter.confidence
        )));
    }
    Ok(())
}

/// Accumulates global votes for one superpixel in `target_block`.
///
/// Each voter outside the target block contributes its weight (confidence
/// times pixel count) spread over the prior row for its class and block pair;
/// voters inside the target block, including the target itself, are silent.
pub fn global_votes(
    target_block: usize,
    voters: &[Voter],
    prior: &GlobalPrior,
) -> Result<Vec<f64>> {
    if target_block >= prior.block_count {
        return Err(Error::invalid_input(format!(
            "target block {target_block} outside [0, {})",
            prior.block_count
        )));
    }
    let mut votes = vec![0.0f64; prior.class_count];
    for voter in voters {
        check_voter(voter, prior.class_count, prior.block_count)?;
        if voter.block == target_block {
            continue;
        }
        let weight = voter.confidence * voter.pixel_count as f64;
        let row = prior.row(voter.class_id, voter.block, target_block);
        for (v, &p) in votes.iter_mut().zip(row) {
            *v += weight * p;
        }
    }
    Ok(votes)
}

/// The printed form of the vote weight uses the target's own confidence for
/// every voter instead of each voter's. Kept alongside [`global_votes`] so
/// the two readings can be compared directly.
pub fn global_votes_literal(
    target_block: usize,
    target_confidence: f64,
    voters: &[Voter],
    prior: &GlobalPrior,
) -> Result<Vec<f64>> {
    if !(target_confidence >= 0.0 && target_confidence.is_finite()) {
        return Err(Error::invalid_input(format!(
            "target confidence {target_confidence} must be finite and non-negative"
        )));
    }
    let reweighted: Vec<Voter> = voters
        .iter()
        .map(|v| Voter {
            confidence: target_confidence,
            ..*v
        })
        .collect();
    global_votes(target_block, &reweighted, prior)
}

/// Voter mass pre-aggregated per (block, class), so a scene's global votes
/// cost O(K·M) per target instead of O(N·M).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockClassMass {
    pub block_count: usize,
    pub class_count: usize,
    mass: Vec<f64>,
}

impl BlockClassMass {
    pub fn accumulate(voters: &[Voter], block_count: usize, class_count: usize) -> Result<Self> {
        let mut mass = vec![0.0f64; block_count * class_count];
        for voter in voters {
            check_voter(voter, class_count, block_count)?;
            mass[voter.block * class_count + voter.class_id] +=
                voter.confidence * voter.pixel_count as f64;
        }
        Ok(BlockClassMass {
            block_count,
            class_count,
            mass,
        })
    }

    /// Global votes from the aggregated table; matches the per-voter sum.
    pub fn global_votes(&self, target_block: usize, prior: &GlobalPrior) -> Result<Vec<f64>> {
        if prior.class_count != self.class_count || prior.block_count != self.block_count {
            return Err(Error::invalid_input(format!(
                "prior is {} classes x {} blocks, vote table {} x {}",
                prior.class_count, prior.block_count, self.class_count, self.block_count
            )));
        }
        if target_block >= self.block_count {
            return Err(Error::invalid_input(format!(
                "target block {target_block} outside [0, {})",
                self.block_count
            )));
        }
        let mut votes = vec![0.0f64; self.class_count];
        for k1 in 0..self.block_count {
            if k1 == target_block {
                continue;
            }
            for c_hat in 0..self.class_count {
                let weight = self.mass[k1 * self.class_count + c_hat];
                if weight == 0.0 {
                    continue;
                }
                let row = prior.row(c_hat, k1, target_block);
                for (v, &p) in votes.iter_mut().zip(row) {
                    *v += weight * p;
                }
            }
        }
        Ok(votes)
    }
}

/// Accumulates local votes from a superpixel's neighbors (`block` is unused).
pub fn local_votes(neighbors: &[Voter], prior: &LocalPrior) -> Result<Vec<f64>> {
    let mut votes = vec![0.0f64; prior.class_count];
    for neighbor in neighbors {
        check_voter(neighbor, prior.class_count, usize::MAX)?;
        let weight = neighbor.confidence * neighbor.pixel_count as f64;
        let row = prior.row(neighbor.class_id);
        for (v, &p) in votes.iter_mut().zip(row) {
            *v += weight * p;
        }
    }
    Ok(votes)
}

/// Scales a vote vector to a probability distribution; a zero vector becomes
/// uniform so fusion never divides by zero.
pub fn normalize_votes(votes: &[f64]) -> Result<Vec<f64>> {
    if votes.is_empty() {
        return Err(Error::invalid_input("empty vote vector"));
    }
    if let Some(bad) = votes.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid_input(format!("negative vote entry {bad}")));
    }
    let total: f64 = votes.iter().sum();
    if total == 0.0 {
        return Ok(vec![1.0 / votes.len() as f64; votes.len()]);
    }
    Ok(votes.iter().map(|v| v / total).collect())
}

/// Per-class linear fusion of visual, local, and global probabilities.
///
/// Row `i` holds the class-`i` weights `[constant, visual, local, global]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub weights: Vec<[f64; 4]>,
}

impl FusionModel {
    /// The identity model: fused output equals the visual probabilities.
    pub fn visual_only(class_count: usize) -> Self {
        FusionModel {
            weights: vec![[0.0, 1.0, 0.0, 0.0]; class_count],
        }
    }

    /// Weighted blend per class, normalized by the weight sum so outputs stay
    /// inside [0, 1].
    pub fn fuse(&self, pv: &[f64], pl: &[f64], pg: &[f64]) -> Result<Vec<f64>> {
        let m = self.weights.len();
        if pv.len() != m || pl.len() != m || pg.len() != m {
            return Err(Error::invalid_input(format!(
                "probability vectors of lengths {}/{}/{} for {m} classes",
                pv.len(),
                pl.len(),
                pg.len()
            )));
        }
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let [wc, wv, wl, wg] = self.weights[i];
            let total = wc + wv + wl + wg;
            if !(total > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "class {i} fusion weights sum to {total}"
                )));
            }
            out.push((wc + wv * pv[i] + wl * pl[i] + wg * pg[i]) / total);
        }
        Ok(out)
    }

    /// CSV rows `w_constant,w_visual,w_local,w_global`, one per class.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for row in &self.weights {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut weights = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::parse(path, idx + 1, "bad weight"))
                })
                .collect::<Result<_>>()?;
            if cells.len() != 4 {
                return Err(Error::parse(path, idx + 1, "expected 4 weights"));
            }
            if cells.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::parse(path, idx + 1, "weights must be non-negative"));
            }
            weights.push([cells[0], cells[1], cells[2], cells[3]]);
        }
        if weights.is_empty() {
            return Err(Error::parse(path, 1, "empty fusion model"));
        }
        Ok(FusionModel { weights })
    }
}

/// One fusion training sample: the three probability vectors for a superpixel
/// plus its ground-truth class.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionTriple {
    pub pv: Vec<f64>,
    pub pl: Vec<f64>,
    pub pg: Vec<f64>,
    pub target_class: usize,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: [f64; 4]) -> [f64; 4] {
    let mut sorted = v;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    let mut out = [0.0f64; 4];
    for i in 0..4 {
        out[i] = (v[i] - tau).max(0.0);
    }
    out
}

/// Least-squares fit of one class's weights over the simplex (the blend is
/// scale-invariant, so the simplex loses no generality and keeps the weight
/// sum positive). Projected gradient descent with a fixed 1/L step.
fn fit_class_weights(rows: &[[f64; 4]], targets: &[f64]) -> [f64; 4] {
    let n = rows.len() as f64;
    let mut gram = [[0.0f64; 4]; 4];
    let mut cross = [0.0f64; 4];
    for (x, &t) in rows.iter().zip(targets) {
        for i in 0..4 {
            cross[i] += x[i] * t / n;
            for j in 0..4 {
                gram[i][j] += x[i] * x[j] / n;
            }
        }
    }
    let trace: f64 = (0..4).map(|i| gram[i][i]).sum();
    let step = 1.0 / (2.0 * trace.max(1e-12));
    let mut w = [0.25f64; 4];
    for _ in 0..200_000 {
        let mut grad = [0.0f64; 4];
        for i in 0..4 {
            grad[i] = -2.0 * cross[i];
            for j in 0..4 {
                grad[i] += 2.0 * gram[i][j] * w[j];
            }
        }
        let stepped = [
            w[0] - step * grad[0],
            w[1] - step * grad[1],
            w[2] - step * grad[2],
            w[3] - step * grad[3],
        ];
        let next = project_simplex(stepped);
        let moved: f64 = (0..4).map(|i| (next[i] - w[i]).powi(2)).sum::<f64>().sqrt();
        w = next;
        // gradient-mapping norm: displacement over step size
        if moved / step < 1e-8 {
            break;
        }
    }
    w
}

/// Fits the per-class fusion weights from held-out probability triples.
pub fn fit_fusion(triples: &[FusionTriple], class_count: usize) -> Result<FusionModel> {
    if triples.is_empty() {
        return Err(Error::insufficient_data("no fusion training triples"));
    }
    if class_count == 0 {
        return Err(Error::invalid_input("class count must be positive"));
    }
    for triple in triples {
        if triple.pv.len() != class_count
            || triple.pl.len() != class_count
            || triple.pg.len() != class_count
        {
            return Err(Error::invalid_input(
                "fusion triple length differs from class count",
            ));
        }
        if triple.target_class >= class_count {
            return Err(Error::invalid_input(format!(
                "fusion target class {} outside [0, {class_count})",
                triple.target_class
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|p| p.is_finite());
        if !finite(&triple.pv) || !finite(&triple.pl) || !finite(&triple.pg) {
            return Err(Error::invalid_input("non-finite fusion probability"));
        }
    }
    let mut weights = Vec::with_capacity(class_count);
    for class_id in 0..class_count {
        if !triples.iter().any(|t| t.target_class == class_id) {
            log::warn!("class {class_id} has no positive fusion samples");
        }
        let rows: Vec<[f64; 4]> = triples
            .iter()
            .map(|t| [1.0, t.pv[class_id], t.pl[class_id], t.pg[class_id]])
            .collect();
        let targets: Vec<f64> = triples
            .iter()
            .map(|t| f64::from(t.target_class == class_id))
            .collect();
        let w = fit_class_weights(&rows, &targets);
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|v| !v.is_finite()) {
            log::warn!("class {class_id} fusion fit degenerated; using visual-only weights");
            weights.push([0.0, 1.0, 0.0, 0.0]);
        } else {
            weights.push(w);
        }
    }
    Ok(FusionModel { weights })
}

/// Final label: argmax of the fused distribution, ties to the lowest class.
pub fn final_label(probabilities: &[f64]) -> Result<usize> {
    crate::classify::most_probable_class(probabilities).map(|(c, _)| c)
}
