//! Superpixel partition of an image plus the per-superpixel geometry every
//! downstream stage consumes: pixel counts, centroids, bounding boxes and the
//! 4-connected adjacency sets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }
}

/// Geometry of one superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelStats {
    /// Member pixel count, the vote mass of this superpixel.
    pub pixel_count: usize,
    /// Arithmetic mean of member pixel (x, y) coordinates.
    pub centroid: (f64, f64),
    pub bbox: BBox,
    /// Ids of 4-adjacent superpixels, sorted ascending; never contains self.
    pub neighbors: Vec<u32>,
}

/// A total partition of an image into contiguous superpixels with ids `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    stats: Vec<SuperpixelStats>,
}

impl SuperpixelMap {
    /// Wraps a row-major id grid, checking the partition invariants
    /// (contiguous non-empty ids, 4-connected members) and computing stats.
    pub fn from_ids(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "superpixel map dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if ids.len() != width * height {
            return Err(Error::invalid_input(format!(
                "id buffer holds {} entries, expected {}",
                ids.len(),
                width * height
            )));
        }
        let count = ids.iter().map(|&id| id as usize + 1).max().unwrap_or(0);
        let stats = compute_stats(width, height, &ids, count);
        if let Some(empty) = stats.iter().position(|s| s.pixel_count == 0) {
            return Err(Error::invalid_input(format!(
                "superpixel ids not contiguous: id {empty} has no pixels"
            )));
        }
        check_connected(width, height, &ids, count)?;
        Ok(SuperpixelMap {
            width,
            height,
            ids,
            stats,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels N.
    pub fn count(&self) -> usize {
        self.stats.len()
    }

    #[inline]
    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        debug_assert!(x < self.width && y < self.height);
        self.ids[y * self.width + x]
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn stats(&self) -> &[SuperpixelStats] {
        &self.stats
    }

    pub fn stat(&self, id: u32) -> &SuperpixelStats {
        &self.stats[id as usize]
    }

    /// Writes the text form: first line `W H N`, then H lines of W ids.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(writer, "{} {} {}", self.width, self.height, self.count()).map_err(io)?;
        for row in self.ids.chunks_exact(self.width) {
            let mut line = String::with_capacity(self.width * 4);
            for (i, id) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&id.to_string());
            }
            line.push('\n');
            writer.write_all(line.as_bytes()).map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    /// Reads the text form written by [`SuperpixelMap::write`].
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let mut next_dim = |name: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| Error::parse(path, 1, format!("header missing {name}")))?
                .parse()
                .map_err(|_| Error::parse(path, 1, format!("bad {name} in header")))
        };
        let width = next_dim("width")?;
        let height = next_dim("height")?;
        let declared = next_dim("count")?;

        let mut ids = Vec::with_capacity(width * height);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            for token in line.split_whitespace() {
                let id: u32 = token.parse().map_err(|_| {
                    Error::parse(path, idx + 1, format!("bad superpixel id {token:?}"))
                })?;
                if id as usize >= declared {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        format!("id {id} >= declared count {declared}"),
                    ));
                }
                ids.push(id);
            }
        }
        let map = SuperpixelMap::from_ids(width, height, ids)
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        if map.count() != declared {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {declared} superpixels, grid has {}", map.count()),
            ));
        }
        Ok(map)
    }
}

/// Counts, centroids, bounding boxes and sorted 4-adjacency for each id.
fn compute_stats(width: usize, height: usize, ids: &[u32], count: usize) -> Vec<SuperpixelStats> {
    let mut pixel_count = vec![0usize; count];
    let mut sum_x = vec![0u64; count];
    let mut sum_y = vec![0u64; count];
    let mut boxes = vec![
        BBox {
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
        };
        count
    ];
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); count];

    for y in 0..height {
        for x in 0..width {
            let id = ids[y * width + x] as usize;
            pixel_count[id] += 1;
            sum_x[id] += x as u64;
            sum_y[id] += y as u64;
            let b = &mut boxes[id];
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
            if x + 1 < width {
                let right = ids[y * width + x + 1];
                if right != id as u32 {
                    neighbors[id].push(right);
                    neighbors[right as usize].push(id as u32);
                }
            }
            if y + 1 < height {
                let below = ids[(y + 1) * width + x];
                if below != id as u32 {
                    neighbors[id].push(below);
                    neighbors[below as usize].push(id as u32);
                }
            }
        }
    }

    (0..count)
        .map(|id| {
            let mut adj = std::mem::take(&mut neighbors[id]);
            adj.sort_unstable();
            adj.dedup();
            SuperpixelStats {
                pixel_count: pixel_count[id],
                centroid: (
                    sum_x[id] as f64 / pixel_count[id].max(1) as f64,
                    sum_y[id] as f64 / pixel_count[id].max(1) as f64,
                ),
                bbox: boxes[id],
                neighbors: adj,
            }
        })
        .collect()
}

/// Verifies each id's pixel set is 4-connected via flood fill.
fn check_connected(width: usize, height: usize, ids: &[u32], count: usize) -> Result<()> {
    let mut seen_component = vec![false; count];
    let mut visited = vec![false; ids.len()];
    let mut stack = Vec::new();
    for start in 0..ids.len() {
        if visited[start] {
            continue;
        }
        let id = ids[start];
        if seen_component[id as usize] {
            return Err(Error::invalid_input(format!(
                "superpixel {id} is not 4-connected"
            )));
        }
        seen_component[id as usize] = true;
        visited[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % width, p / width);
            let mut push = |q: usize| {
                if !visited[q] && ids[q] == id {
                    visited[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                push(p - 1);
            }
            if x + 1 < width {
                push(p + 1);
            }
            if y >= 1 {
                push(p - width);
            }
            if y + 1 < height {
                push(p + width);
            }
        }
    }
    Ok(())
}
