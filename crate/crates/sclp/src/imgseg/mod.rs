//! Graph-based oversegmentation into superpixels.
//!
//! The segmenter builds the 8-connected pixel graph of the smoothed image,
//! sorts edges by Euclidean RGB distance and merges components greedily under
//! the adaptive threshold `min(int_i + k/|C_i|, int_j + k/|C_j|)`. Components
//! are then split into 4-connected pieces and a final pass merges anything
//! below `min_size` into its lowest-weight 4-adjacent neighbor, so every
//! output superpixel is 4-connected and at least `min_size` pixels (when the
//! image itself is that large).

pub(crate) mod smooth;
mod superpixels;

pub use smooth::gaussian_smooth;
pub use superpixels::{BBox, SuperpixelMap, SuperpixelStats};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Tunables of the graph-based segmenter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegParams {
    /// Gaussian pre-smoothing std-dev in pixels.
    pub sigma: f64,
    /// Merge-threshold scale; larger k yields coarser segmentations.
    pub k: f64,
    /// Minimum region area in pixels, enforced by the merge post-pass.
    pub min_size: usize,
}

impl SegParams {
    /// Default parameters for an image with the given longer dimension:
    /// sigma 0.8, min_size 100, k from [`compute_k`].
    pub fn defaults_for(longer_dimension: usize) -> Self {
        SegParams {
            sigma: 0.8,
            k: compute_k(longer_dimension),
            min_size: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid_input(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.k > 0.0) {
            return Err(Error::invalid_input(format!("k must be > 0, got {}", self.k)));
        }
        if self.min_size == 0 {
            return Err(Error::invalid_input("min_size must be >= 1"));
        }
        Ok(())
    }
}

/// Merge-threshold scale for an image whose longer dimension is `d` pixels:
/// `200 * max(1, sqrt(d / 640))`. Constant 200 below 640 pixels, growing with
/// the square root of the scale above it.
pub fn compute_k(longer_dimension: usize) -> f64 {
    200.0 * (longer_dimension as f64 / 640.0).sqrt().max(1.0)
}

/// One pixel-graph edge; `w2` is the squared RGB distance, kept integral so
/// sorting ties are exact. `a < b` in row-major order by construction.
#[derive(Debug, Clone, Copy)]
struct Edge {
    w2: u32,
    a: u32,
    b: u32,
}

impl Edge {
    #[inline]
    fn weight(&self) -> f64 {
        (self.w2 as f64).sqrt()
    }
}

#[inline]
fn squared_distance(p: [u8; 3], q: [u8; 3]) -> u32 {
    let dr = p[0] as i32 - q[0] as i32;
    let dg = p[1] as i32 - q[1] as i32;
    let db = p[2] as i32 - q[2] as i32;
    (dr * dr + dg * dg + db * db) as u32
}

/// Union-find over pixel indices with path halving.
struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
        }
    }

    #[inline]
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    /// Links root `b` under root `a`; callers pass roots.
    #[inline]
    fn link(&mut self, a: u32, b: u32) {
        self.parent[b as usize] = a;
    }
}

/// Segments an image into superpixels. See the module docs for the algorithm.
pub fn segment(image: &RasterImage, params: &SegParams) -> Result<SuperpixelMap> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let smoothed = gaussian_smooth(image, params.sigma);
    let px = smoothed.pixels();

    // 8-connected edges: east, south-west, south, south-east from each pixel.
    // All four directions give a < b in row-major order.
    let mut edges = Vec::with_capacity(4 * n);
    for y in 0..h {
        for x in 0..w {
            let a = (y * w + x) as u32;
            if x + 1 < w {
                edges.push(Edge {
                    w2: squared_distance(px[a as usize], px[a as usize + 1]),
                    a,
                    b: a + 1,
                });
            }
            if y + 1 < h {
                let below = a + w as u32;
                if x > 0 {
                    edges.push(Edge {
                        w2: squared_distance(px[a as usize], px[below as usize - 1]),
                        a,
                        b: below - 1,
                    });
                }
                edges.push(Edge {
                    w2: squared_distance(px[a as usize], px[below as usize]),
                    a,
                    b: below,
                });
                if x + 1 < w {
                    edges.push(Edge {
                        w2: squared_distance(px[a as usize], px[below as usize + 1]),
                        a,
                        b: below + 1,
                    });
                }
            }
        }
    }
    edges.sort_unstable_by_key(|e| (e.w2, e.a, e.b));

    // greedy merge pass: threshold[root] = internal + k / |C|
    let mut sets = DisjointSets::new(n);
    let mut size = vec![1u32; n];
    let mut threshold = vec![params.k; n];
    for e in &edges {
        let ra = sets.find(e.a);
        let rb = sets.find(e.b);
        if ra == rb {
            continue;
        }
        let weight = e.weight();
        if weight <= threshold[ra as usize] && weight <= threshold[rb as usize] {
            sets.link(ra, rb);
            size[ra as usize] += size[rb as usize];
            threshold[ra as usize] = weight + params.k / size[ra as usize] as f64;
        }
    }

    // split merged components into 4-connected pieces (diagonal merges can
    // leave corner-touch-only unions behind)
    let mut piece = vec![u32::MAX; n];
    let mut piece_count = 0u32;
    let mut stack = Vec::new();
    for start in 0..n {
        if piece[start] != u32::MAX {
            continue;
        }
        let root = sets.find(start as u32);
        let id = piece_count;
        piece_count += 1;
        piece[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize, sets: &mut DisjointSets| {
                if piece[q] == u32::MAX && sets.find(q as u32) == root {
                    piece[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1, &mut sets);
            }
            if x + 1 < w {
                visit(p + 1, &mut sets);
            }
            if y >= 1 {
                visit(p - w, &mut sets);
            }
            if y + 1 < h {
                visit(p + w, &mut sets);
            }
        }
    }

    let mut piece_size = vec![0u32; piece_count as usize];
    for &id in &piece {
        piece_size[id as usize] += 1;
    }

    // min-size pass over 4-connected boundary edges in ascending weight order,
    // so undersized pieces merge into their lowest-weight neighbor first
    let mut piece_sets = DisjointSets::new(piece_count as usize);
    for e in &edges {
        // skip diagonals: 4-adjacency means the indices differ by 1 or w
        let delta = e.b - e.a;
        if delta != 1 && delta != w as u32 {
            continue;
        }
        let ra = piece_sets.find(piece[e.a as usize]);
        let rb = piece_sets.find(piece[e.b as usize]);
        if ra == rb {
            continue;
        }
        if (piece_size[ra as usize] as usize) < params.min_size
            || (piece_size[rb as usize] as usize) < params.min_size
        {
            piece_sets.link(ra, rb);
            piece_size[ra as usize] += piece_size[rb as usize];
        }
    }

    // contiguous relabel in first-pixel row-major order
    let mut relabel = vec![u32::MAX; piece_count as usize];
    let mut next = 0u32;
    let mut ids = Vec::with_capacity(n);
    for p in 0..n {
        let root = piece_sets.find(piece[p]) as usize;
        if relabel[root] == u32::MAX {
            relabel[root] = next;
            next += 1;
        }
        ids.push(relabel[root]);
    }
    log::debug!(
        "segmented {w}x{h} image into {next} superpixels (k={}, min_size={})",
        params.k,
        params.min_size
    );
    SuperpixelMap::from_ids(w, h, ids)
}
