//! Graph-based over-segmentation of the depth image.
//!
//! The depth channel is smoothed and partitioned with the Felzenszwalb
//! merge predicate on an 8-connected grid, giving the exhaustive, mutually
//! exclusive segment set the link-projection stage picks from. Pixels with
//! no depth reading never join a valid segment; they are grouped into their
//! own segments and flagged so downstream selection can skip them.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, DepthImage, DEPTH_INVALID};

/// Parameters of the graph segmentation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FelzParams {
    /// Gaussian pre-smoothing std-dev, in depth units.
    pub sigma: f64,
    /// Scale-of-observation constant; larger k favors larger segments.
    pub k: f64,
    /// Segments smaller than this are merged into their most-similar
    /// neighbor in a post-pass.
    pub min_size: usize,
}

impl FelzParams {
    pub fn new(sigma: f64, k: f64, min_size: usize) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParam(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidParam(format!("k must be > 0, got {k}")));
        }
        if min_size < 1 {
            return Err(Error::InvalidParam("min_size must be >= 1".into()));
        }
        Ok(Self { sigma, k, min_size })
    }
}

impl Default for FelzParams {
    fn default() -> Self {
        Self { sigma: 0.5, k: 800.0, min_size: 50 }
    }
}

/// A total labeling of the image into segments with contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    segment_sizes: Vec<usize>,
    invalid: Vec<bool>,
}

impl SegmentMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn segment_count(&self) -> usize {
        self.segment_sizes.len()
    }

    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn segment_size(&self, id: u32) -> usize {
        self.segment_sizes[id as usize]
    }

    pub fn segment_sizes(&self) -> &[usize] {
        &self.segment_sizes
    }

    /// True for segments made of no-reading pixels; they never become
    /// foreground.
    pub fn is_invalid(&self, id: u32) -> bool {
        self.invalid[id as usize]
    }

    /// Mask of the union of the selected segment ids.
    pub fn mask_of(&self, selected: &[bool]) -> BinaryMask {
        assert_eq!(selected.len(), self.segment_count());
        BinaryMask::from_fn(self.height, self.width, |r, c| {
            selected[self.labels[r * self.width + c] as usize]
        })
    }
}

/// Gaussian blur that treats no-reading pixels as missing data: they stay
/// missing in the output and contribute nothing to their neighbors (kernel
/// weights renormalize over the valid support).
///
/// Implemented as normalized convolution, blur(d·v)/blur(v) with v the
/// validity indicator, which factors into separable passes and is exactly
/// the masked weighted average.
pub fn gaussian_smooth(depth: &DepthImage, sigma: f64) -> DepthImage {
    assert!(sigma >= 0.0, "sigma must be >= 0");
    let (h, w) = depth.dims();
    if sigma == 0.0 || h == 0 || w == 0 {
        return depth.clone();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for i in -(radius as isize)..=(radius as isize) {
        let t = i as f64 / sigma;
        kernel.push((-0.5 * t * t).exp());
    }

    let n = h * w;
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];
    for i in 0..n {
        let (r, c) = (i / w, i % w);
        if depth.is_valid(r, c) {
            num[i] = depth.at(r, c) as f64;
            den[i] = 1.0;
        }
    }
    let blur = |src: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0f64; n];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let cc = c as isize + ki as isize - radius as isize;
                    if cc >= 0 && (cc as usize) < w {
                        acc += kw * src[r * w + cc as usize];
                    }
                }
                tmp[r * w + c] = acc;
            }
        }
        let mut out = vec![0.0f64; n];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let rr = r as isize + ki as isize - radius as isize;
                    if rr >= 0 && (rr as usize) < h {
                        acc += kw * tmp[rr as usize * w + c];
                    }
                }
                out[r * w + c] = acc;
            }
        }
        out
    };
    let bn = blur(&num);
    let bd = blur(&den);
    let mut out = vec![DEPTH_INVALID; n];
    for i in 0..n {
        if den[i] > 0.0 && bd[i] > 1e-12 {
            out[i] = (bn[i] / bd[i]) as f32;
        }
    }
    DepthImage::from_raw(h, w, out)
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
    /// Largest internal edge weight seen so far per component root.
    internal: Vec<f64>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32, w: f64) -> u32 {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        debug_assert_ne!(ra, rb);
        if self.rank[ra as usize] < self.rank[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        if self.rank[ra as usize] == self.rank[rb as usize] {
            self.rank[ra as usize] += 1;
        }
        self.size[ra as usize] += self.size[rb as usize];
        self.internal[ra as usize] = w.max(self.internal[ra as usize].max(self.internal[rb as usize]));
        ra
    }
}

/// Neighbor offsets covering each 8-connected pair exactly once, in the
/// direction order used for deterministic tie-breaking.
const EDGE_DIRS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

/// Partition the depth image with the Felzenszwalb merge predicate.
///
/// Two components merge while the connecting edge weight stays within
/// min(Int(C1) + k/|C1|, Int(C2) + k/|C2|). Edges are |smoothed depth
/// difference| between 8-neighbors, visited in (weight, row, col,
/// direction) order so the result is reproducible bit-for-bit. A post-pass
/// folds undersized components into the neighbor with the cheapest
/// connecting edge. No-reading pixels are excluded from the edge graph and
/// come back as invalid-flagged segments.
pub fn felzenszwalb_segment(depth: &DepthImage, params: &FelzParams) -> Result<SegmentMap> {
    let (h, w) = depth.dims();
    if h == 0 || w == 0 {
        return Err(Error::InvalidParam("cannot segment an empty image".into()));
    }
    let smoothed = gaussian_smooth(depth, params.sigma);
    let n = h * w;

    // Edge list over valid pixels only. Weight ties break on source pixel
    // (row, col) then direction index, which fixes the merge order.
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(4 * n);
    let mut order: Vec<u32> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !smoothed.is_valid(r, c) {
                continue;
            }
            for (d, (dr, dc)) in EDGE_DIRS.iter().enumerate() {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if !smoothed.is_valid(rr, cc) {
                    continue;
                }
                let wgt = (smoothed.at(r, c) as f64 - smoothed.at(rr, cc) as f64).abs();
                edges.push((wgt, (r * w + c) as u32, (rr * w + cc) as u32));
                order.push(d as u32);
            }
        }
    }
    let mut idx: Vec<usize> = (0..edges.len()).collect();
    idx.sort_by(|&a, &b| {
        edges[a]
            .0
            .total_cmp(&edges[b].0)
            .then_with(|| edges[a].1.cmp(&edges[b].1))
            .then_with(|| order[a].cmp(&order[b]))
    });

    let mut uf = UnionFind::new(n);
    for &i in &idx {
        let (wgt, a, b) = edges[i];
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        let ta = uf.internal[ra as usize] + params.k / uf.size[ra as usize] as f64;
        let tb = uf.internal[rb as usize] + params.k / uf.size[rb as usize] as f64;
        if wgt <= ta.min(tb) {
            uf.union(ra, rb, wgt);
        }
    }
    // Small-segment cleanup: sorted order means the first edge leaving a
    // still-small component is its cheapest link, i.e. its most similar
    // neighbor.
    for &i in &idx {
        let (wgt, a, b) = edges[i];
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        if (uf.size[ra as usize] as usize) < params.min_size
            || (uf.size[rb as usize] as usize) < params.min_size
        {
            uf.union(ra, rb, wgt);
        }
    }

    // Invalid pixels form their own components, connected among themselves.
    for r in 0..h {
        for c in 0..w {
            if smoothed.is_valid(r, c) {
                continue;
            }
            for (dr, dc) in EDGE_DIRS {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if !smoothed.is_valid(rr, cc) {
                    let (ra, rb) = (uf.find((r * w + c) as u32), uf.find((rr * w + cc) as u32));
                    if ra != rb {
                        uf.union(ra, rb, 0.0);
                    }
                }
            }
        }
    }

    // Compact roots to contiguous ids in first-appearance scan order.
    let mut id_of_root: Vec<u32> = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut invalid: Vec<bool> = Vec::new();
    for i in 0..n {
        let root = uf.find(i as u32) as usize;
        let id = if id_of_root[root] == u32::MAX {
            let id = sizes.len() as u32;
            id_of_root[root] = id;
            sizes.push(0);
            invalid.push(!smoothed.is_valid(i / w, i % w));
            id
        } else {
            id_of_root[root]
        };
        labels[i] = id;
        sizes[id as usize] += 1;
    }

    Ok(SegmentMap { height: h, width: w, labels, segment_sizes: sizes, invalid })
}
