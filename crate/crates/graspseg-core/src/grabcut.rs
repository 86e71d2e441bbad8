//! Iterative graph-cut refinement of a trimap over an RGB image.
//!
//! Each round fits one color mixture per label class from the current
//! labeling, rebuilds a flow network whose terminal capacities carry the
//! per-pixel negative log-likelihoods and whose pairwise capacities carry
//! contrast-weighted smoothness, then relabels the soft pixels from an
//! exact min-cut. Hard trimap values (0 and 3) never change.
//!
//! Terminal convention: the source side of the cut is the background
//! label. `cap(source -> p)` is the cost of labeling `p` foreground (paid
//! when `p` ends on the sink side) and `cap(p -> sink)` the cost of
//! labeling it background.

use crate::error::{Error, Result};
use crate::gmm::{fit_em, fit_from_assignments, GmmModel};
use crate::image::{RgbImage, Trimap, TRIMAP_BG, TRIMAP_FG, TRIMAP_PROB_BG, TRIMAP_PROB_FG};

/// Finite stand-in for an infinite capacity on hard-clamped nodes.
pub const HARD_COST: f64 = 1e9;

/// Residuals below this are treated as saturated.
const FLOW_EPS: f64 = 1e-12;

/// Which side of the cut a node landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutLabel {
    Background,
    Foreground,
}

#[derive(Debug, Clone, Copy)]
struct FlowEdge {
    to: u32,
    rev: u32,
    cap: f64,
    orig: f64,
}

/// s-t flow network over pixel nodes. Terminals are implicit; capacities
/// accumulate across repeated calls for the same node pair.
#[derive(Debug, Clone)]
pub struct CutGraph {
    adj: Vec<Vec<FlowEdge>>,
    n: usize,
}

impl CutGraph {
    pub fn new(n_nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); n_nodes + 2], n: n_nodes }
    }

    fn source(&self) -> usize {
        self.n
    }

    fn sink(&self) -> usize {
        self.n + 1
    }

    fn add_arc(&mut self, from: usize, to: usize, cap_fwd: f64, cap_bwd: f64) {
        debug_assert!(cap_fwd >= 0.0 && cap_bwd >= 0.0 && cap_fwd.is_finite() && cap_bwd.is_finite());
        let rev_in_to = self.adj[to].len() as u32;
        let rev_in_from = self.adj[from].len() as u32;
        self.adj[from].push(FlowEdge { to: to as u32, rev: rev_in_to, cap: cap_fwd, orig: cap_fwd });
        self.adj[to].push(FlowEdge { to: from as u32, rev: rev_in_from, cap: cap_bwd, orig: cap_bwd });
    }

    /// Attach a node to both terminals: `fg_cost` is paid if the node is
    /// labeled foreground, `bg_cost` if background.
    pub fn add_terminal(&mut self, node: usize, fg_cost: f64, bg_cost: f64) {
        assert!(node < self.n);
        let s = self.source();
        let t = self.sink();
        if fg_cost > 0.0 {
            self.add_arc(s, node, fg_cost, 0.0);
        }
        if bg_cost > 0.0 {
            self.add_arc(node, t, bg_cost, 0.0);
        }
    }

    /// Symmetric smoothness term between two pixel nodes.
    pub fn add_pairwise(&mut self, a: usize, b: usize, weight: f64) {
        assert!(a < self.n && b < self.n && a != b);
        if weight > 0.0 {
            self.add_arc(a, b, weight, weight);
        }
    }

    /// Exact min-cut via Dinic max-flow. Returns a label per node and the
    /// cut value recomputed as the sum of original capacities crossing the
    /// partition (source side = background).
    pub fn min_cut(&mut self) -> (Vec<CutLabel>, f64) {
        let v = self.n + 2;
        let s = self.source();
        let t = self.sink();
        let mut level = vec![-1i32; v];
        let mut it = vec![0usize; v];
        let mut queue = Vec::with_capacity(v);

        loop {
            // BFS level graph on residual capacities.
            level.iter_mut().for_each(|l| *l = -1);
            level[s] = 0;
            queue.clear();
            queue.push(s as u32);
            let mut qi = 0;
            while qi < queue.len() {
                let u = queue[qi] as usize;
                qi += 1;
                for e in &self.adj[u] {
                    if e.cap > FLOW_EPS && level[e.to as usize] < 0 {
                        level[e.to as usize] = level[u] + 1;
                        queue.push(e.to);
                    }
                }
            }
            if level[t] < 0 {
                break;
            }
            it.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.augment_once(s, t, &level, &mut it);
                if pushed <= FLOW_EPS {
                    break;
                }
            }
        }

        // Source-reachable nodes in the residual graph form the background
        // side.
        let mut reach = vec![false; v];
        reach[s] = true;
        queue.clear();
        queue.push(s as u32);
        let mut qi = 0;
        while qi < queue.len() {
            let u = queue[qi] as usize;
            qi += 1;
            for e in &self.adj[u] {
                if e.cap > FLOW_EPS && !reach[e.to as usize] {
                    reach[e.to as usize] = true;
                    queue.push(e.to);
                }
            }
        }
        let labels: Vec<CutLabel> = (0..self.n)
            .map(|i| if reach[i] { CutLabel::Background } else { CutLabel::Foreground })
            .collect();
        let mut cut = 0.0;
        for u in 0..v {
            if !reach[u] {
                continue;
            }
            for e in &self.adj[u] {
                if !reach[e.to as usize] {
                    cut += e.orig;
                }
            }
        }
        (labels, cut)
    }

    /// Push one augmenting path through the level graph, iteratively so
    /// deep grid paths cannot overflow the stack. Advancing uses the usual
    /// per-node edge cursor; dead ends retreat and skip the entering edge.
    fn augment_once(&mut self, s: usize, t: usize, level: &[i32], it: &mut [usize]) -> f64 {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let mut bottleneck = f64::INFINITY;
                for &(n, ei) in &path {
                    bottleneck = bottleneck.min(self.adj[n][ei].cap);
                }
                for &(n, ei) in &path {
                    let (to, rev) = {
                        let e = &self.adj[n][ei];
                        (e.to as usize, e.rev as usize)
                    };
                    self.adj[n][ei].cap -= bottleneck;
                    self.adj[to][rev].cap += bottleneck;
                }
                return bottleneck;
            }
            let mut next = None;
            while it[u] < self.adj[u].len() {
                let e = &self.adj[u][it[u]];
                if e.cap > FLOW_EPS && level[e.to as usize] == level[u] + 1 {
                    next = Some(e.to as usize);
                    break;
                }
                it[u] += 1;
            }
            match next {
                Some(v) => {
                    path.push((u, it[u]));
                    u = v;
                }
                None => {
                    if u == s {
                        return 0.0;
                    }
                    let (pu, pei) = path.pop().expect("non-source node was entered via path");
                    debug_assert_eq!(self.adj[pu][pei].to as usize, u);
                    it[pu] += 1;
                    u = pu;
                }
            }
        }
    }
}

/// Refinement parameters; defaults follow the common graph-cut
/// segmentation settings (8 rounds, gamma 50, 5 components per class).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrabCutParams {
    pub iterations: usize,
    /// Pairwise smoothness strength.
    pub gamma: f64,
    /// Mixture components per label class.
    pub n_components: usize,
}

impl GrabCutParams {
    pub fn new(iterations: usize, gamma: f64, n_components: usize) -> Result<Self> {
        if iterations < 1 {
            return Err(Error::InvalidParam("iterations must be >= 1".into()));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParam(format!("gamma must be >= 0, got {gamma}")));
        }
        if n_components < 1 {
            return Err(Error::InvalidParam("n_components must be >= 1".into()));
        }
        Ok(Self { iterations, gamma, n_components })
    }
}

impl Default for GrabCutParams {
    fn default() -> Self {
        Self { iterations: 8, gamma: 50.0, n_components: 5 }
    }
}

/// Contrast scale: beta = 1 / (2 <||z_m - z_n||^2>) averaged over all
/// 8-neighbor pairs; 0 for a constant image.
pub fn beta_from_image(rgb: &RgbImage) -> f64 {
    let (h, w) = rgb.dims();
    let mut total = 0.0f64;
    let mut count = 0u64;
    for r in 0..h {
        for c in 0..w {
            let a = rgb.px(r, c);
            for (dr, dc) in NEIGHBOR_DIRS {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    continue;
                }
                let b = rgb.px(rr as usize, cc as usize);
                total += color_sq_dist(a, b);
                count += 1;
            }
        }
    }
    if count == 0 || total <= 0.0 {
        return 0.0;
    }
    1.0 / (2.0 * total / count as f64)
}

/// Unique 8-neighbor pair offsets and their Euclidean lengths.
const NEIGHBOR_DIRS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];
const NEIGHBOR_DIST: [f64; 4] = [1.0, 1.0, std::f64::consts::SQRT_2, std::f64::consts::SQRT_2];

fn color_sq_dist(a: [u8; 3], b: [u8; 3]) -> f64 {
    let dr = a[0] as f64 - b[0] as f64;
    let dg = a[1] as f64 - b[1] as f64;
    let db = a[2] as f64 - b[2] as f64;
    dr * dr + dg * dg + db * db
}

/// Energy recorded around one min-cut step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutEnergy {
    pub before: f64,
    pub after: f64,
}

struct PixelPair {
    a: u32,
    b: u32,
    weight: f64,
}

fn full_energy(
    colors: &[[f64; 3]],
    fg: &[bool],
    pairs: &[PixelPair],
    fg_model: &GmmModel,
    bg_model: &GmmModel,
) -> f64 {
    let mut e = 0.0;
    for (i, &c) in colors.iter().enumerate() {
        let m = if fg[i] { fg_model } else { bg_model };
        e -= m.log_pdf(c);
    }
    for p in pairs {
        if fg[p.a as usize] != fg[p.b as usize] {
            e += p.weight;
        }
    }
    e
}

/// Run the full refinement, returning the final trimap.
pub fn grabcut_refine(rgb: &RgbImage, trimap: &Trimap, params: &GrabCutParams, seed: u64) -> Result<Trimap> {
    grabcut_refine_traced(rgb, trimap, params, seed).map(|(t, _)| t)
}

/// [`grabcut_refine`] plus the total labeling energy immediately before
/// and after every min-cut step, under that iteration's fixed mixtures.
pub fn grabcut_refine_traced(
    rgb: &RgbImage,
    trimap: &Trimap,
    params: &GrabCutParams,
    seed: u64,
) -> Result<(Trimap, Vec<CutEnergy>)> {
    let (h, w) = trimap.dims();
    if rgb.dims() != (h, w) {
        return Err(Error::DimensionMismatch {
            expected_h: h,
            expected_w: w,
            got_h: rgb.dims().0,
            got_w: rgb.dims().1,
        });
    }
    let tri = trimap.data();
    if !tri.iter().any(|&v| v >= TRIMAP_PROB_FG) {
        return Err(Error::DegenerateTrimap("no foreground seeds (values 2 or 3)"));
    }
    if !tri.iter().any(|&v| v <= TRIMAP_PROB_BG) {
        return Err(Error::DegenerateTrimap("no background pixels (values 0 or 1)"));
    }

    let n = h * w;
    let colors: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let p = rgb.px(i / w, i % w);
            [p[0] as f64, p[1] as f64, p[2] as f64]
        })
        .collect();

    // Soft pixels are the only flow nodes; hard neighbors fold into
    // terminal capacities below.
    let mut node_of = vec![u32::MAX; n];
    let mut soft: Vec<u32> = Vec::new();
    for (i, &v) in tri.iter().enumerate() {
        if v == TRIMAP_PROB_BG || v == TRIMAP_PROB_FG {
            node_of[i] = soft.len() as u32;
            soft.push(i as u32);
        }
    }
    if soft.is_empty() {
        return Ok((trimap.clone(), Vec::new()));
    }

    let beta = beta_from_image(rgb);
    let mut pairs: Vec<PixelPair> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            for (d, (dr, dc)) in NEIGHBOR_DIRS.iter().enumerate() {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    continue;
                }
                let a = r * w + c;
                let b = rr as usize * w + cc as usize;
                let weight =
                    params.gamma * (-beta * color_sq_dist(rgb.px(r, c), rgb.px(rr as usize, cc as usize))).exp()
                        / NEIGHBOR_DIST[d];
                pairs.push(PixelPair { a: a as u32, b: b as u32, weight });
            }
        }
    }

    let mut fg: Vec<bool> = tri.iter().map(|&v| v >= TRIMAP_PROB_FG).collect();

    let gather = |fg: &[bool], want: bool| -> Vec<[f64; 3]> {
        colors
            .iter()
            .zip(fg)
            .filter(|(_, &l)| l == want)
            .map(|(&c, _)| c)
            .collect()
    };
    let fg_init = gather(&fg, true);
    let bg_init = gather(&fg, false);
    let mut fg_model = fit_em(&fg_init, params.n_components.min(fg_init.len()), 10, 1e-3, seed)?;
    let mut bg_model = fit_em(
        &bg_init,
        params.n_components.min(bg_init.len()),
        10,
        1e-3,
        seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;

    let mut energies = Vec::with_capacity(params.iterations);
    for _iter in 0..params.iterations {
        // Assign components under the current models, then refit each class
        // with a single maximization step. All pixels of a class count,
        // hard-constrained ones included.
        for want in [true, false] {
            let samples = gather(&fg, want);
            if samples.is_empty() {
                continue; // keep the previous model for a vanished class
            }
            let model = if want { &fg_model } else { &bg_model };
            let k = model.components().len();
            let assigns: Vec<usize> = samples.iter().map(|&s| model.component_loglik_assign(s)).collect();
            let refit = fit_from_assignments(&samples, &assigns, k)?;
            if want {
                fg_model = refit;
            } else {
                bg_model = refit;
            }
        }

        let mut graph = CutGraph::new(soft.len());
        for (ni, &pi) in soft.iter().enumerate() {
            let fg_cost = (-fg_model.log_pdf(colors[pi as usize])).min(HARD_COST);
            let bg_cost = (-bg_model.log_pdf(colors[pi as usize])).min(HARD_COST);
            // Capacities must be non-negative; shifting both terminals of a
            // pixel by the same amount changes every cut equally.
            let shift = (-fg_cost.min(bg_cost)).max(0.0);
            graph.add_terminal(ni, fg_cost + shift, bg_cost + shift);
        }
        for p in &pairs {
            let (na, nb) = (node_of[p.a as usize], node_of[p.b as usize]);
            match (na, nb) {
                (u32::MAX, u32::MAX) => {}
                (u32::MAX, nb) => {
                    // Hard neighbor: disagreement cost lands on the soft side.
                    if fg[p.a as usize] {
                        graph.add_terminal(nb as usize, 0.0, p.weight);
                    } else {
                        graph.add_terminal(nb as usize, p.weight, 0.0);
                    }
                }
                (na, u32::MAX) => {
                    if fg[p.b as usize] {
                        graph.add_terminal(na as usize, 0.0, p.weight);
                    } else {
                        graph.add_terminal(na as usize, p.weight, 0.0);
                    }
                }
                (na, nb) => graph.add_pairwise(na as usize, nb as usize, p.weight),
            }
        }

        let before = full_energy(&colors, &fg, &pairs, &fg_model, &bg_model);
        let (labels, _cut) = graph.min_cut();
        for (ni, &pi) in soft.iter().enumerate() {
            fg[pi as usize] = labels[ni] == CutLabel::Foreground;
        }
        let after = full_energy(&colors, &fg, &pairs, &fg_model, &bg_model);
        energies.push(CutEnergy { before, after });
    }

    let out: Vec<u8> = tri
        .iter()
        .zip(&fg)
        .map(|(&v, &f)| match v {
            TRIMAP_BG | TRIMAP_FG => v,
            _ => {
                if f {
                    TRIMAP_PROB_FG
                } else {
                    TRIMAP_PROB_BG
                }
            }
        })
        .collect();
    Ok((Trimap::from_data(h, w, out)?, energies))
}
