//! Binary morphology with square all-ones structuring elements: erosion,
//! dilation, opening, and hole filling.
//!
//! Even-sized kernels have no center pixel; the anchor sits at index
//! `floor((n-1)/2)` on both axes. Pixels outside the image count as
//! background for both erosion windows and dilation reads, so large kernels
//! never hallucinate foreground at the borders.

use crate::image::BinaryMask;

/// Square all-ones structuring element of side length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareKernel {
    n: usize,
}

impl SquareKernel {
    /// Side length must be at least 1.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "kernel side must be >= 1");
        Self { n }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    /// Anchor offset from the window's top-left corner.
    pub fn anchor(&self) -> usize {
        (self.n - 1) / 2
    }
}

/// Per-pixel window reduction along one axis.
///
/// `out[i] = fold of m[i - anchor .. i - anchor + n]` where out-of-range
/// elements count as `pad`. `all` selects AND (erode) vs OR (dilate)
/// semantics via counting: window sums come from a prefix table so each
/// pass is O(pixels).
fn pass_1d(
    src: &[bool],
    height: usize,
    width: usize,
    n: usize,
    anchor: usize,
    horizontal: bool,
    require_all: bool,
) -> Vec<bool> {
    let mut out = vec![false; height * width];
    let (outer, inner) = if horizontal { (height, width) } else { (width, height) };
    let mut prefix = vec![0u32; inner + 1];
    for o in 0..outer {
        let idx = |i: usize| -> usize {
            if horizontal {
                o * width + i
            } else {
                i * width + o
            }
        };
        for i in 0..inner {
            prefix[i + 1] = prefix[i] + u32::from(src[idx(i)]);
        }
        for i in 0..inner {
            // Window [lo, hi) clipped to the line; clipped-away samples are pad=0.
            let start = i as isize - anchor as isize;
            let end = start + n as isize;
            let lo = start.max(0) as usize;
            let hi = (end.min(inner as isize)).max(0) as usize;
            let clipped = (n as isize - (hi as isize - lo as isize)) != 0;
            let ones = if hi > lo { prefix[hi] - prefix[lo] } else { 0 };
            let v = if require_all {
                !clipped && ones == n as u32
            } else {
                ones > 0
            };
            out[idx(i)] = v;
        }
    }
    out
}

/// Morphological erosion: output pixel is set iff every pixel under the
/// kernel window is set. Windows reaching past the border fail (pad = 0).
pub fn erode(m: &BinaryMask, kernel: SquareKernel) -> BinaryMask {
    let (h, w) = m.dims();
    let n = kernel.side();
    let a = kernel.anchor();
    // A square window of ones factors into a horizontal and a vertical run.
    let rows = pass_1d(m.data(), h, w, n, a, true, true);
    let cols = pass_1d(&rows, h, w, n, a, false, true);
    BinaryMask::from_data(h, w, cols).expect("same dims")
}

/// Morphological dilation: output pixel is set iff any pixel under the
/// kernel window is set. Reads past the border see background.
pub fn dilate(m: &BinaryMask, kernel: SquareKernel) -> BinaryMask {
    let (h, w) = m.dims();
    let n = kernel.side();
    // Dilation places the kernel's reflection; with anchor floor((n-1)/2)
    // the window offset becomes n-1-anchor so that dilate(erode(m)) windows
    // line up and opening is anti-extensive for even kernels too.
    let a = n - 1 - kernel.anchor();
    let rows = pass_1d(m.data(), h, w, n, a, true, false);
    let cols = pass_1d(&rows, h, w, n, a, false, false);
    BinaryMask::from_data(h, w, cols).expect("same dims")
}

/// Opening: erosion followed by dilation with the same kernel. Removes
/// structures smaller than the kernel while preserving larger ones.
pub fn open(m: &BinaryMask, kernel: SquareKernel) -> BinaryMask {
    dilate(&erode(m, kernel), kernel)
}

/// Fill enclosed background cavities: any background region (4-connected)
/// not reachable from the image border becomes foreground. Original
/// foreground is preserved.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let (h, w) = m.dims();
    if h == 0 || w == 0 {
        return m.clone();
    }
    let mut reached = vec![false; h * w];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let push = |r: usize, c: usize, reached: &mut Vec<bool>, stack: &mut Vec<(usize, usize)>| {
        let i = r * w + c;
        if !reached[i] && !m.at(r, c) {
            reached[i] = true;
            stack.push((r, c));
        }
    };
    for c in 0..w {
        push(0, c, &mut reached, &mut stack);
        push(h - 1, c, &mut reached, &mut stack);
    }
    for r in 0..h {
        push(r, 0, &mut reached, &mut stack);
        push(r, w - 1, &mut reached, &mut stack);
    }
    while let Some((r, c)) = stack.pop() {
        if r > 0 {
            push(r - 1, c, &mut reached, &mut stack);
        }
        if r + 1 < h {
            push(r + 1, c, &mut reached, &mut stack);
        }
        if c > 0 {
            push(r, c - 1, &mut reached, &mut stack);
        }
        if c + 1 < w {
            push(r, c + 1, &mut reached, &mut stack);
        }
    }
    BinaryMask::from_fn(h, w, |r, c| m.at(r, c) || !reached[r * w + c])
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_mask(rng: &mut impl Rng, h: usize, w: usize, density: f64) -> BinaryMask {
        BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < density)
    }

    #[test]
    fn erode_unit_kernel_is_identity() {
        let m = BinaryMask::ones(20, 20);
        assert_eq!(erode(&m, SquareKernel::new(1)), m);
    }

    #[test]
    fn erode_centered_block() {
        // 10x10 ones block centered in 30x30 zeros, J_10: exactly one pixel
        // survives (the unique anchor position whose window fits the block).
        let m = BinaryMask::from_fn(30, 30, |r, c| (10..20).contains(&r) && (10..20).contains(&c));
        let out = erode(&m, SquareKernel::new(10));
        assert_eq!(out.area(), 1);
        assert_eq!(out, erode_naive(&m, SquareKernel::new(10)));
    }

    #[test]
    fn erode_kernel_larger_than_image() {
        let m = BinaryMask::ones(8, 8);
        assert_eq!(erode(&m, SquareKernel::new(9)), BinaryMask::zeros(8, 8));
    }

    #[test]
    fn dilate_zeros_stays_zeros() {
        let m = BinaryMask::zeros(16, 16);
        assert_eq!(dilate(&m, SquareKernel::new(7)), m);
    }

    #[test]
    fn dilate_covers_image_when_kernel_huge() {
        let mut m = BinaryMask::zeros(31, 31);
        m.set(15, 15, true);
        assert_eq!(dilate(&m, SquareKernel::new(75)), BinaryMask::ones(31, 31));
    }

    #[test]
    fn dilate_single_pixel_block() {
        let mut m = BinaryMask::zeros(40, 40);
        m.set(10, 10, true);
        let out = dilate(&m, SquareKernel::new(5));
        assert_eq!(out.area(), 25);
        assert_eq!(out, dilate_naive(&m, SquareKernel::new(5)));
    }

    #[test]
    fn open_preserves_large_structure() {
        let m = BinaryMask::from_fn(40, 40, |r, c| (8..30).contains(&r) && (5..25).contains(&c));
        let k = SquareKernel::new(8);
        let opened = open(&m, k);
        let expected = dilate_naive(&erode_naive(&m, k), k);
        assert_eq!(opened, expected);
        assert_eq!(opened, m, "structure larger than kernel must be preserved");
    }

    #[test]
    fn open_removes_isolated_pixels() {
        let mut m = BinaryMask::zeros(20, 20);
        m.set(3, 3, true);
        m.set(12, 7, true);
        assert!(open(&m, SquareKernel::new(3)).is_empty());
    }

    #[test]
    fn open_is_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 24, 24, 0.45);
            let k = SquareKernel::new(rng.random_range(1..=6));
            let once = open(&m, k);
            assert_eq!(open(&once, k), once);
        }
    }

    #[test]
    fn fill_holes_donut() {
        let m = BinaryMask::from_fn(20, 20, |r, c| {
            let dr = r as f64 - 9.5;
            let dc = c as f64 - 9.5;
            let d = (dr * dr + dc * dc).sqrt();
            (4.0..8.0).contains(&d)
        });
        let filled = fill_holes(&m);
        let disk = BinaryMask::from_fn(20, 20, |r, c| {
            let dr = r as f64 - 9.5;
            let dc = c as f64 - 9.5;
            (dr * dr + dc * dc).sqrt() < 8.0
        });
        assert_eq!(filled, disk);
    }

    #[test]
    fn fill_holes_border_bay_stays_open() {
        // U-shape opening onto the border: the bay is reachable, so no fill.
        let m = BinaryMask::from_fn(10, 10, |r, c| {
            (2..8).contains(&c) && (2..8).contains(&r) && !((3..7).contains(&c) && r >= 3)
        });
        assert_eq!(fill_holes(&m), m);
    }

    proptest! {
        #[test]
        fn erode_dilate_match_oracle(seed in 0u64..500, n in 1usize..7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let h = rng.random_range(1..32);
            let w = rng.random_range(1..32);
            let m = random_mask(&mut rng, h, w, 0.5);
            let k = SquareKernel::new(n);
            prop_assert_eq!(erode(&m, k), erode_naive(&m, k));
            prop_assert_eq!(dilate(&m, k), dilate_naive(&m, k));
        }

        #[test]
        fn extensivity_chain(seed in 0u64..200, n in 1usize..6) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_mask(&mut rng, 20, 20, 0.5);
            let k = SquareKernel::new(n);
            prop_assert!(erode(&m, k).is_subset_of(&m));
            prop_assert!(m.is_subset_of(&dilate(&m, k)));
            prop_assert!(open(&m, k).is_subset_of(&m));
        }

        #[test]
        fn fill_holes_matches_flood_oracle(seed in 0u64..200) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let h = rng.random_range(2..24);
            let w = rng.random_range(2..24);
            let m = random_mask(&mut rng, h, w, 0.5);
            prop_assert_eq!(fill_holes(&m), fill_holes_naive(&m));
        }

        #[test]
        fn duality_on_interior(seed in 0u64..200, n in 1usize..6, a_pick in 0usize..6) {
            // erode(m) == NOT dilate(NOT m) when both sweep the same window,
            // checked away from the border where the pad policy cannot differ.
            let a = a_pick % n;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_mask(&mut rng, 24, 24, 0.5);
            let not_m = BinaryMask::from_fn(24, 24, |r, c| !m.at(r, c));
            let lhs = erode_with_anchor(&m, n, a);
            let rhs = dilate_with_anchor(&not_m, n, a);
            for r in n..24 - n {
                for c in n..24 - n {
                    prop_assert_eq!(lhs.at(r, c), !rhs.at(r, c));
                }
            }
        }
    }
}
