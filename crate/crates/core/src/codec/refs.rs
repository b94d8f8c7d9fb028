//! Reference samples around a block and the neural mode's causal context.

use super::plane::Plane;

/// Neighbouring samples of an `n x n` block at `(x0, y0)`.
///
/// `above[0]` is the corner `(x0-1, y0-1)`, `above[1 + i]` is `(x0+i, y0-1)`
/// for `i < 2n`; `left[i]` is `(x0-1, y0+i)` for `i < 2n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefArray {
    pub n: usize,
    pub above: Vec<u8>,
    pub left: Vec<u8>,
    pub available: Availability,
}

/// Which neighbour segments held reconstructed samples before substitution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Availability {
    pub below_left: bool,
    pub left: bool,
    pub corner: bool,
    pub above: bool,
    pub above_right: bool,
}

impl Availability {
    /// Availability under raster-order block coding on an `n`-grid.
    pub fn raster(plane_w: usize, x0: usize, y0: usize, n: usize) -> Self {
        let has_left = x0 >= n;
        let has_above = y0 >= n;
        Self {
            // the block below-left is coded after the current one
            below_left: false,
            left: has_left,
            corner: has_left && has_above,
            above: has_above,
            above_right: has_above && x0 + 2 * n <= plane_w,
        }
    }

    pub fn any(&self) -> bool {
        self.below_left || self.left || self.corner || self.above || self.above_right
    }
}

impl RefArray {
    /// Value at HEVC-style coordinate: `(-1, -1)` is the corner, `(x, -1)`
    /// the top row, `(-1, y)` the left column.
    pub fn top(&self, x: isize) -> u8 {
        self.above[(x + 1) as usize]
    }

    pub fn side(&self, y: isize) -> u8 {
        if y < 0 {
            self.above[0]
        } else {
            self.left[y as usize]
        }
    }
}

/// Collects references for the block at `(x0, y0)` from `recon`, assuming all
/// blocks before it in raster order are reconstructed. Missing segments are
/// substituted by scanning from the bottom of the left column up to the corner
/// and along the top row, copying the last available sample; with no
/// neighbours at all every entry is 128.
pub fn gather_references(recon: &Plane, x0: usize, y0: usize, n: usize) -> RefArray {
    let avail = Availability::raster(recon.width(), x0, y0, n);
    gather_with(recon, x0, y0, n, avail)
}

pub fn gather_with(recon: &Plane, x0: usize, y0: usize, n: usize, avail: Availability) -> RefArray {
    // scan order: left[2n-1] .. left[0], corner, above[1] .. above[2n]
    let len = 4 * n + 1;
    let mut line: Vec<Option<u8>> = Vec::with_capacity(len);
    for i in (0..2 * n).rev() {
        let ok = if i >= n { avail.below_left } else { avail.left };
        line.push(ok.then(|| recon.get(x0 - 1, y0 + i)));
    }
    line.push(avail.corner.then(|| recon.get(x0 - 1, y0 - 1)));
    for i in 0..2 * n {
        let ok = if i < n { avail.above } else { avail.above_right };
        line.push(ok.then(|| recon.get(x0 + i, y0 - 1)));
    }

    let filled: Vec<u8> = match line.iter().position(Option::is_some) {
        None => vec![128; len],
        Some(first) => {
            let mut last = line[first].unwrap();
            line.iter()
                .map(|s| {
                    if let Some(v) = s {
                        last = *v;
                    }
                    last
                })
                .collect()
        }
    };
    let left = filled[..2 * n].iter().rev().copied().collect();
    let above = filled[2 * n..].to_vec();
    RefArray {
        n,
        above,
        left,
        available: avail,
    }
}

/// L-shaped context of width `k`: the `k` rows above the block spanning
/// columns `x0-k .. x0+n`, then the `n` rows beside it spanning `x0-k .. x0`,
/// each row left to right. Length `(n+k)^2 - n^2`.
///
/// Samples in unavailable neighbour blocks (or outside the plane) are taken
/// from the substituted reference line: the top-row value in the same column
/// (the corner for columns left of the block), or the left-column value in the
/// same row.
pub fn gather_context(recon: &Plane, refs: &RefArray, x0: usize, y0: usize, k: usize) -> Vec<u8> {
    let n = refs.n;
    let a = refs.available;
    let mut out = Vec::with_capacity((n + k) * (n + k) - n * n);
    let xs = x0 as isize - k as isize;
    for dy in 0..k {
        let y = y0 as isize - k as isize + dy as isize;
        for x in xs..(x0 + n) as isize {
            let rel = x - x0 as isize;
            let own = if rel < 0 { a.corner } else { a.above };
            let inside = x >= 0 && y >= 0;
            out.push(if own && inside {
                recon.get(x as usize, y as usize)
            } else if rel < 0 {
                refs.above[0]
            } else {
                refs.top(rel)
            });
        }
    }
    for dy in 0..n {
        for x in xs..x0 as isize {
            out.push(if a.left && x >= 0 {
                recon.get(x as usize, y0 + dy)
            } else {
                refs.left[dy]
            });
        }
    }
    out
}
