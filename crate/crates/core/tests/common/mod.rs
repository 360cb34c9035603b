//! Independent oracles and generators shared by the integration tests.
//! Nothing here calls into the code under test except for plain data types.

#![allow(dead_code)]

use ebt_core::{BinaryMap, PixelGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> BinaryMap {
    BinaryMap::from_fn(h, w, |_, _| rng.gen_bool(density)).unwrap()
}

pub fn random_pred(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> PixelGrid {
    PixelGrid::from_fn(h, w, |_, _| rng.gen_range(lo..=hi)).unwrap()
}

/// Maximum bipartite matching between edge pixels of `pred` and `gt`
/// (Euclidean distance at most `tol`) by Kuhn's augmenting-path algorithm.
pub fn kuhn_max_matching(pred: &BinaryMap, gt: &BinaryMap, tol: f64) -> usize {
    let ps = coords(pred);
    let gs = coords(gt);
    let adj: Vec<Vec<usize>> = ps
        .iter()
        .map(|&(pr, pc)| {
            gs.iter()
                .enumerate()
                .filter(|(_, &(gr, gc))| {
                    let dr = pr as f64 - gr as f64;
                    let dc = pc as f64 - gc as f64;
                    dr * dr + dc * dc <= tol * tol
                })
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; gs.len()];
    let mut total = 0;
    for u in 0..ps.len() {
        let mut seen = vec![false; gs.len()];
        if augment(u, &adj, &mut owner, &mut seen) {
            total += 1;
        }
    }
    total
}

fn augment(u: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if owner[v].is_none_or(|o| augment(o, adj, owner, seen)) {
            owner[v] = Some(u);
            return true;
        }
    }
    false
}

fn coords(m: &BinaryMap) -> Vec<(usize, usize)> {
    let (h, w) = m.shape();
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if m.get(r, c) {
                out.push((r, c));
            }
        }
    }
    out
}

/// Direct 2-D convolution with replicate borders. Kernel is indexed
/// `[dr + k][dc + k]` for a `(2k+1)x(2k+1)` window and applied as
/// correlation.
pub fn naive_correlate(img: &PixelGrid, kernel: &[Vec<f64>]) -> PixelGrid {
    let k = (kernel.len() / 2) as isize;
    let (h, w) = img.shape();
    PixelGrid::from_fn(h, w, |r, c| {
        let mut s = 0.0;
        for dr in -k..=k {
            for dc in -k..=k {
                let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                s += kernel[(dr + k) as usize][(dc + k) as usize] * img.get(rr, cc);
            }
        }
        s
    })
    .unwrap()
}

/// Outer product of a 1-D kernel with itself.
pub fn outer(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|a| v.iter().map(|b| a * b).collect()).collect()
}

/// Straight-from-the-definition WBCE on one image.
pub fn wbce_reference(pred: &PixelGrid, gt: &BinaryMap, lambda: f64, eps: f64) -> f64 {
    let n = pred.len() as f64;
    let pos = gt.count_ones() as f64;
    let alpha = (n - pos) / n;
    let mut s = 0.0;
    for (i, &p) in pred.as_slice().iter().enumerate() {
        let (r, c) = (i / pred.width(), i % pred.width());
        let p = p.clamp(eps, 1.0 - eps);
        if gt.get(r, c) {
            s -= alpha * p.ln();
        } else {
            s -= lambda * (1.0 - alpha) * (1.0 - p).ln();
        }
    }
    s / n
}

/// Straight-from-the-definition EBT on one image, with the tri-class
/// partition computed by an all-pairs Chebyshev scan.
pub fn ebt_reference(pred: &PixelGrid, gt: &BinaryMap, r: usize, b: [f64; 3], eps: f64) -> f64 {
    let (h, w) = gt.shape();
    let edges = coords(gt);
    let mut class = vec![2usize; h * w];
    for row in 0..h {
        for col in 0..w {
            if gt.get(row, col) {
                class[row * w + col] = 0;
            } else if edges
                .iter()
                .any(|&(er, ec)| er.abs_diff(row) <= r && ec.abs_diff(col) <= r)
            {
                class[row * w + col] = 1;
            }
        }
    }
    let mut cnt = [0f64; 3];
    for &c in &class {
        cnt[c] += 1.0;
    }
    let n = (h * w) as f64;
    let wt = [(cnt[1] + cnt[2]) / n, (cnt[0] + cnt[2]) / n, (cnt[0] + cnt[1]) / n];
    let mut s = 0.0;
    for (i, &p) in pred.as_slice().iter().enumerate() {
        let p = p.clamp(eps, 1.0 - eps);
        let c = class[i];
        let term = if c == 0 { p.ln() } else { (1.0 - p).ln() };
        s -= b[c] * wt[c] * term;
    }
    s / n
}
