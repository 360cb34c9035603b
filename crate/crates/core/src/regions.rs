//! Tri-class pixel taxonomy (edge / boundary / texture) and the adaptive
//! per-image class weights derived from it.
//!
//! A non-edge pixel is a *boundary* pixel when it lies inside the
//! `(2r+1) x (2r+1)` square window centred on some edge pixel, i.e. when its
//! Chebyshev distance to the nearest edge pixel is at most `r`. Windows are
//! clipped at the image border. Everything else that is not an edge is
//! *texture*.

use crate::error::{Error, Result};
use crate::grid::BinaryMap;

/// Default boundary radius.
pub const DEFAULT_RADIUS: usize = 7;

/// Largest grid the brute-force oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PixelClass {
    Edge,
    Boundary,
    Texture,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriClassMask {
    height: usize,
    width: usize,
    classes: Vec<PixelClass>,
    count_e: usize,
    count_b: usize,
    count_t: usize,
    radius: usize,
}

impl TriClassMask {
    fn from_classes(height: usize, width: usize, classes: Vec<PixelClass>, radius: usize) -> Self {
        let (mut e, mut b, mut t) = (0, 0, 0);
        for c in &classes {
            match c {
                PixelClass::Edge => e += 1,
                PixelClass::Boundary => b += 1,
                PixelClass::Texture => t += 1,
            }
        }
        Self {
            height,
            width,
            classes,
            count_e: e,
            count_b: b,
            count_t: t,
            radius,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn radius_used(&self) -> usize {
        self.radius
    }

    pub fn get(&self, row: usize, col: usize) -> PixelClass {
        self.classes[row * self.width + col]
    }

    pub fn classes(&self) -> &[PixelClass] {
        &self.classes
    }

    /// `(count_E, count_B, count_T)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.count_e, self.count_b, self.count_t)
    }

    pub fn count_edge(&self) -> usize {
        self.count_e
    }

    pub fn count_boundary(&self) -> usize {
        self.count_b
    }

    pub fn count_texture(&self) -> usize {
        self.count_t
    }
}

/// Per-image adaptive class weights: each class is weighted by the fraction
/// of pixels that do *not* belong to it.
///
/// The exact rational form is kept alongside the `f64` values; the three
/// numerators always sum to twice the pixel count, whereas the rounded
/// floats only do so up to an ulp or two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub w_e: f64,
    pub w_b: f64,
    pub w_t: f64,
    numerators: [usize; 3],
    total: usize,
}

impl ClassWeights {
    pub fn from_counts(count_e: usize, count_b: usize, count_t: usize) -> Self {
        let total = count_e + count_b + count_t;
        let numerators = [count_b + count_t, count_e + count_t, count_e + count_b];
        let n = total as f64;
        Self {
            w_e: numerators[0] as f64 / n,
            w_b: numerators[1] as f64 / n,
            w_t: numerators[2] as f64 / n,
            numerators,
            total,
        }
    }

    /// `(|Y_B ∪ Y_T|, |Y_E ∪ Y_T|, |Y_E ∪ Y_B|)`.
    pub fn numerators(&self) -> [usize; 3] {
        self.numerators
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Exact check of `w_e + w_b + w_t = 2` on the rational form.
    pub fn sums_to_two(&self) -> bool {
        self.numerators.iter().sum::<usize>() == 2 * self.total
    }

    pub fn for_class(&self, class: PixelClass) -> f64 {
        match class {
            PixelClass::Edge => self.w_e,
            PixelClass::Boundary => self.w_b,
            PixelClass::Texture => self.w_t,
        }
    }
}

/// Partitions `gt` into edge, boundary and texture pixels with boundary
/// radius `r`.
///
/// Runs in `O(H * W)` regardless of `r`: the square-window dilation is
/// separable, and each 1-D pass is a sliding-window count over a prefix sum.
pub fn classify(gt: &BinaryMap, r: usize) -> Result<TriClassMask> {
    let (h, w) = gt.shape();
    if h == 0 || w == 0 {
        return Err(Error::Dimension { height: h, width: w });
    }
    let labels = gt.as_slice();

    // Horizontal pass.
    let mut row_hit = vec![false; h * w];
    let mut prefix = vec![0usize; w.max(h) + 1];
    for row in 0..h {
        let line = &labels[row * w..(row + 1) * w];
        for (c, &v) in line.iter().enumerate() {
            prefix[c + 1] = prefix[c] + v as usize;
        }
        for c in 0..w {
            let lo = c.saturating_sub(r);
            let hi = (c + r + 1).min(w);
            row_hit[row * w + c] = prefix[hi] > prefix[lo];
        }
    }

    // Vertical pass.
    let mut near = vec![false; h * w];
    for col in 0..w {
        for row in 0..h {
            prefix[row + 1] = prefix[row] + row_hit[row * w + col] as usize;
        }
        for row in 0..h {
            let lo = row.saturating_sub(r);
            let hi = (row + r + 1).min(h);
            near[row * w + col] = prefix[hi] > prefix[lo];
        }
    }

    let classes = labels
        .iter()
        .zip(&near)
        .map(|(&v, &n)| match (v, n) {
            (1, _) => PixelClass::Edge,
            (_, true) => PixelClass::Boundary,
            _ => PixelClass::Texture,
        })
        .collect();
    Ok(TriClassMask::from_classes(h, w, classes, r))
}

pub fn class_weights(mask: &TriClassMask) -> ClassWeights {
    let (e, b, t) = mask.counts();
    ClassWeights::from_counts(e, b, t)
}

/// Reference partition by exhaustive scan of every (non-edge, edge) pair.
///
/// Quadratic in the number of cells, so restricted to
/// [`ORACLE_MAX_CELLS`]. Only meant for validating [`classify`].
pub fn classify_oracle(gt: &BinaryMap, r: usize) -> Result<TriClassMask> {
    let (h, w) = gt.shape();
    if h * w > ORACLE_MAX_CELLS {
        return Err(Error::OracleSize {
            cells: h * w,
            limit: ORACLE_MAX_CELLS,
        });
    }
    let edges = gt.edge_coords();
    let mut classes = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let class = if gt.get(row, col) {
                PixelClass::Edge
            } else if edges
                .iter()
                .any(|&(er, ec)| row.abs_diff(er).max(col.abs_diff(ec)) <= r)
            {
                PixelClass::Boundary
            } else {
                PixelClass::Texture
            };
            classes.push(class);
        }
    }
    Ok(TriClassMask::from_classes(h, w, classes, r))
}
