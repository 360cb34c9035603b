//! Cross-entropy losses on a predicted probability map: plain BCE, the
//! class-balanced WBCE baseline and the edge/boundary/texture (EBT) loss,
//! together with their analytic gradients with respect to the prediction.
//!
//! All losses are per image and normalised by the pixel count. Predictions
//! are clamped to `[epsilon, 1 - epsilon]` before taking logs; gradients are
//! zero wherever the clamp is active so that the loss/gradient pair stays
//! consistent.

use crate::error::{ensure_same_shape, Error, Result};
use crate::grid::{BinaryMap, PixelGrid};
use crate::regions::{class_weights, classify, PixelClass, TriClassMask, DEFAULT_RADIUS};

pub const DEFAULT_LAMBDA: f64 = 1.1;
pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub b_e: f64,
    pub b_b: f64,
    pub b_t: f64,
    pub r: usize,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            b_e: 1.0,
            b_b: 0.8,
            b_t: 0.5,
            r: DEFAULT_RADIUS,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_e", self.b_e),
            ("b_b", self.b_b),
            ("b_t", self.b_t),
            ("lambda", self.lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Param(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// EBT weights for `mask`, in edge/boundary/texture order.
    pub fn ebt_pixel_weights(&self, mask: &TriClassMask) -> [f64; 3] {
        let w = class_weights(mask);
        [self.b_e * w.w_e, self.b_b * w.w_b, self.b_t * w.w_t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Wbce,
    Ebt,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wbce" => Ok(LossKind::Wbce),
            "ebt" => Ok(LossKind::Ebt),
            other => Err(Error::Param(format!("unknown loss kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Wbce => "wbce",
            LossKind::Ebt => "ebt",
        })
    }
}

/// Loss value with the un-normalised per-class terms.
///
/// For EBT the terms are (edge, boundary, texture); for BCE and WBCE they are
/// (positive, negative, 0). `value` is their sum divided by the pixel count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub contributions: [f64; 3],
}

impl LossValue {
    fn from_terms(contributions: [f64; 3], pixels: usize) -> Self {
        Self {
            value: contributions.iter().sum::<f64>() / pixels as f64,
            contributions,
        }
    }
}

/// `dL/dŷ` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradGrid(pub PixelGrid);

impl GradGrid {
    pub fn grid(&self) -> &PixelGrid {
        &self.0
    }

    pub fn into_grid(self) -> PixelGrid {
        self.0
    }
}

#[inline]
fn clamp(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

#[inline]
fn clamp_active(p: f64, eps: f64) -> bool {
    p < eps || p > 1.0 - eps
}

/// `-log(ŷ)` for positives, `-log(1 - ŷ)` for negatives, on the clamped value.
#[inline]
fn nll(p: f64, positive: bool, eps: f64) -> f64 {
    let p = clamp(p, eps);
    if positive {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of `weight * nll` with respect to the unclamped prediction.
#[inline]
fn nll_grad(p: f64, positive: bool, weight: f64, eps: f64) -> f64 {
    if weight == 0.0 || clamp_active(p, eps) {
        return 0.0;
    }
    if positive {
        -weight / p
    } else {
        weight / (1.0 - p)
    }
}

pub fn bce(pred: &PixelGrid, gt: &BinaryMap, epsilon: f64) -> Result<LossValue> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let mut terms = [0.0; 3];
    for (&p, &y) in pred.as_slice().iter().zip(gt.as_slice()) {
        let positive = y == 1;
        terms[usize::from(!positive)] += nll(p, positive, epsilon);
    }
    Ok(LossValue::from_terms(terms, gt.len()))
}

/// Returns `(α, λ(1-α))`, the WBCE weights on edge and non-edge pixels.
pub fn wbce_weights(gt: &BinaryMap, lambda: f64) -> (f64, f64) {
    let n = gt.len();
    let pos = gt.count_ones();
    let alpha = (n - pos) as f64 / n as f64;
    (alpha, lambda * (pos as f64 / n as f64))
}

pub fn wbce(pred: &PixelGrid, gt: &BinaryMap, lambda: f64, epsilon: f64) -> Result<LossValue> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let (w_pos, w_neg) = wbce_weights(gt, lambda);
    let (mut pos, mut neg) = (0.0, 0.0);
    for (&p, &y) in pred.as_slice().iter().zip(gt.as_slice()) {
        if y == 1 {
            pos += nll(p, true, epsilon);
        } else {
            neg += nll(p, false, epsilon);
        }
    }
    Ok(LossValue::from_terms([w_pos * pos, w_neg * neg, 0.0], gt.len()))
}

pub fn wbce_grad(pred: &PixelGrid, gt: &BinaryMap, lambda: f64, epsilon: f64) -> Result<GradGrid> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let (w_pos, w_neg) = wbce_weights(gt, lambda);
    let n = gt.len() as f64;
    let data = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &y)| {
            let positive = y == 1;
            let w = if positive { w_pos } else { w_neg };
            nll_grad(p, positive, w, epsilon) / n
        })
        .collect();
    Ok(GradGrid(PixelGrid::new(gt.height(), gt.width(), data)?))
}

pub fn ebt(pred: &PixelGrid, gt: &BinaryMap, params: &LossParams) -> Result<LossValue> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let mask = classify(gt, params.r)?;
    ebt_masked(pred, &mask, params)
}

/// EBT loss against a precomputed mask. The mask radius takes precedence
/// over `params.r`.
pub fn ebt_masked(pred: &PixelGrid, mask: &TriClassMask, params: &LossParams) -> Result<LossValue> {
    ensure_same_shape(mask.shape(), pred.shape())?;
    let weights = params.ebt_pixel_weights(mask);
    let mut sums = [0.0; 3];
    for (&p, &class) in pred.as_slice().iter().zip(mask.classes()) {
        let k = class as usize;
        sums[k] += nll(p, class == PixelClass::Edge, params.epsilon);
    }
    let terms = [
        weights[0] * sums[0],
        weights[1] * sums[1],
        weights[2] * sums[2],
    ];
    Ok(LossValue::from_terms(terms, mask.len()))
}

pub fn ebt_grad(pred: &PixelGrid, gt: &BinaryMap, params: &LossParams) -> Result<GradGrid> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    let mask = classify(gt, params.r)?;
    ebt_grad_masked(pred, &mask, params)
}

pub fn ebt_grad_masked(
    pred: &PixelGrid,
    mask: &TriClassMask,
    params: &LossParams,
) -> Result<GradGrid> {
    ensure_same_shape(mask.shape(), pred.shape())?;
    let weights = params.ebt_pixel_weights(mask);
    let n = mask.len() as f64;
    let data = pred
        .as_slice()
        .iter()
        .zip(mask.classes())
        .map(|(&p, &class)| {
            nll_grad(
                p,
                class == PixelClass::Edge,
                weights[class as usize],
                params.epsilon,
            ) / n
        })
        .collect();
    Ok(GradGrid(PixelGrid::new(mask.height(), mask.width(), data)?))
}

/// Loss and gradient of either kind. `mask` is only consulted for EBT and is
/// recomputed from `gt` when absent.
pub fn loss_and_grad(
    kind: LossKind,
    pred: &PixelGrid,
    gt: &BinaryMap,
    mask: Option<&TriClassMask>,
    params: &LossParams,
) -> Result<(LossValue, GradGrid)> {
    match kind {
        LossKind::Wbce => Ok((
            wbce(pred, gt, params.lambda, params.epsilon)?,
            wbce_grad(pred, gt, params.lambda, params.epsilon)?,
        )),
        LossKind::Ebt => {
            let owned;
            let mask = match mask {
                Some(m) => m,
                None => {
                    owned = classify(gt, params.r)?;
                    &owned
                }
            };
            Ok((
                ebt_masked(pred, mask, params)?,
                ebt_grad_masked(pred, mask, params)?,
            ))
        }
    }
}

/// Unweighted mean of per-image losses.
pub fn batch_mean(values: &[LossValue]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| v.value).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn center_edge() -> BinaryMap {
        BinaryMap::from_rows(&[[0, 0, 0], [0, 1, 0], [0, 0, 0]]).unwrap()
    }

    fn half(h: usize, w: usize) -> PixelGrid {
        PixelGrid::filled(h, w, 0.5).unwrap()
    }

    fn random_case(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (PixelGrid, BinaryMap) {
        let density = rng.gen_range(0.05..0.4);
        let gt = BinaryMap::from_fn(h, w, |_, _| rng.gen_bool(density)).unwrap();
        let pred = PixelGrid::from_fn(h, w, |_, _| rng.gen_range(0.05..0.95)).unwrap();
        (pred, gt)
    }

    /// Per-pixel sum in the textbook form, without the clamp branch logic.
    fn bce_oracle(pred: &PixelGrid, gt: &BinaryMap, eps: f64) -> f64 {
        let mut total = 0.0f64;
        for (&p, &y) in pred.as_slice().iter().zip(gt.as_slice()) {
            let p = p.max(eps).min(1.0 - eps);
            let y = f64::from(y);
            total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
        total / gt.len() as f64
    }

    #[test]
    fn bce_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, gt) = random_case(&mut rng, 6, 7);
        let perfect = bce(&gt.to_pixels(), &gt, DEFAULT_EPSILON).unwrap();
        assert!(perfect.value <= -(1.0 - DEFAULT_EPSILON).ln() * 1.000_001);
        let v = bce(&half(6, 7), &gt, DEFAULT_EPSILON).unwrap();
        assert!((v.value - LN2).abs() < 1e-15);

        let (pred, gt) = random_case(&mut rng, 8, 8);
        let v = bce(&pred, &gt, DEFAULT_EPSILON).unwrap().value;
        assert!((v - bce_oracle(&pred, &gt, DEFAULT_EPSILON)).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let gt = BinaryMap::zeros(3, 3).unwrap();
        let pred = half(3, 4);
        assert!(matches!(bce(&pred, &gt, 1e-7), Err(Error::Shape { .. })));
        assert!(wbce(&pred, &gt, 1.1, 1e-7).is_err());
        assert!(ebt(&pred, &gt, &LossParams::default()).is_err());
        assert!(ebt_grad(&pred, &gt, &LossParams::default()).is_err());
        assert!(wbce_grad(&pred, &gt, 1.1, 1e-7).is_err());
    }

    #[test]
    fn wbce_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (pred, _) = random_case(&mut rng, 5, 5);
        assert_eq!(wbce(&pred, &BinaryMap::zeros(5, 5).unwrap(), 1.1, 1e-7).unwrap().value, 0.0);
        assert_eq!(wbce(&half(5, 5), &BinaryMap::ones(5, 5).unwrap(), 1.1, 1e-7).unwrap().value, 0.0);

        let v = wbce(&half(3, 3), &center_edge(), 1.1, 1e-7).unwrap().value;
        let expected = ((8.0 / 9.0) * LN2 + 1.1 * (1.0 / 9.0) * 8.0 * LN2) / 9.0;
        assert!((v - expected).abs() < 1e-15, "{v} vs {expected}");
    }

    #[test]
    fn ebt_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pred, _) = random_case(&mut rng, 5, 5);
        let p = LossParams::default();
        assert_eq!(ebt(&pred, &BinaryMap::zeros(5, 5).unwrap(), &p).unwrap().value, 0.0);

        let p = LossParams { r: 1, ..LossParams::default() };
        let v = ebt(&half(3, 3), &center_edge(), &p).unwrap();
        let expected = LN2 * (1.0 * (8.0 / 9.0) + 8.0 * 0.8 * (1.0 / 9.0)) / 9.0;
        assert!((v.value - expected).abs() < 1e-15);
        assert_eq!(v.contributions[2], 0.0);
    }

    #[test]
    fn ebt_reduces_to_wbce_at_saturating_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (h, w) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let (pred, gt) = random_case(&mut rng, h, w);
            let lambda = 1.1;
            let p = LossParams {
                b_e: 1.0,
                b_b: lambda,
                b_t: rng.gen_range(0.1..3.0),
                r: h.max(w) - 1,
                lambda,
                epsilon: 1e-7,
            };
            let a = ebt(&pred, &gt, &p).unwrap().value;
            let b = wbce(&pred, &gt, lambda, 1e-7).unwrap().value;
            assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn ebt_grad_closed_form() {
        let p = LossParams { r: 1, ..LossParams::default() };
        let g = ebt_grad(&half(3, 3), &center_edge(), &p).unwrap();
        let g = g.grid();
        assert!((g.get(1, 1) + (8.0 / 9.0) / (0.5 * 9.0)).abs() < 1e-15);
        for (r, c) in [(0, 0), (0, 1), (2, 2), (1, 0)] {
            assert!((g.get(r, c) - 0.8 * (1.0 / 9.0) / (0.5 * 9.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_gradients_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (pred, _) = random_case(&mut rng, 6, 6);
        let zeros = BinaryMap::zeros(6, 6).unwrap();
        let ones = BinaryMap::ones(6, 6).unwrap();
        let p = LossParams::default();
        for g in [
            ebt_grad(&pred, &zeros, &p).unwrap(),
            wbce_grad(&pred, &zeros, 1.1, 1e-7).unwrap(),
            wbce_grad(&pred, &ones, 1.1, 1e-7).unwrap(),
        ] {
            assert!(g.grid().as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_zero_outside_clamp() {
        let gt = BinaryMap::from_rows(&[[1, 0]]).unwrap();
        let pred = PixelGrid::new(1, 2, vec![0.0, 1.0]).unwrap();
        let g = wbce_grad(&pred, &gt, 1.1, 1e-7).unwrap();
        assert_eq!(g.grid().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn gradient_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (pred, gt) = random_case(&mut rng, 12, 12);
        let mask = classify(&gt, 2).unwrap();
        let p = LossParams { r: 2, ..LossParams::default() };
        let g = ebt_grad(&pred, &gt, &p).unwrap();
        for (v, c) in g.grid().as_slice().iter().zip(mask.classes()) {
            match c {
                PixelClass::Edge => assert!(*v < 0.0),
                _ => assert!(*v >= 0.0),
            }
        }
        let g = wbce_grad(&pred, &gt, 1.1, 1e-7).unwrap();
        for (v, y) in g.grid().as_slice().iter().zip(gt.as_slice()) {
            if *y == 1 {
                assert!(*v < 0.0);
            } else {
                assert!(*v >= 0.0);
            }
        }
    }

    #[test]
    fn boundary_weight_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (pred, gt) = random_case(&mut rng, 10, 10);
        let lo = LossParams { b_b: 0.4, ..LossParams::default() };
        let hi = LossParams { b_b: 0.6, ..LossParams::default() };
        assert!(ebt(&pred, &gt, &hi).unwrap().value > ebt(&pred, &gt, &lo).unwrap().value);
    }

    #[test]
    fn params_validation() {
        assert!(LossParams::default().validate().is_ok());
        assert!(LossParams { b_t: 0.0, ..LossParams::default() }.validate().is_err());
        assert!(LossParams { epsilon: 0.5, ..LossParams::default() }.validate().is_err());
        assert_eq!("EBT".parse::<LossKind>().unwrap(), LossKind::Ebt);
        assert!("dice".parse::<LossKind>().is_err());
    }
}
