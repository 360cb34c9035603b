//! Central finite-difference checks of the analytic gradients, shared by the
//! test suites and the `gradcheck` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{BinaryMap, PixelGrid};
use crate::losses::{ebt, ebt_grad, wbce, wbce_grad, LossKind, LossParams};
use crate::toymodel::{featurize, weight_grad, FeatureStack, ModelWeights, NUM_FEATURES};

pub const FD_STEP: f64 = 1e-5;
pub const MAX_REL_ERROR: f64 = 1e-4;

/// Magnitudes below this are compared absolutely rather than relatively.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn loss_value(kind: LossKind, pred: &PixelGrid, gt: &BinaryMap, params: &LossParams) -> Result<f64> {
    Ok(match kind {
        LossKind::Wbce => wbce(pred, gt, params.lambda, params.epsilon)?.value,
        LossKind::Ebt => ebt(pred, gt, params)?.value,
    })
}

/// Largest per-cell relative error between `dL/dŷ` and central differences.
pub fn check_pred_grad(
    kind: LossKind,
    pred: &PixelGrid,
    gt: &BinaryMap,
    params: &LossParams,
    h: f64,
) -> Result<f64> {
    let analytic = match kind {
        LossKind::Wbce => wbce_grad(pred, gt, params.lambda, params.epsilon)?,
        LossKind::Ebt => ebt_grad(pred, gt, params)?,
    };
    let mut worst: f64 = 0.0;
    let mut probe = pred.clone();
    for i in 0..pred.len() {
        let x = pred.as_slice()[i];
        probe.as_mut_slice()[i] = x + h;
        let up = loss_value(kind, &probe, gt, params)?;
        probe.as_mut_slice()[i] = x - h;
        let down = loss_value(kind, &probe, gt, params)?;
        probe.as_mut_slice()[i] = x;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(analytic.grid().as_slice()[i], numeric));
    }
    Ok(worst)
}

/// Largest per-weight relative error between `dL/dw` and central
/// differences through the full forward pass.
pub fn check_weight_grad(
    kind: LossKind,
    features: &FeatureStack,
    weights: &ModelWeights,
    gt: &BinaryMap,
    params: &LossParams,
    h: f64,
) -> Result<f64> {
    let (_, analytic) = weight_grad(features, weights, gt, None, params, kind)?;
    let mut worst: f64 = 0.0;
    let mut probe = weights.clone();
    for (k, &g) in analytic.iter().enumerate() {
        let x = weights.0[k];
        probe.0[k] = x + h;
        let up = weight_grad(features, &probe, gt, None, params, kind)?.0.value;
        probe.0[k] = x - h;
        let down = weight_grad(features, &probe, gt, None, params, kind)?.0.value;
        probe.0[k] = x;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h)));
    }
    Ok(worst)
}

/// A random gradient-check instance: predictions in `[0.05, 0.95]`, a
/// random edge map with at least one edge, a smooth-ish random image and
/// small random weights.
pub struct Instance {
    pub pred: PixelGrid,
    pub gt: BinaryMap,
    pub image: PixelGrid,
    pub weights: ModelWeights,
    pub params: LossParams,
}

pub fn random_instance(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Instance {
    let density = rng.gen_range(0.05..0.35);
    let mut gt = BinaryMap::from_fn(height, width, |_, _| rng.gen_bool(density)).expect("dims");
    if gt.count_ones() == 0 {
        gt.set(height / 2, width / 2, true);
    }
    let pred = PixelGrid::from_fn(height, width, |_, _| rng.gen_range(0.05..0.95)).expect("dims");
    let image = PixelGrid::from_fn(height, width, |_, _| rng.gen_range(0.0..1.0)).expect("dims");
    let weights = ModelWeights((0..NUM_FEATURES).map(|_| rng.gen_range(-0.5..0.5)).collect());
    let params = LossParams {
        b_e: rng.gen_range(0.5..1.5),
        b_b: rng.gen_range(0.2..1.5),
        b_t: rng.gen_range(0.1..1.0),
        r: rng.gen_range(0..5),
        lambda: rng.gen_range(0.8..1.5),
        ..LossParams::default()
    };
    Instance {
        pred,
        gt,
        image,
        weights,
        params,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradcheckReport {
    pub instances: usize,
    pub pred_wbce: f64,
    pub pred_ebt: f64,
    pub weights_wbce: f64,
    pub weights_ebt: f64,
}

impl GradcheckReport {
    pub fn max(&self) -> f64 {
        self.pred_wbce
            .max(self.pred_ebt)
            .max(self.weights_wbce)
            .max(self.weights_ebt)
    }

    pub fn passed(&self) -> bool {
        self.max() <= MAX_REL_ERROR
    }
}

/// Runs all four checks on `instances` random `size x size` cases.
pub fn run_suite(seed: u64, size: usize, instances: usize) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradcheckReport {
        instances,
        ..Default::default()
    };
    for _ in 0..instances {
        let inst = random_instance(&mut rng, size, size);
        let fs = featurize(&inst.image);
        rep.pred_wbce = rep.pred_wbce.max(check_pred_grad(
            LossKind::Wbce,
            &inst.pred,
            &inst.gt,
            &inst.params,
            FD_STEP,
        )?);
        rep.pred_ebt = rep.pred_ebt.max(check_pred_grad(
            LossKind::Ebt,
            &inst.pred,
            &inst.gt,
            &inst.params,
            FD_STEP,
        )?);
        rep.weights_wbce = rep.weights_wbce.max(check_weight_grad(
            LossKind::Wbce,
            &fs,
            &inst.weights,
            &inst.gt,
            &inst.params,
            FD_STEP,
        )?);
        rep.weights_ebt = rep.weights_ebt.max(check_weight_grad(
            LossKind::Ebt,
            &fs,
            &inst.weights,
            &inst.gt,
            &inst.params,
            FD_STEP,
        )?);
    }
    Ok(rep)
}
