//! Train-then-evaluate pipelines on synthetic data, and the (B_B, B_T)
//! stability sweep.

use std::fmt::Write as _;

use crate::datapipe::{synth_dataset, SampleSet, SynthSpec};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_dataset, EvalConfig, EvalReport};
use crate::exec::ExecMode;
use crate::grid::{BinaryMap, PixelGrid};
use crate::regions::{classify, PixelClass};
use crate::toymodel::{predict, train, ModelWeights, TrainConfig, TrainRecord};

pub const DEFAULT_SWEEP_B_B: [f64; 5] = [0.4, 0.6, 0.8, 1.0, 1.2];
pub const DEFAULT_SWEEP_B_T: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Adam step size for the 8-weight model on 64x64 canvases. At the deep-model
/// rate of 1e-4 the weights move by at most ~0.02 in 200 full-batch epochs;
/// at this rate the loss is close to stationary by epoch 200.
pub const DESK_LR: f64 = 0.1;

/// Everything needed to reproduce one synthetic train/evaluate run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub synth: SynthSpec,
    pub train_images: usize,
    pub test_images: usize,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Experiment {
    /// 32 training and 16 held-out 64x64 scenes, 200 full-batch epochs on
    /// whole canvases at [`DESK_LR`].
    pub fn desk() -> Self {
        Self {
            synth: SynthSpec::default(),
            train_images: 32,
            test_images: 16,
            train: TrainConfig {
                lr: DESK_LR,
                ..TrainConfig::default()
            },
            eval: EvalConfig::default(),
        }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        Self::desk()
    }
}

impl Experiment {
    /// Training scenes use `synth.seed`; held-out scenes use the next seed.
    pub fn datasets(&self) -> Result<(SampleSet, SampleSet)> {
        let train = synth_dataset(&self.synth, self.train_images)?;
        let test_spec = SynthSpec {
            seed: self.synth.seed.wrapping_add(1),
            ..self.synth.clone()
        };
        let test = synth_dataset(&test_spec, self.test_images)?;
        Ok((train, test))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: TrainRecord,
    pub report: EvalReport,
    pub predictions: Vec<PixelGrid>,
}

pub fn predict_all(images: &[PixelGrid], weights: &ModelWeights, exec: ExecMode) -> Result<Vec<PixelGrid>> {
    exec.map(images, |img| predict(img, weights))
        .into_iter()
        .collect()
}

pub fn train_and_evaluate(
    train_set: &SampleSet,
    test_set: &SampleSet,
    train_cfg: &TrainConfig,
    eval_cfg: &EvalConfig,
) -> Result<RunOutcome> {
    let record = train(&train_set.pairs(), train_cfg)?;
    let images: Vec<PixelGrid> = test_set.samples.iter().map(|s| s.image.clone()).collect();
    let gts: Vec<BinaryMap> = test_set.samples.iter().map(|s| s.gt.clone()).collect();
    let predictions = predict_all(&images, &record.weights, eval_cfg.exec)?;
    let report = evaluate_dataset(&predictions, &gts, eval_cfg)?;
    Ok(RunOutcome {
        record,
        report,
        predictions,
    })
}

/// Mean predicted probability over all boundary pixels (radius `r`) of the
/// given ground-truth maps.
pub fn boundary_mean(preds: &[PixelGrid], gts: &[BinaryMap], r: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, g) in preds.iter().zip(gts) {
        let mask = classify(g, r)?;
        for (&v, &c) in p.as_slice().iter().zip(mask.classes()) {
            if c == PixelClass::Boundary {
                sum += v;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Usage("no boundary pixels to average".into()));
    }
    Ok(sum / n as f64)
}

/// Mean of `values` over consecutive non-overlapping windows of `window`
/// (a trailing partial window is averaged as well).
pub fn windowed_means(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub b_e: f64,
    pub b_b: f64,
    pub b_t: f64,
    pub ods: f64,
    pub ois: f64,
    pub ap: f64,
}

/// Trains and evaluates one EBT model per `(b_b, b_t)` cell, with `b_e`
/// taken from the base configuration. Rows are ordered `b_b`-major.
pub fn sweep(base: &Experiment, b_b_grid: &[f64], b_t_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if b_b_grid.is_empty() || b_t_grid.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    let (train_set, test_set) = base.datasets()?;
    let cells: Vec<(f64, f64)> = b_b_grid
        .iter()
        .flat_map(|&b| b_t_grid.iter().map(move |&t| (b, t)))
        .collect();
    let exec = base.train.exec;
    exec.map(&cells, |&(b_b, b_t)| -> Result<SweepRow> {
        let mut train_cfg = base.train.clone();
        train_cfg.loss_kind = crate::losses::LossKind::Ebt;
        train_cfg.params.b_b = b_b;
        train_cfg.params.b_t = b_t;
        let out = train_and_evaluate(&train_set, &test_set, &train_cfg, &base.eval)?;
        Ok(SweepRow {
            b_e: train_cfg.params.b_e,
            b_b,
            b_t,
            ods: out.report.ods,
            ois: out.report.ois,
            ap: out.report.ap,
        })
    })
    .into_iter()
    .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("b_e,b_b,b_t,ods,ois,ap\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.b_e, r.b_b, r.b_t, r.ods, r.ois, r.ap
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        assert_eq!(windowed_means(&[1.0, 3.0, 5.0, 7.0, 9.0], 2), vec![2.0, 6.0, 9.0]);
    }

    #[test]
    fn empty_grid_is_usage_error() {
        let base = Experiment::default();
        assert!(matches!(sweep(&base, &[], &[0.5]), Err(Error::Usage(_))));
    }
}
