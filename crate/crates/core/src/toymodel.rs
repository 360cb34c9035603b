//! Smallest edge-sensitive differentiable model that exercises the losses:
//! a fixed bank of linear filters feeding a per-pixel logistic head, trained
//! with hand-written backpropagation and Adam.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_same_shape, Error, Result};
use crate::exec::ExecMode;
use crate::grid::{BinaryMap, PixelGrid};
use crate::losses::{loss_and_grad, LossKind, LossParams, LossValue};
use crate::regions::{classify, TriClassMask};

/// Number of feature channels produced by [`featurize`].
pub const NUM_FEATURES: usize = 8;

/// Identifier of the filter bank written into weight files.
pub const FEATURE_BANK_ID: &str = "sobel-lap-gauss1-gauss2-raw-bias";

const WEIGHTS_FORMAT: &str = "ebt-toymodel";
const WEIGHTS_VERSION: u32 = 1;

/// Channel order of a [`FeatureStack`].
pub mod channel {
    pub const GRAD_X: usize = 0;
    pub const GRAD_Y: usize = 1;
    pub const GRAD_MAG: usize = 2;
    pub const LAPLACIAN: usize = 3;
    pub const GAUSS_1: usize = 4;
    pub const GAUSS_2: usize = 5;
    pub const RAW: usize = 6;
    pub const BIAS: usize = 7;
}

pub(crate) const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub(crate) const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
pub(crate) const LAPLACIAN: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Normalised 1-D Gaussian taps, truncated at `3 sigma`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

fn convolve3x3(image: &PixelGrid, k: &[[f64; 3]; 3]) -> PixelGrid {
    let mut out = image.clone();
    for row in 0..image.height() {
        for col in 0..image.width() {
            let mut acc = 0.0;
            for (i, krow) in k.iter().enumerate() {
                for (j, &kv) in krow.iter().enumerate() {
                    if kv != 0.0 {
                        acc += kv
                            * image.get_clamped(
                                row as isize + i as isize - 1,
                                col as isize + j as isize - 1,
                            );
                    }
                }
            }
            out.set(row, col, acc);
        }
    }
    out
}

fn separable(image: &PixelGrid, taps: &[f64]) -> PixelGrid {
    let radius = (taps.len() / 2) as isize;
    let mut tmp = image.clone();
    for row in 0..image.height() {
        for col in 0..image.width() {
            let acc = taps
                .iter()
                .enumerate()
                .map(|(j, &t)| t * image.get_clamped(row as isize, col as isize + j as isize - radius))
                .sum();
            tmp.set(row, col, acc);
        }
    }
    let mut out = image.clone();
    for row in 0..image.height() {
        for col in 0..image.width() {
            let acc = taps
                .iter()
                .enumerate()
                .map(|(i, &t)| t * tmp.get_clamped(row as isize + i as isize - radius, col as isize))
                .sum();
            out.set(row, col, acc);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    channels: Vec<PixelGrid>,
}

impl FeatureStack {
    pub fn channels(&self) -> &[PixelGrid] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &PixelGrid {
        &self.channels[k]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| c.crop(top, left, height, width))
            .collect::<Result<_>>()?;
        Ok(Self { channels })
    }
}

/// Fixed filter responses with replicate borders: Sobel x/y, gradient
/// magnitude, 4-neighbour Laplacian, Gaussian blurs (sigma 1 and 2), the raw
/// intensity and a constant bias channel.
pub fn featurize(image: &PixelGrid) -> FeatureStack {
    let gx = convolve3x3(image, &SOBEL_X);
    let gy = convolve3x3(image, &SOBEL_Y);
    let mag = PixelGrid::new(
        image.height(),
        image.width(),
        gx.as_slice()
            .iter()
            .zip(gy.as_slice())
            .map(|(a, b)| a.hypot(*b))
            .collect(),
    )
    .expect("shape preserved");
    let lap = convolve3x3(image, &LAPLACIAN);
    let g1 = separable(image, &gaussian_kernel(1.0));
    let g2 = separable(image, &gaussian_kernel(2.0));
    let bias = image.map(|_| 1.0);
    FeatureStack {
        channels: vec![gx, gy, mag, lap, g1, g2, image.clone(), bias],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights(pub Vec<f64>);

impl ModelWeights {
    pub fn zeros() -> Self {
        Self(vec![0.0; NUM_FEATURES])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Versioned text record: format tag, feature-bank id, arity, weights.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format={WEIGHTS_FORMAT}");
        let _ = writeln!(s, "version={WEIGHTS_VERSION}");
        let _ = writeln!(s, "feature_bank={FEATURE_BANK_ID}");
        let _ = writeln!(s, "k={}", self.0.len());
        let ws: Vec<String> = self.0.iter().map(|w| format!("{w:e}")).collect();
        let _ = writeln!(s, "weights={}", ws.join(","));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut format = None;
        let mut version = None;
        let mut bank = None;
        let mut k = None;
        let mut weights = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Value(format!("malformed weight line {line:?}")))?;
            match key.trim() {
                "format" => format = Some(value.trim().to_string()),
                "version" => version = value.trim().parse::<u32>().ok(),
                "feature_bank" => bank = Some(value.trim().to_string()),
                "k" => k = value.trim().parse::<usize>().ok(),
                "weights" => {
                    weights = Some(
                        value
                            .split(',')
                            .map(|w| w.trim().parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|e| Error::Value(format!("bad weight value: {e}")))?,
                    )
                }
                other => return Err(Error::Value(format!("unknown weight key {other:?}"))),
            }
        }
        if format.as_deref() != Some(WEIGHTS_FORMAT) || version != Some(WEIGHTS_VERSION) {
            return Err(Error::Value("unsupported weight file format".into()));
        }
        if bank.as_deref() != Some(FEATURE_BANK_ID) {
            return Err(Error::Value(format!("feature bank mismatch: {bank:?}")));
        }
        let weights = weights.ok_or_else(|| Error::Value("missing weights".into()))?;
        if k != Some(weights.len()) || weights.len() != NUM_FEATURES {
            return Err(Error::Arity {
                expected: NUM_FEATURES,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite weight".into()));
        }
        Ok(Self(weights))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn check_arity(features: &FeatureStack, weights: &ModelWeights) -> Result<()> {
    if features.channels.len() != weights.0.len() {
        return Err(Error::Arity {
            expected: features.channels.len(),
            actual: weights.0.len(),
        });
    }
    Ok(())
}

/// Per-pixel `sigmoid(Σ_k w_k f_k)`.
pub fn forward(features: &FeatureStack, weights: &ModelWeights) -> Result<PixelGrid> {
    check_arity(features, weights)?;
    let (h, w) = features.shape();
    let mut z = vec![0.0; h * w];
    for (ch, &wk) in features.channels.iter().zip(&weights.0) {
        if wk == 0.0 {
            continue;
        }
        for (zi, &f) in z.iter_mut().zip(ch.as_slice()) {
            *zi += wk * f;
        }
    }
    PixelGrid::new(h, w, z.into_iter().map(sigmoid).collect())
}

pub fn predict(image: &PixelGrid, weights: &ModelWeights) -> Result<PixelGrid> {
    forward(&featurize(image), weights)
}

/// Loss and its gradient with respect to the model weights.
///
/// `mask` is used for EBT when supplied; otherwise it is derived from `gt`.
pub fn weight_grad(
    features: &FeatureStack,
    weights: &ModelWeights,
    gt: &BinaryMap,
    mask: Option<&TriClassMask>,
    params: &LossParams,
    kind: LossKind,
) -> Result<(LossValue, Vec<f64>)> {
    ensure_same_shape(gt.shape(), features.shape())?;
    let pred = forward(features, weights)?;
    let (loss, dpred) = loss_and_grad(kind, &pred, gt, mask, params)?;
    let dz: Vec<f64> = dpred
        .grid()
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .map(|(&g, &p)| g * p * (1.0 - p))
        .collect();
    let grad = features
        .channels
        .iter()
        .map(|ch| dz.iter().zip(ch.as_slice()).map(|(d, f)| d * f).sum())
        .collect();
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

pub const DEFAULT_LR: f64 = 1e-4;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-8;

impl OptimState {
    pub fn new(arity: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            step: 0,
            m: vec![0.0; arity],
            v: vec![0.0; arity],
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One Adam update with bias-corrected moments and decoupled weight
    /// decay (`w <- w - lr * wd * w` before the moment step).
    pub fn adam_step(&mut self, weights: &mut ModelWeights, grad: &[f64]) -> Result<()> {
        if grad.len() != weights.0.len() || grad.len() != self.m.len() {
            return Err(Error::Arity {
                expected: self.m.len(),
                actual: grad.len(),
            });
        }
        if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("gradient component {g}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, w) in weights.0.iter_mut().enumerate() {
            let g = grad[k];
            *w -= self.lr * self.weight_decay * *w;
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub params: LossParams,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub weight_decay: f64,
    /// Square crop side; `None` trains on whole images.
    pub crop: Option<usize>,
    /// Crops are redrawn every this many epochs.
    pub crop_every: usize,
    pub exec: ExecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Ebt,
            params: LossParams::default(),
            epochs: 200,
            seed: 0,
            lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            crop: None,
            crop_every: 5,
            exec: ExecMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub losses: Vec<f64>,
    pub weights: ModelWeights,
    pub seed: u64,
    pub loss_kind: LossKind,
}

impl TrainRecord {
    /// `epoch,loss` rows.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(s, "{},{:.12e}", i + 1, l);
        }
        s
    }
}

struct Prepared {
    features: FeatureStack,
    gt: BinaryMap,
}

struct Active {
    features: FeatureStack,
    gt: BinaryMap,
    mask: Option<TriClassMask>,
}

/// Full-batch training: every epoch averages the per-image gradients of all
/// edge-bearing samples (summed in dataset order) and takes one Adam step.
/// Images whose (cropped) ground truth has no edges are skipped.
pub fn train(dataset: &[(PixelGrid, BinaryMap)], cfg: &TrainConfig) -> Result<TrainRecord> {
    if dataset.is_empty() {
        return Err(Error::Usage("empty training set".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::Usage("epochs must be at least 1".into()));
    }
    cfg.params.validate()?;
    for (img, gt) in dataset {
        ensure_same_shape(gt.shape(), img.shape())?;
    }
    if dataset.iter().all(|(_, gt)| gt.count_ones() == 0) {
        return Err(Error::Usage("every training image is edge-free".into()));
    }

    let prepared: Vec<Prepared> = cfg.exec.map(dataset, |(img, gt)| Prepared {
        features: featurize(img),
        gt: gt.clone(),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = ModelWeights::zeros();
    let mut opt = OptimState::new(NUM_FEATURES, cfg.lr, cfg.weight_decay);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut active: Vec<Active> = Vec::new();
    let every = cfg.crop_every.max(1);

    for epoch in 0..cfg.epochs {
        if epoch == 0 || (cfg.crop.is_some() && epoch % every == 0) {
            let offsets: Vec<Window> = prepared
                .iter()
                .map(|p| crop_window(p.gt.shape(), cfg.crop, &mut rng))
                .collect();
            let jobs: Vec<(&Prepared, Window)> = prepared.iter().zip(offsets).collect();
            active = cfg
                .exec
                .map(&jobs, |(p, (top, left, h, w))| -> Result<Option<Active>> {
                    let gt = p.gt.crop(*top, *left, *h, *w)?;
                    if gt.count_ones() == 0 {
                        return Ok(None);
                    }
                    let features = p.features.crop(*top, *left, *h, *w)?;
                    let mask = match cfg.loss_kind {
                        LossKind::Ebt => Some(classify(&gt, cfg.params.r)?),
                        LossKind::Wbce => None,
                    };
                    Ok(Some(Active { features, gt, mask }))
                })
                .into_iter()
                .filter_map(|r| r.transpose())
                .collect::<Result<_>>()?;
        }

        if active.is_empty() {
            losses.push(0.0);
            continue;
        }
        let results = cfg.exec.map(&active, |a| {
            weight_grad(
                &a.features,
                &weights,
                &a.gt,
                a.mask.as_ref(),
                &cfg.params,
                cfg.loss_kind,
            )
        });
        let n = active.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; NUM_FEATURES];
        for r in results {
            let (l, g) = r?;
            loss += l.value;
            for (acc, gk) in grad.iter_mut().zip(g) {
                *acc += gk;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        losses.push(loss / n);
        opt.adam_step(&mut weights, &grad)?;
    }

    Ok(TrainRecord {
        losses,
        weights,
        seed: cfg.seed,
        loss_kind: cfg.loss_kind,
    })
}

/// `(top, left, height, width)`.
type Window = (usize, usize, usize, usize);

/// A uniformly placed crop window. Images smaller than the crop are used
/// whole.
fn crop_window((h, w): (usize, usize), crop: Option<usize>, rng: &mut ChaCha8Rng) -> Window {
    match crop {
        None => (0, 0, h, w),
        Some(size) => {
            let ch = size.min(h);
            let cw = size.min(w);
            let top = rng.gen_range(0..=h - ch);
            let left = rng.gen_range(0..=w - cw);
            (top, left, ch, cw)
        }
    }
}
