//! Run configuration shared by the CLI subcommands.
//!
//! Values come from three layers: built-in defaults, an optional plain-text
//! `key=value` file (one pair per line, `#` starts a comment) and command
//! line flags. Later layers win. Keys accept `-` or `_` interchangeably.

use std::path::Path;

use crate::datapipe::{SynthSpec, DEFAULT_PATCH, DEFAULT_STRIDE, DESK_CROP};
use crate::error::{Error, Result};
use crate::evaluator::{default_thresholds, EvalConfig};
use crate::experiment::{Experiment, DEFAULT_SWEEP_B_B, DEFAULT_SWEEP_B_T};
use crate::losses::{LossKind, LossParams};
use crate::toymodel::{TrainConfig, DEFAULT_LR, DEFAULT_WEIGHT_DECAY};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub loss: LossParams,
    pub loss_kind: LossKind,
    pub tolerance: f64,
    pub thresholds: Vec<f64>,
    pub patch: usize,
    pub stride: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// `0` disables cropping.
    pub crop: usize,
    pub images: usize,
    pub test_images: usize,
    pub canvas: usize,
    pub shapes_min: usize,
    pub shapes_max: usize,
    pub noise: f64,
    pub b_b_grid: Vec<f64>,
    pub b_t_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        Self {
            loss: LossParams::default(),
            loss_kind: LossKind::Ebt,
            tolerance: 1.0,
            thresholds: default_thresholds(),
            patch: DEFAULT_PATCH,
            stride: DEFAULT_STRIDE,
            seed: 0,
            epochs: 200,
            lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            crop: DESK_CROP,
            images: 32,
            test_images: 16,
            canvas: synth.height,
            shapes_min: synth.shapes.0,
            shapes_max: synth.shapes.1,
            noise: synth.noise,
            b_b_grid: DEFAULT_SWEEP_B_B.to_vec(),
            b_t_grid: DEFAULT_SWEEP_B_T.to_vec(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Param(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// A single integer `n` means `n` uniform thresholds `i / (n + 1)`;
/// otherwise a comma-separated list.
fn parse_thresholds(value: &str) -> Result<Vec<f64>> {
    if let Ok(n) = value.trim().parse::<usize>() {
        if n == 0 {
            return Err(Error::Param("thresholds: count must be positive".into()));
        }
        return Ok((1..=n).map(|i| i as f64 / (n + 1) as f64).collect());
    }
    parse_list("thresholds", value)
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "r", "b_e", "b_b", "b_t", "lambda", "epsilon", "loss", "tolerance", "thresholds",
        "patch", "stride", "seed", "epochs", "lr", "weight_decay", "crop", "images",
        "test_images", "canvas", "shapes_min", "shapes_max", "noise", "b_b_grid", "b_t_grid",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let k = key.as_str();
        match k {
            "r" => self.loss.r = parse(k, value)?,
            "b_e" => self.loss.b_e = parse(k, value)?,
            "b_b" => self.loss.b_b = parse(k, value)?,
            "b_t" => self.loss.b_t = parse(k, value)?,
            "lambda" => self.loss.lambda = parse(k, value)?,
            "epsilon" => self.loss.epsilon = parse(k, value)?,
            "loss" => self.loss_kind = value.trim().parse()?,
            "tolerance" => self.tolerance = parse(k, value)?,
            "thresholds" => self.thresholds = parse_thresholds(value)?,
            "patch" => self.patch = parse(k, value)?,
            "stride" => self.stride = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "epochs" => self.epochs = parse(k, value)?,
            "lr" => self.lr = parse(k, value)?,
            "weight_decay" => self.weight_decay = parse(k, value)?,
            "crop" => self.crop = parse(k, value)?,
            "images" => self.images = parse(k, value)?,
            "test_images" => self.test_images = parse(k, value)?,
            "canvas" => self.canvas = parse(k, value)?,
            "shapes_min" => self.shapes_min = parse(k, value)?,
            "shapes_max" => self.shapes_max = parse(k, value)?,
            "noise" => self.noise = parse(k, value)?,
            "b_b_grid" => self.b_b_grid = parse_list(k, value)?,
            "b_t_grid" => self.b_t_grid = parse_list(k, value)?,
            other => return Err(Error::Param(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Config {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.eval_config().validate()?;
        self.synth_spec().validate()?;
        if self.epochs == 0 {
            return Err(Error::Param("epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Param("lr and weight_decay must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            tolerance: self.tolerance,
            thresholds: self.thresholds.clone(),
            ..EvalConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss_kind: self.loss_kind,
            params: self.loss,
            epochs: self.epochs,
            seed: self.seed,
            lr: self.lr,
            weight_decay: self.weight_decay,
            crop: (self.crop > 0).then_some(self.crop),
            ..TrainConfig::default()
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            height: self.canvas,
            width: self.canvas,
            shapes: (self.shapes_min, self.shapes_max),
            noise: self.noise,
            ..SynthSpec::default()
        }
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            synth: self.synth_spec(),
            train_images: self.images,
            test_images: self.test_images,
            train: self.train_config(),
            eval: self.eval_config(),
        }
    }
}
