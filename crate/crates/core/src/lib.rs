//! Edge-boundary-texture (EBT) loss for edge detection, with its WBCE and
//! BCE baselines, the tri-class pixel taxonomy behind it, strict edge-map
//! evaluation (ODS / OIS / AP) and a small trainable pixel classifier used
//! to compare the losses end to end on synthetic scenes.

pub mod cli;
pub mod config;
pub mod datapipe;
pub mod error;
pub mod evaluator;
pub mod exec;
pub mod experiment;
pub mod gradcheck;
pub mod grid;
pub mod losses;
pub mod regions;
pub mod toymodel;

pub use error::{Error, Result};
pub use evaluator::{evaluate_dataset, match_maps, pr_at_threshold, EvalConfig, EvalReport, MatchCounts};
pub use exec::ExecMode;
pub use grid::{BinaryMap, PixelGrid};
pub use losses::{bce, ebt, ebt_grad, wbce, wbce_grad, GradGrid, LossKind, LossParams, LossValue};
pub use regions::{class_weights, classify, classify_oracle, ClassWeights, PixelClass, TriClassMask};
