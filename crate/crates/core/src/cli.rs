//! Subcommand implementations behind the `ebt` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::datapipe::{
    load_gt, load_image, load_sample_set, paired_stems, patch_infer, save_prediction,
    save_sample_set, synth_dataset, PatchPlan, SampleSet,
};
use crate::error::{Error, Result};
use crate::evaluator::evaluate_dataset;
use crate::exec::ExecMode;
use crate::experiment::{sweep, sweep_csv};
use crate::gradcheck::{run_suite, MAX_REL_ERROR};
use crate::grid::{BinaryMap, PixelGrid};
use crate::regions::{class_weights, classify, PixelClass};
use crate::toymodel::{predict, train, ModelWeights};

#[derive(Debug, Parser)]
#[command(name = "ebt", version, about = "Edge-boundary-texture loss experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

/// Settings shared by all subcommands. Each overrides the same key from
/// `--config`.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Plain-text key=value file (one pair per line, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Boundary radius in pixels.
    #[arg(long, global = true)]
    pub r: Option<String>,
    #[arg(long, global = true)]
    pub b_e: Option<String>,
    #[arg(long, global = true)]
    pub b_b: Option<String>,
    #[arg(long, global = true)]
    pub b_t: Option<String>,
    /// WBCE non-edge balance factor.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Log clamp.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    /// Matching tolerance in pixels (Euclidean).
    #[arg(long, global = true)]
    pub tolerance: Option<String>,
    /// Either a count `n` (uniform `i/(n+1)`) or a comma-separated list.
    #[arg(long, global = true)]
    pub thresholds: Option<String>,
    #[arg(long, global = true)]
    pub patch: Option<String>,
    #[arg(long, global = true)]
    pub stride: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<String>,
    /// `wbce` or `ebt`.
    #[arg(long, global = true)]
    pub loss: Option<String>,
    #[arg(long, global = true)]
    pub lr: Option<String>,
    #[arg(long, global = true)]
    pub weight_decay: Option<String>,
    /// Training crop side; 0 trains on whole images.
    #[arg(long, global = true)]
    pub crop: Option<String>,
    /// Number of synthetic training scenes.
    #[arg(long, global = true)]
    pub images: Option<String>,
    /// Number of synthetic held-out scenes.
    #[arg(long, global = true)]
    pub test_images: Option<String>,
    /// Synthetic canvas side.
    #[arg(long, global = true)]
    pub canvas: Option<String>,
    #[arg(long, global = true)]
    pub shapes_min: Option<String>,
    #[arg(long, global = true)]
    pub shapes_max: Option<String>,
    #[arg(long, global = true)]
    pub noise: Option<String>,
    /// Comma-separated B_B values for `sweep`.
    #[arg(long, global = true)]
    pub b_b_grid: Option<String>,
    /// Comma-separated B_T values for `sweep`.
    #[arg(long, global = true)]
    pub b_t_grid: Option<String>,
}

impl CommonArgs {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        let fields: [(&'static str, &Option<String>); 24] = [
            ("r", &self.r),
            ("b_e", &self.b_e),
            ("b_b", &self.b_b),
            ("b_t", &self.b_t),
            ("lambda", &self.lambda),
            ("epsilon", &self.epsilon),
            ("tolerance", &self.tolerance),
            ("thresholds", &self.thresholds),
            ("patch", &self.patch),
            ("stride", &self.stride),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("loss", &self.loss),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("crop", &self.crop),
            ("images", &self.images),
            ("test_images", &self.test_images),
            ("canvas", &self.canvas),
            ("shapes_min", &self.shapes_min),
            ("shapes_max", &self.shapes_max),
            ("noise", &self.noise),
            ("b_b_grid", &self.b_b_grid),
            ("b_t_grid", &self.b_t_grid),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.pairs() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a ground-truth map into edge/boundary/texture and write a
    /// 3-level visualisation (edge 255, boundary 128, texture 0).
    /// Ground-truth levels above 127 are edges.
    Regions {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted edge maps against ground truth (matching stems).
    Eval {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        /// CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the pixel classifier; writes history.csv and weights.txt.
    Train {
        /// Sample root with images/ and edges/; synthetic scenes if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Patchwise prediction of every PNG in a directory into <out>/pred/.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        image_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate one EBT model per (B_B, B_T) cell on synthetic
    /// scenes.
    Sweep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of all analytic gradients.
    Gradcheck {
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
    /// Write a synthetic sample set in the images/ + edges/ layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

/// What a subcommand printed and whether its internal checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub ok: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, ok: true }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.common.resolve()?;
    match &cli.command {
        Command::Regions { gt, out } => cmd_regions(gt, out, &cfg),
        Command::Eval {
            pred_dir,
            gt_dir,
            out,
        } => cmd_eval(pred_dir, gt_dir, out, &cfg),
        Command::Train { data, out } => cmd_train(data.as_deref(), out, &cfg),
        Command::Infer {
            weights,
            image_dir,
            out,
        } => cmd_infer(weights, image_dir, out, &cfg),
        Command::Sweep { out } => cmd_sweep(out, &cfg),
        Command::Gradcheck { size, instances } => cmd_gradcheck(cfg.seed, *size, *instances),
        Command::Synth { out } => cmd_synth(out, &cfg),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

const REGION_LEVELS: [(PixelClass, f64); 3] = [
    (PixelClass::Edge, 1.0),
    (PixelClass::Boundary, 128.0 / 255.0),
    (PixelClass::Texture, 0.0),
];

/// Reads a 3-level region visualisation back into class counts
/// `(edge, boundary, texture)`.
pub fn decode_region_counts(path: &Path) -> Result<(usize, usize, usize)> {
    let img = load_image(path)?;
    let mut counts = (0, 0, 0);
    for &v in img.as_slice() {
        match (v * 255.0).round() as u8 {
            255 => counts.0 += 1,
            128 => counts.1 += 1,
            0 => counts.2 += 1,
            other => return Err(Error::Value(format!("unexpected region level {other}"))),
        }
    }
    Ok(counts)
}

pub fn cmd_regions(gt_path: &Path, out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let gt = load_gt(gt_path)?;
    let mask = classify(&gt, cfg.loss.r)?;
    let vis = PixelGrid::new(
        mask.height(),
        mask.width(),
        mask.classes()
            .iter()
            .map(|c| REGION_LEVELS.iter().find(|(k, _)| k == c).map_or(0.0, |l| l.1))
            .collect(),
    )?;
    crate::datapipe::save_gray(out, &vis)?;
    let (e, b, t) = mask.counts();
    let w = class_weights(&mask);
    Ok(Outcome::ok(format!(
        "r={} counts E={e} B={b} T={t}\nweights w_e={:.6} w_b={:.6} w_t={:.6}\n",
        cfg.loss.r, w.w_e, w.w_b, w.w_t
    )))
}

pub fn cmd_eval(pred_dir: &Path, gt_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let pairs = paired_stems(pred_dir, gt_dir)?;
    let mut preds = Vec::with_capacity(pairs.len());
    let mut gts = Vec::with_capacity(pairs.len());
    for (_, pred_path, gt_path) in &pairs {
        preds.push(load_image(pred_path)?);
        gts.push(load_gt(gt_path)?);
    }
    let report = evaluate_dataset(&preds, &gts, &cfg.eval_config())?;
    write_file(out, &report.to_csv())?;
    Ok(Outcome::ok(format!("{}\n", report.summary_line())))
}

fn training_set(data: Option<&Path>, cfg: &RunConfig) -> Result<SampleSet> {
    match data {
        Some(root) => load_sample_set(root),
        None => synth_dataset(&cfg.synth_spec(), cfg.images),
    }
}

pub fn cmd_train(data: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let set = training_set(data, cfg)?;
    let record = train(&set.pairs(), &cfg.train_config())?;
    write_file(&out.join("history.csv"), &record.history_csv())?;
    record.weights.save(&out.join("weights.txt"))?;
    let last = record.losses.last().copied().unwrap_or(0.0);
    Ok(Outcome::ok(format!(
        "loss={} epochs={} final_loss={last:.6} weights={}\n",
        record.loss_kind,
        record.losses.len(),
        out.join("weights.txt").display()
    )))
}

pub fn cmd_infer(weights: &Path, image_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let weights = ModelWeights::load(weights)?;
    let files = crate::datapipe::list_pngs(image_dir)?;
    if files.is_empty() {
        return Err(Error::Usage(format!("no PNG files in {}", image_dir.display())));
    }
    for (stem, path) in &files {
        let image = load_image(path)?;
        let plan = PatchPlan::new(image.height(), image.width(), cfg.patch, cfg.stride)?;
        let pred = patch_infer(|tile| predict(tile, &weights), &image, &plan, ExecMode::default())?;
        save_prediction(out, stem, &pred)?;
    }
    Ok(Outcome::ok(format!(
        "wrote {} predictions to {}\n",
        files.len(),
        out.join("pred").display()
    )))
}

pub fn cmd_sweep(out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let rows = sweep(&cfg.experiment(), &cfg.b_b_grid, &cfg.b_t_grid)?;
    write_file(out, &sweep_csv(&rows))?;
    let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| {
        (lo.min(r.ods), hi.max(r.ods))
    });
    Ok(Outcome::ok(format!(
        "{} configurations, ODS range {lo:.6}..{hi:.6} (spread {:.6})\n",
        rows.len(),
        hi - lo
    )))
}

pub fn cmd_gradcheck(seed: u64, size: usize, instances: usize) -> Result<Outcome> {
    if size == 0 || instances == 0 {
        return Err(Error::Usage("size and instances must be positive".into()));
    }
    let rep = run_suite(seed, size, instances)?;
    let text = format!(
        "instances={} size={size}\n\
         dL/dpred wbce max_rel_err={:.3e}\n\
         dL/dpred ebt  max_rel_err={:.3e}\n\
         dL/dw    wbce max_rel_err={:.3e}\n\
         dL/dw    ebt  max_rel_err={:.3e}\n\
         max_rel_err={:.3e} limit={MAX_REL_ERROR:.0e} {}\n",
        rep.instances,
        rep.pred_wbce,
        rep.pred_ebt,
        rep.weights_wbce,
        rep.weights_ebt,
        rep.max(),
        if rep.passed() { "PASS" } else { "FAIL" }
    );
    Ok(Outcome {
        text,
        ok: rep.passed(),
    })
}

pub fn cmd_synth(out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let set = synth_dataset(&cfg.synth_spec(), cfg.images)?;
    save_sample_set(out, &set)?;
    let edges: usize = set.samples.iter().map(|s| s.gt.count_ones()).sum();
    Ok(Outcome::ok(format!(
        "wrote {} scenes ({edges} edge pixels) to {}\n",
        set.len(),
        out.display()
    )))
}

/// Convenience for callers that already hold maps in memory.
pub fn region_counts(gt: &BinaryMap, r: usize) -> Result<(usize, usize, usize)> {
    Ok(classify(gt, r)?.counts())
}
