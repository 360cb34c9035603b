//! Sample I/O, synthetic scenes with exact edge maps, the geometric
//! augmentation pipeline and patchwise inference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure_same_shape, Error, Result};
use crate::exec::ExecMode;
use crate::grid::{BinaryMap, PixelGrid};

/// 8-bit ground-truth levels strictly above this are edges.
pub const GT_THRESHOLD: u8 = 127;

/// Pyramid levels are produced while at least one side stays at or above
/// this size.
pub const PYRAMID_BOUND: usize = 640;

pub const DEFAULT_PATCH: usize = 320;
pub const DEFAULT_STRIDE: usize = 304;

/// Crop side used when training on the 64x64 synthetic canvases.
pub const DESK_CROP: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: PixelGrid,
    pub gt: BinaryMap,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            ensure_same_shape(s.image.shape(), s.gt.shape())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pairs(&self) -> Vec<(PixelGrid, BinaryMap)> {
        self.samples
            .iter()
            .map(|s| (s.image.clone(), s.gt.clone()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Synthetic scenes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Rectangle,
    Circle,
    Polygon,
}

/// A filled shape in pixel coordinates; pixel `(r, c)` is covered when its
/// centre `(r, c)` lies inside.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Circle {
        cy: f64,
        cx: f64,
        radius: f64,
    },
    /// Vertices as `(row, col)`, in order around the boundary.
    Polygon { vertices: Vec<(f64, f64)> },
}

impl Shape {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        match self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => row >= *top && row < top + height && col >= *left && col < left + width,
            Shape::Circle { cy, cx, radius } => {
                let (dy, dx) = (row as f64 - cy, col as f64 - cx);
                dy * dy + dx * dx <= radius * radius
            }
            Shape::Polygon { vertices } => {
                let (y, x) = (row as f64, col as f64);
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let (yi, xi) = vertices[i];
                    let (yj, xj) = vertices[(i + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Inclusive range of shapes per scene.
    pub shapes: (usize, usize),
    pub kinds: Vec<ShapeKind>,
    /// Range of absolute intensity differences from the background; the
    /// lower end is also the minimum separation between any two levels.
    pub contrast: (f64, f64),
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 64,
            width: 64,
            shapes: (2, 5),
            kinds: vec![ShapeKind::Rectangle, ShapeKind::Circle, ShapeKind::Polygon],
            contrast: (0.15, 0.6),
            noise: 0.02,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::Dimension {
                height: self.height,
                width: self.width,
            });
        }
        if self.shapes.0 > self.shapes.1 {
            return Err(Error::Param("shape count range is inverted".into()));
        }
        if self.shapes.1 > 0 && self.kinds.is_empty() {
            return Err(Error::Param("no shape kinds enabled".into()));
        }
        let (lo, hi) = self.contrast;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(Error::Param(format!("bad contrast range ({lo}, {hi})")));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Param(format!("bad noise level {}", self.noise)));
        }
        Ok(())
    }
}

/// Paints `shapes` in order over `background` and traces their visible
/// outlines.
///
/// A pixel is an edge iff it belongs to a painted shape and one of its
/// 4-neighbours shows something painted earlier (an underlying shape or the
/// background). Every region border is therefore traced exactly once, on the
/// side of the shape in front.
pub fn render_scene(
    height: usize,
    width: usize,
    shapes: &[(Shape, f64)],
    background: f64,
    noise: f64,
    seed: u64,
) -> Result<(PixelGrid, BinaryMap)> {
    let mut layer = vec![0usize; height * width];
    for (k, (shape, _)) in shapes.iter().enumerate() {
        for r in 0..height {
            for c in 0..width {
                if shape.contains(r, c) {
                    layer[r * width + c] = k + 1;
                }
            }
        }
    }
    let gt = BinaryMap::from_fn(height, width, |r, c| {
        let l = layer[r * width + c];
        if l == 0 {
            return false;
        }
        let below = |rr: usize, cc: usize| layer[rr * width + cc] < l;
        (r > 0 && below(r - 1, c))
            || (r + 1 < height && below(r + 1, c))
            || (c > 0 && below(r, c - 1))
            || (c + 1 < width && below(r, c + 1))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = if noise > 0.0 {
        Some(Normal::new(0.0, noise).map_err(|e| Error::Param(e.to_string()))?)
    } else {
        None
    };
    let image = PixelGrid::from_fn(height, width, |r, c| {
        let l = layer[r * width + c];
        let base = if l == 0 { background } else { shapes[l - 1].1 };
        let n = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        (base + n).clamp(0.0, 1.0)
    })?;
    Ok((image, gt))
}

fn sample_shape(kind: ShapeKind, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Shape {
    let (hf, wf) = (h as f64, w as f64);
    let short = hf.min(wf);
    match kind {
        ShapeKind::Rectangle => {
            let height = rng.gen_range(h / 6..=h / 2).max(3);
            let width = rng.gen_range(w / 6..=w / 2).max(3);
            Shape::Rect {
                top: rng.gen_range(1..h - height),
                left: rng.gen_range(1..w - width),
                height,
                width,
            }
        }
        ShapeKind::Circle => {
            let radius = rng.gen_range(short / 10.0..short / 4.0);
            Shape::Circle {
                cy: rng.gen_range(radius + 1.0..hf - radius - 1.0),
                cx: rng.gen_range(radius + 1.0..wf - radius - 1.0),
                radius,
            }
        }
        ShapeKind::Polygon => {
            let n = rng.gen_range(3..=6);
            let reach = short / 4.0;
            let cy = rng.gen_range(reach + 1.0..hf - reach - 1.0);
            let cx = rng.gen_range(reach + 1.0..wf - reach - 1.0);
            let mut angles: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            angles.sort_by(f64::total_cmp);
            let vertices = angles
                .into_iter()
                .map(|a| {
                    let rad = rng.gen_range(reach * 0.4..reach);
                    (cy + rad * a.sin(), cx + rad * a.cos())
                })
                .collect();
            Shape::Polygon { vertices }
        }
    }
}

/// Draws a random scene fully determined by `spec.seed`.
pub fn synth_scene(spec: &SynthSpec) -> Result<(PixelGrid, BinaryMap)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background = rng.gen_range(0.2..0.8);
    let count = rng.gen_range(spec.shapes.0..=spec.shapes.1);
    let mut levels = vec![background];
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = *spec.kinds.choose(&mut rng).expect("kinds validated");
        let shape = sample_shape(kind, spec.height, spec.width, &mut rng);
        let mut level = background;
        for _ in 0..64 {
            let delta = rng.gen_range(spec.contrast.0..=spec.contrast.1);
            let mut v = if rng.gen_bool(0.5) {
                background + delta
            } else {
                background - delta
            };
            if !(0.0..=1.0).contains(&v) {
                v = 2.0 * background - v;
            }
            level = v.clamp(0.0, 1.0);
            if levels.iter().all(|l| (l - level).abs() >= spec.contrast.0) {
                break;
            }
        }
        levels.push(level);
        shapes.push((shape, level));
    }
    render_scene(
        spec.height,
        spec.width,
        &shapes,
        background,
        spec.noise,
        rng.gen(),
    )
}

/// `count` scenes whose seeds are drawn from `spec.seed`.
pub fn synth_dataset(spec: &SynthSpec, count: usize) -> Result<SampleSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = (0..count)
        .map(|i| {
            let s = SynthSpec {
                seed: rng.gen(),
                ..spec.clone()
            };
            let (image, gt) = synth_scene(&s)?;
            Ok(Sample {
                image,
                gt,
                id: format!("synth_{i:04}"),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SampleSet { samples })
}

// ---------------------------------------------------------------------------
// Augmentation

fn halve_image(img: &PixelGrid) -> PixelGrid {
    let (h, w) = img.shape();
    PixelGrid::from_fn(h.div_ceil(2), w.div_ceil(2), |r, c| {
        let mut sum = 0.0;
        let mut n = 0.0;
        for rr in 2 * r..(2 * r + 2).min(h) {
            for cc in 2 * c..(2 * c + 2).min(w) {
                sum += img.get(rr, cc);
                n += 1.0;
            }
        }
        sum / n
    })
    .expect("nonempty")
}

fn halve_gt(gt: &BinaryMap) -> BinaryMap {
    let (h, w) = gt.shape();
    BinaryMap::from_fn(h.div_ceil(2), w.div_ceil(2), |r, c| {
        (2 * r..(2 * r + 2).min(h)).any(|rr| (2 * c..(2 * c + 2).min(w)).any(|cc| gt.get(rr, cc)))
    })
    .expect("nonempty")
}

/// The input followed by successive half-resolution copies (2x2 mean for
/// the image, 2x2 max for the edges). A halved level is kept only while at
/// least one of its sides is still `>= 640`.
pub fn halving_pyramid(image: &PixelGrid, gt: &BinaryMap) -> Result<Vec<(PixelGrid, BinaryMap)>> {
    ensure_same_shape(image.shape(), gt.shape())?;
    let mut levels = vec![(image.clone(), gt.clone())];
    loop {
        let (img, g) = levels.last().expect("nonempty");
        let (h, w) = img.shape();
        let (nh, nw) = (h.div_ceil(2), w.div_ceil(2));
        if (nh < PYRAMID_BOUND && nw < PYRAMID_BOUND) || (nh, nw) == (h, w) {
            break;
        }
        let next = (halve_image(img), halve_gt(g));
        levels.push(next);
    }
    Ok(levels)
}

fn rot90_pixels(g: &PixelGrid) -> PixelGrid {
    let (h, w) = g.shape();
    PixelGrid::from_fn(w, h, |r, c| g.get(h - 1 - c, r)).expect("nonempty")
}

fn rot90_binary(g: &BinaryMap) -> BinaryMap {
    let (h, w) = g.shape();
    BinaryMap::from_fn(w, h, |r, c| g.get(h - 1 - c, r)).expect("nonempty")
}

pub fn hflip_pixels(g: &PixelGrid) -> PixelGrid {
    let w = g.width();
    PixelGrid::from_fn(g.height(), w, |r, c| g.get(r, w - 1 - c)).expect("nonempty")
}

pub fn hflip_binary(g: &BinaryMap) -> BinaryMap {
    let w = g.width();
    BinaryMap::from_fn(g.height(), w, |r, c| g.get(r, w - 1 - c)).expect("nonempty")
}

/// Rotations by 0, 90, 180 and 270 degrees (clockwise), each followed by
/// its horizontally flipped copy. The first entry is the input itself.
pub fn augment_8(image: &PixelGrid, gt: &BinaryMap) -> Result<Vec<(PixelGrid, BinaryMap)>> {
    ensure_same_shape(image.shape(), gt.shape())?;
    let mut out = Vec::with_capacity(8);
    let (mut img, mut g) = (image.clone(), gt.clone());
    for _ in 0..4 {
        out.push((img.clone(), g.clone()));
        out.push((hflip_pixels(&img), hflip_binary(&g)));
        img = rot90_pixels(&img);
        g = rot90_binary(&g);
    }
    Ok(out)
}

/// Mirror index into `0..n` without repeating the border sample
/// (`... 2 1 | 0 1 2 ... n-1 | n-2 ...`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn pad_reflect_pixels(g: &PixelGrid, h: usize, w: usize) -> PixelGrid {
    let (gh, gw) = g.shape();
    PixelGrid::from_fn(h, w, |r, c| g.get(reflect(r as isize, gh), reflect(c as isize, gw)))
        .expect("nonempty")
}

fn pad_reflect_binary(g: &BinaryMap, h: usize, w: usize) -> BinaryMap {
    let (gh, gw) = g.shape();
    BinaryMap::from_fn(h, w, |r, c| g.get(reflect(r as isize, gh), reflect(c as isize, gw)))
        .expect("nonempty")
}

/// `size x size` crop at a seeded uniform position, applied identically to
/// image and edges. Inputs smaller than `size` are reflect-padded first.
pub fn random_crop(
    image: &PixelGrid,
    gt: &BinaryMap,
    size: usize,
    seed: u64,
) -> Result<(PixelGrid, BinaryMap)> {
    ensure_same_shape(image.shape(), gt.shape())?;
    if size == 0 {
        return Err(Error::Param("crop size must be positive".into()));
    }
    let (h, w) = image.shape();
    let (ph, pw) = (h.max(size), w.max(size));
    let (image, gt) = if (ph, pw) != (h, w) {
        (pad_reflect_pixels(image, ph, pw), pad_reflect_binary(gt, ph, pw))
    } else {
        (image.clone(), gt.clone())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = rng.gen_range(0..=ph - size);
    let left = rng.gen_range(0..=pw - size);
    Ok((
        image.crop(top, left, size, size)?,
        gt.crop(top, left, size, size)?,
    ))
}

// ---------------------------------------------------------------------------
// Patchwise inference

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchPlan {
    pub patch: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    /// Top-left corners, row-major.
    pub offsets: Vec<(usize, usize)>,
}

fn axis_starts(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    if len <= patch {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + patch < len).collect();
    starts.push(len - patch);
    starts.dedup();
    starts
}

impl PatchPlan {
    /// Tiles an `height x width` image with `patch`-sized windows every
    /// `stride` pixels; the last window on each axis is pulled back to end
    /// flush with the border.
    pub fn new(height: usize, width: usize, patch: usize, stride: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension { height, width });
        }
        if patch == 0 || stride == 0 || stride > patch {
            return Err(Error::Param(format!(
                "need 0 < stride <= patch, got patch {patch} stride {stride}"
            )));
        }
        let rows = axis_starts(height, patch, stride);
        let cols = axis_starts(width, patch, stride);
        let offsets = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            patch,
            stride,
            height,
            width,
            offsets,
        })
    }

    pub fn overlap(&self) -> usize {
        self.patch - self.stride
    }
}

/// Runs `predict` on every patch of `plan` and averages overlapping
/// predictions. Patches that extend past a small image are reflect-padded
/// and their predictions cropped back.
pub fn patch_infer<F>(predict: F, image: &PixelGrid, plan: &PatchPlan, exec: ExecMode) -> Result<PixelGrid>
where
    F: Fn(&PixelGrid) -> Result<PixelGrid> + Sync + Send,
{
    if image.shape() != (plan.height, plan.width) {
        return Err(Error::Shape {
            expected: (plan.height, plan.width),
            actual: image.shape(),
        });
    }
    let (h, w) = image.shape();
    let (ph, pw) = (h.max(plan.patch), w.max(plan.patch));
    let padded = if (ph, pw) != (h, w) {
        pad_reflect_pixels(image, ph, pw)
    } else {
        image.clone()
    };

    let preds = exec
        .map(&plan.offsets, |&(top, left)| -> Result<PixelGrid> {
            let tile = padded.crop(top, left, plan.patch, plan.patch)?;
            let out = predict(&tile)?;
            ensure_same_shape(tile.shape(), out.shape())?;
            Ok(out)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut sum = vec![0.0; h * w];
    let mut hits = vec![0u32; h * w];
    for (&(top, left), pred) in plan.offsets.iter().zip(&preds) {
        for r in 0..plan.patch {
            let rr = top + r;
            if rr >= h {
                break;
            }
            for c in 0..plan.patch {
                let cc = left + c;
                if cc >= w {
                    break;
                }
                sum[rr * w + cc] += pred.get(r, c);
                hits[rr * w + cc] += 1;
            }
        }
    }
    PixelGrid::new(
        h,
        w,
        sum.iter().zip(&hits).map(|(s, &n)| s / f64::from(n)).collect(),
    )
}

// ---------------------------------------------------------------------------
// File I/O

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_luma(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path).map_err(image_err(path))?.to_luma8())
}

/// Grayscale image scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<PixelGrid> {
    let img = read_luma(path)?;
    PixelGrid::new(
        img.height() as usize,
        img.width() as usize,
        img.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
    )
}

/// Edge map with levels `> 127` as edges.
pub fn load_gt(path: &Path) -> Result<BinaryMap> {
    let img = read_luma(path)?;
    BinaryMap::new(
        img.height() as usize,
        img.width() as usize,
        img.pixels().map(|p| u8::from(p.0[0] > GT_THRESHOLD)).collect(),
    )
}

fn write_png(path: &Path, img: GrayImage) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    img.save(path).map_err(image_err(path))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `grid` as 8-bit grayscale, `round(v * 255)`, creating missing
/// parent directories.
pub fn save_gray(path: &Path, grid: &PixelGrid) -> Result<()> {
    let (h, w) = grid.shape();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([to_u8(grid.get(y as usize, x as usize))])
    });
    write_png(path, img)
}

/// Writes edges as 255 and background as 0.
pub fn save_binary(path: &Path, map: &BinaryMap) -> Result<()> {
    let (h, w) = map.shape();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if map.get(y as usize, x as usize) { 255 } else { 0 }])
    });
    write_png(path, img)
}

/// `<out>/pred/<stem>.png`.
pub fn save_prediction(out_root: &Path, stem: &str, pred: &PixelGrid) -> Result<PathBuf> {
    let dir = out_root.join("pred");
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(format!("{stem}.png"));
    save_gray(&path, pred)?;
    Ok(path)
}

/// PNG files in `dir` keyed by file stem.
pub fn list_pngs(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

/// Pairs `<dir_a>/<stem>.png` with `<dir_b>/<stem>.png`; any unmatched stem
/// is a usage error.
pub fn paired_stems(dir_a: &Path, dir_b: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let a = list_pngs(dir_a)?;
    let b = list_pngs(dir_b)?;
    if a.is_empty() {
        return Err(Error::Usage(format!("no PNG files in {}", dir_a.display())));
    }
    let only_a: Vec<_> = a.keys().filter(|k| !b.contains_key(*k)).collect();
    let only_b: Vec<_> = b.keys().filter(|k| !a.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::Usage(format!(
            "stem mismatch between {} and {}: {:?} / {:?}",
            dir_a.display(),
            dir_b.display(),
            only_a,
            only_b
        )));
    }
    Ok(a.into_iter()
        .map(|(stem, pa)| {
            let pb = b[&stem].clone();
            (stem, pa, pb)
        })
        .collect())
}

/// Loads `<root>/images/*.png` with `<root>/edges/*.png` of the same stem.
pub fn load_sample_set(root: &Path) -> Result<SampleSet> {
    let samples = paired_stems(&root.join("images"), &root.join("edges"))?
        .into_iter()
        .map(|(id, img_path, gt_path)| {
            let image = load_image(&img_path)?;
            let gt = load_gt(&gt_path)?;
            ensure_same_shape(image.shape(), gt.shape())?;
            Ok(Sample { image, gt, id })
        })
        .collect::<Result<_>>()?;
    Ok(SampleSet { samples })
}

/// Writes the standard `<root>/images`, `<root>/edges` layout.
pub fn save_sample_set(root: &Path, set: &SampleSet) -> Result<()> {
    let images = root.join("images");
    let edges = root.join("edges");
    std::fs::create_dir_all(&images).map_err(io_err(&images))?;
    std::fs::create_dir_all(&edges).map_err(io_err(&edges))?;
    for s in &set.samples {
        save_gray(&images.join(format!("{}.png", s.id)), &s.image)?;
        save_binary(&edges.join(format!("{}.png", s.id)), &s.gt)?;
    }
    Ok(())
}
