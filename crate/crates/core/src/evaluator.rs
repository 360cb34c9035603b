//! Edge-map scoring: one-to-one correspondence between predicted and
//! ground-truth edge pixels under a Euclidean distance tolerance, and the
//! dataset-level ODS / OIS / AP summaries built on top of it.

use std::fmt::Write as _;

use crate::error::{ensure_same_shape, Error, Result};
use crate::exec::ExecMode;
use crate::grid::{BinaryMap, PixelGrid};

pub const DEFAULT_TOLERANCE: f64 = 1.0;

/// `0.01, 0.02, ..., 0.99`.
pub fn default_thresholds() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub tolerance: f64,
    pub thresholds: Vec<f64>,
    pub exec: ExecMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            thresholds: default_thresholds(),
            exec: ExecMode::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Param(format!(
                "tolerance must be a finite nonnegative number, got {}",
                self.tolerance
            )));
        }
        if self.thresholds.is_empty() {
            return Err(Error::Param("threshold list is empty".into()));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Param("thresholds must lie in (0, 1)".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Param("thresholds must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub matched_pred: usize,
    pub unmatched_pred: usize,
    pub matched_gt: usize,
    pub unmatched_gt: usize,
}

impl MatchCounts {
    pub fn predicted(&self) -> usize {
        self.matched_pred + self.unmatched_pred
    }

    pub fn ground_truth(&self) -> usize {
        self.matched_gt + self.unmatched_gt
    }

    /// `(precision, recall, f1)` with `0/0 := 0`.
    pub fn scores(&self) -> (f64, f64, f64) {
        let p = ratio(self.matched_pred, self.predicted());
        let r = ratio(self.matched_gt, self.ground_truth());
        (p, r, f1(p, r))
    }
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            matched_pred: self.matched_pred + o.matched_pred,
            unmatched_pred: self.unmatched_pred + o.unmatched_pred,
            matched_gt: self.matched_gt + o.matched_gt,
            unmatched_gt: self.unmatched_gt + o.unmatched_gt,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Integer offsets `(dr, dc, dr²+dc²)` within `tolerance`, sorted by squared
/// distance then row-major.
fn offsets_within(tolerance: f64) -> Vec<(isize, isize, usize)> {
    let reach = tolerance.floor() as isize;
    let tol2 = tolerance * tolerance;
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let d2 = (dr * dr + dc * dc) as usize;
            if d2 as f64 <= tol2 {
                out.push((dr, dc, d2));
            }
        }
    }
    out.sort_by_key(|&(dr, dc, d2)| (d2, dr, dc));
    out
}

/// Maximum-cardinality one-to-one matching between the edge pixels of
/// `pred_bin` and `gt` where a pair is admissible iff its Euclidean distance
/// is at most `tolerance`.
///
/// Pairs are first taken greedily in order of (distance, row-major pred
/// index, row-major gt index); Hopcroft-Karp augmentation then grows that
/// matching to maximum cardinality. Returned pairs are indices into
/// `pred_bin.edge_coords()` and `gt.edge_coords()`.
pub fn match_edges(
    pred_bin: &BinaryMap,
    gt: &BinaryMap,
    tolerance: f64,
) -> Result<Vec<(usize, usize)>> {
    ensure_same_shape(gt.shape(), pred_bin.shape())?;
    let (h, w) = gt.shape();
    let preds = pred_bin.edge_coords();
    let gts = gt.edge_coords();

    const NONE: usize = usize::MAX;
    let mut gt_at = vec![NONE; h * w];
    for (j, &(r, c)) in gts.iter().enumerate() {
        gt_at[r * w + c] = j;
    }

    let offsets = offsets_within(tolerance);
    // Adjacency lists are ordered by distance because `offsets` is.
    let mut adj: Vec<Vec<(usize, usize)>> = Vec::with_capacity(preds.len());
    for &(r, c) in &preds {
        let mut list = Vec::new();
        for &(dr, dc, d2) in &offsets {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                continue;
            }
            let j = gt_at[rr as usize * w + cc as usize];
            if j != NONE {
                list.push((d2, j));
            }
        }
        adj.push(list);
    }

    let mut pairs: Vec<(usize, usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&(d2, j)| (d2, i, j)))
        .collect();
    pairs.sort_unstable();

    let mut match_pred = vec![NONE; preds.len()];
    let mut match_gt = vec![NONE; gts.len()];
    for (_, i, j) in pairs {
        if match_pred[i] == NONE && match_gt[j] == NONE {
            match_pred[i] = j;
            match_gt[j] = i;
        }
    }

    let adj: Vec<Vec<usize>> = adj
        .into_iter()
        .map(|l| l.into_iter().map(|(_, j)| j).collect())
        .collect();
    hopcroft_karp(&adj, &mut match_pred, &mut match_gt);

    Ok(match_pred
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != NONE)
        .map(|(i, &j)| (i, j))
        .collect())
}

/// Augments an existing matching to maximum cardinality.
fn hopcroft_karp(adj: &[Vec<usize>], match_l: &mut [usize], match_r: &mut [usize]) {
    const NONE: usize = usize::MAX;
    const INF: usize = usize::MAX;
    let n = adj.len();
    let mut dist = vec![INF; n];
    let mut queue = Vec::with_capacity(n);
    let mut iter = vec![0usize; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut via: Vec<usize> = Vec::new();

    loop {
        queue.clear();
        for u in 0..n {
            if match_l[u] == NONE {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let m = match_r[v];
                if m == NONE {
                    found = true;
                } else if dist[m] == INF {
                    dist[m] = dist[u] + 1;
                    queue.push(m);
                }
            }
        }
        if !found {
            return;
        }

        iter.iter_mut().for_each(|i| *i = 0);
        for root in 0..n {
            if match_l[root] != NONE {
                continue;
            }
            stack.clear();
            via.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if iter[u] == adj[u].len() {
                    dist[u] = INF;
                    stack.pop();
                    via.pop();
                    continue;
                }
                let v = adj[u][iter[u]];
                iter[u] += 1;
                let m = match_r[v];
                if m == NONE {
                    via.push(v);
                    for (&l, &r) in stack.iter().zip(&via) {
                        match_l[l] = r;
                        match_r[r] = l;
                    }
                    break;
                } else if dist[m] != INF && dist[m] == dist[u] + 1 {
                    via.push(v);
                    stack.push(m);
                }
            }
        }
    }
}

pub fn match_maps(pred_bin: &BinaryMap, gt: &BinaryMap, tolerance: f64) -> Result<MatchCounts> {
    let matched = match_edges(pred_bin, gt, tolerance)?.len();
    Ok(MatchCounts {
        matched_pred: matched,
        unmatched_pred: pred_bin.count_ones() - matched,
        matched_gt: matched,
        unmatched_gt: gt.count_ones() - matched,
    })
}

pub fn counts_at_threshold(
    pred: &PixelGrid,
    gt: &BinaryMap,
    threshold: f64,
    tolerance: f64,
) -> Result<MatchCounts> {
    ensure_same_shape(gt.shape(), pred.shape())?;
    match_maps(&pred.threshold(threshold), gt, tolerance)
}

/// `(precision, recall, f1)` of `pred` binarised at `threshold`.
pub fn pr_at_threshold(
    pred: &PixelGrid,
    gt: &BinaryMap,
    threshold: f64,
    tolerance: f64,
) -> Result<(f64, f64, f64)> {
    Ok(counts_at_threshold(pred, gt, threshold, tolerance)?.scores())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_threshold: Vec<ThresholdScore>,
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub ap: f64,
}

impl EvalReport {
    /// Builds the report from per-image, per-threshold match counts
    /// (`counts[image][threshold]`). Counts are pooled over images before
    /// precision and recall are formed.
    pub fn from_counts(thresholds: &[f64], counts: &[Vec<MatchCounts>]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Usage("empty dataset".into()));
        }
        if thresholds.is_empty() || counts.iter().any(|c| c.len() != thresholds.len()) {
            return Err(Error::Usage(
                "per-image counts do not align with the threshold list".into(),
            ));
        }

        let per_threshold: Vec<ThresholdScore> = thresholds
            .iter()
            .enumerate()
            .map(|(k, &threshold)| {
                let pooled = counts
                    .iter()
                    .fold(MatchCounts::default(), |acc, img| acc + img[k]);
                let (precision, recall, f1) = pooled.scores();
                ThresholdScore {
                    threshold,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();

        let mut best = &per_threshold[0];
        for s in &per_threshold[1..] {
            if s.f1 > best.f1 {
                best = s;
            }
        }
        let (ods, ods_threshold) = (best.f1, best.threshold);

        let ois = counts
            .iter()
            .map(|img| img.iter().map(|c| c.scores().2).fold(0.0, f64::max))
            .sum::<f64>()
            / counts.len() as f64;

        let curve: Vec<(f64, f64)> = per_threshold
            .iter()
            .map(|s| (s.recall, s.precision))
            .collect();
        let ap = average_precision(&curve);

        Ok(Self {
            per_threshold,
            ods,
            ods_threshold,
            ois,
            ap,
        })
    }

    /// Per-threshold rows followed by the summary block, six decimals, LF.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall,f1\n");
        for s in &self.per_threshold {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6}",
                s.threshold, s.precision, s.recall, s.f1
            );
        }
        out.push_str("ods,ods_threshold,ois,ap\n");
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6}",
            self.ods, self.ods_threshold, self.ois, self.ap
        );
        out
    }

    pub fn summary_line(&self) -> String {
        format!("ODS={:.6} OIS={:.6} AP={:.6}", self.ods, self.ois, self.ap)
    }
}

/// Area under a precision-recall curve given as `(recall, precision)`
/// points.
///
/// Precision is replaced by its monotone envelope (the best precision at any
/// recall at least as large), the curve is extended to recall 0 at the
/// envelope's maximum, and the area is integrated with the trapezoid rule up
/// to the largest observed recall.
pub fn average_precision(points: &[(f64, f64)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for i in (0..pts.len().saturating_sub(1)).rev() {
        pts[i].1 = pts[i].1.max(pts[i + 1].1);
    }
    let mut area = 0.0;
    let (mut prev_r, mut prev_p) = (0.0, pts[0].1);
    for &(r, p) in &pts {
        area += (r - prev_r) * (p + prev_p) / 2.0;
        prev_r = r;
        prev_p = p;
    }
    area
}

pub fn evaluate_dataset(
    preds: &[PixelGrid],
    gts: &[BinaryMap],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::Usage("empty dataset".into()));
    }
    if preds.len() != gts.len() {
        return Err(Error::Usage(format!(
            "{} predictions but {} ground-truth maps",
            preds.len(),
            gts.len()
        )));
    }
    cfg.validate()?;
    let pairs: Vec<(&PixelGrid, &BinaryMap)> = preds.iter().zip(gts).collect();
    let counts = cfg
        .exec
        .map(&pairs, |(pred, gt)| image_counts(pred, gt, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_counts(&cfg.thresholds, &counts)
}

/// Match counts of one image at every configured threshold.
pub fn image_counts(pred: &PixelGrid, gt: &BinaryMap, cfg: &EvalConfig) -> Result<Vec<MatchCounts>> {
    cfg.thresholds
        .iter()
        .map(|&t| counts_at_threshold(pred, gt, t, cfg.tolerance))
        .collect()
}
