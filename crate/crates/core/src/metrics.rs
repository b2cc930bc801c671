//! Evaluation suite: mAP@0.5, occlusion accuracy over an optimal box
//! matching, class-agnostic lane mask IoU, and macro F1 for the tagging
//! tasks.
//!
//! Per-frame results accumulate into mergeable accumulators so datasets
//! can be evaluated in parallel and reduced.

use crate::decode::LanePolynomial;
use crate::types::{BoundingBoxAnn, LaneInstance, Mask, Scene, SceneTags, NUM_DET_CLASSES};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Intersection-over-union of two boxes, in [0, 1].
pub fn iou_box(a: &BoundingBoxAnn, b: &BoundingBoxAnn) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Per-class AP values and their mean over classes with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    /// AP per class; 0.0 for classes without ground truth.
    pub per_class: Vec<f64>,
    /// True where the class has at least one ground-truth box.
    pub supported: Vec<bool>,
    /// Mean AP over supported classes (0.0 if none).
    pub map: f64,
}

/// Score/hit pairs per class, mergeable across frames.
///
/// Matching is greedy per frame: predictions in descending score order
/// each take the unmatched ground truth with the highest IoU at or above
/// the threshold.
#[derive(Debug, Clone)]
pub struct ApAccumulator {
    iou_thresh: f64,
    scored: Vec<Vec<(f64, bool)>>,
    gt_count: Vec<usize>,
}

impl ApAccumulator {
    pub fn new(n_classes: usize, iou_thresh: f64) -> Self {
        ApAccumulator {
            iou_thresh,
            scored: vec![Vec::new(); n_classes],
            gt_count: vec![0; n_classes],
        }
    }

    pub fn add_frame(&mut self, preds: &[BoundingBoxAnn], gts: &[BoundingBoxAnn]) {
        let n_classes = self.scored.len();
        for class_id in 0..n_classes {
            let gt: Vec<&BoundingBoxAnn> = gts.iter().filter(|b| b.class_id == class_id).collect();
            self.gt_count[class_id] += gt.len();
            let mut preds_c: Vec<&BoundingBoxAnn> =
                preds.iter().filter(|b| b.class_id == class_id).collect();
            preds_c.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
            let mut taken = vec![false; gt.len()];
            for p in preds_c {
                let mut best: Option<(usize, f64)> = None;
                for (j, g) in gt.iter().enumerate() {
                    if taken[j] {
                        continue;
                    }
                    let iou = iou_box(p, g);
                    if iou >= self.iou_thresh && best.is_none_or(|(_, bi)| iou > bi) {
                        best = Some((j, iou));
                    }
                }
                if let Some((j, _)) = best {
                    taken[j] = true;
                    self.scored[class_id].push((p.score, true));
                } else {
                    self.scored[class_id].push((p.score, false));
                }
            }
        }
    }

    pub fn merge(&mut self, other: &ApAccumulator) {
        for (mine, theirs) in self.scored.iter_mut().zip(&other.scored) {
            mine.extend_from_slice(theirs);
        }
        for (mine, theirs) in self.gt_count.iter_mut().zip(&other.gt_count) {
            *mine += theirs;
        }
    }

    /// AP per class via the all-point (monotone envelope) interpolation
    /// of the precision-recall curve.
    pub fn finalize(&self) -> ApResult {
        let n_classes = self.scored.len();
        let mut per_class = vec![0.0f64; n_classes];
        let mut supported = vec![false; n_classes];
        let mut sum = 0.0;
        let mut n_supported = 0usize;
        for c in 0..n_classes {
            if self.gt_count[c] == 0 {
                continue;
            }
            supported[c] = true;
            n_supported += 1;
            let mut scored = self.scored[c].clone();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let n_gt = self.gt_count[c] as f64;
            let mut tp = 0usize;
            let mut curve: Vec<(f64, f64)> = Vec::with_capacity(scored.len());
            for (k, &(_, hit)) in scored.iter().enumerate() {
                if hit {
                    tp += 1;
                }
                curve.push((tp as f64 / n_gt, tp as f64 / (k + 1) as f64));
            }
            // Monotone precision envelope from the right, then sum
            // envelope * recall step.
            let mut ap = 0.0;
            let envelope: Vec<f64> = {
                let mut env = vec![0.0f64; curve.len()];
                let mut m = 0.0f64;
                for i in (0..curve.len()).rev() {
                    m = m.max(curve[i].1);
                    env[i] = m;
                }
                env
            };
            let mut last_r = 0.0f64;
            for (i, &(r, _)) in curve.iter().enumerate() {
                if r > last_r {
                    ap += (r - last_r) * envelope[i];
                    last_r = r;
                }
            }
            per_class[c] = ap;
            sum += ap;
        }
        let map = if n_supported > 0 {
            sum / n_supported as f64
        } else {
            0.0
        };
        ApResult {
            per_class,
            supported,
            map,
        }
    }
}

/// Single-collection convenience wrapper around [`ApAccumulator`].
pub fn average_precision(
    preds: &[BoundingBoxAnn],
    gts: &[BoundingBoxAnn],
    iou_thresh: f64,
    n_classes: usize,
) -> ApResult {
    let mut acc = ApAccumulator::new(n_classes, iou_thresh);
    acc.add_frame(preds, gts);
    acc.finalize()
}

/// Minimum-cost complete assignment on a rectangular cost matrix
/// (rows × cols). Returns (row, col) pairs covering the smaller side,
/// sorted by row. Costs must be finite.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 || cost[0].is_empty() {
        return Vec::new();
    }
    let cols = cost[0].len();
    if rows <= cols {
        hungarian(cost, rows, cols)
    } else {
        // transpose so the matched side is the rows
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = hungarian(&t, cols, rows)
            .into_iter()
            .map(|(r, c)| (c, r))
            .collect();
        pairs.sort_by_key(|&(r, _)| r);
        pairs
    }
}

/// Jonker-Volgenant style shortest augmenting path; requires
/// rows <= cols. O(rows^2 * cols).
fn hungarian(cost: &[Vec<f64>], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    // job[w] = row assigned to column w; extra virtual column at index cols.
    let mut job: Vec<Option<usize>> = vec![None; cols + 1];
    let mut ys = vec![0.0f64; rows];
    let mut yt = vec![0.0f64; cols + 1];

    for row in 0..rows {
        let mut w_cur = cols;
        job[w_cur] = Some(row);
        let mut min_to = vec![f64::INFINITY; cols + 1];
        let mut prev: Vec<Option<usize>> = vec![None; cols + 1];
        let mut in_tree = vec![false; cols + 1];

        while let Some(j) = job[w_cur] {
            in_tree[w_cur] = true;
            let mut delta = f64::INFINITY;
            let mut w_next = cols;
            for w in 0..cols {
                if in_tree[w] {
                    continue;
                }
                let reduced = cost[j][w] - ys[j] - yt[w];
                if reduced < min_to[w] {
                    min_to[w] = reduced;
                    prev[w] = Some(w_cur);
                }
                if min_to[w] < delta {
                    delta = min_to[w];
                    w_next = w;
                }
            }
            for w in 0..=cols {
                if in_tree[w] {
                    if let Some(jw) = job[w] {
                        ys[jw] += delta;
                    }
                    yt[w] -= delta;
                } else {
                    min_to[w] -= delta;
                }
            }
            w_cur = w_next;
        }
        while w_cur != cols {
            let w_prev = prev[w_cur].unwrap();
            job[w_cur] = job[w_prev];
            w_cur = w_prev;
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..cols).filter_map(|w| job[w].map(|r| (r, w))).collect();
    pairs.sort_by_key(|&(r, _)| r);
    pairs
}

/// Optimal bipartite matching between predictions and ground truths
/// minimizing the total (1 - IoU); pairs with IoU below `iou_floor` are
/// discarded afterward. Matching is class-agnostic.
pub fn match_min_weight(
    preds: &[BoundingBoxAnn],
    gts: &[BoundingBoxAnn],
    iou_floor: f64,
) -> Vec<(usize, usize)> {
    if preds.is_empty() || gts.is_empty() {
        return Vec::new();
    }
    let cost: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| 1.0 - iou_box(p, g)).collect())
        .collect();
    min_cost_assignment(&cost)
        .into_iter()
        .filter(|&(i, j)| iou_box(&preds[i], &gts[j]) >= iou_floor)
        .collect()
}

/// Occlusion agreement over matched pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionAccuracy {
    /// Fraction of matched pairs whose flags agree; 1.0 on zero matches.
    pub accuracy: f64,
    pub matched: usize,
}

pub fn occlusion_accuracy(
    matches: &[(usize, usize)],
    pred_flags: &[bool],
    gt_flags: &[bool],
) -> OcclusionAccuracy {
    if matches.is_empty() {
        return OcclusionAccuracy {
            accuracy: 1.0,
            matched: 0,
        };
    }
    let agree = matches
        .iter()
        .filter(|&&(i, j)| pred_flags[i] == gt_flags[j])
        .count();
    OcclusionAccuracy {
        accuracy: agree as f64 / matches.len() as f64,
        matched: matches.len(),
    }
}

/// A lane curve to rasterize: either an explicit polyline or a fitted
/// polynomial sampled over its y-range.
#[derive(Debug, Clone)]
pub enum LaneCurve<'a> {
    Polyline(&'a [[f64; 2]]),
    Polynomial(&'a LanePolynomial),
}

/// Default rasterization brush width: 8 px at 1280-wide imagery, scaled
/// with the image width.
pub fn default_line_width(image_w: u32) -> u32 {
    ((8.0 * image_w as f64 / 1280.0).round() as u32).max(1)
}

/// Draws each curve with a square brush of side `line_width` (pixel
/// centers within width/2 of the sample, in Chebyshev distance) into a
/// binary image-space mask.
pub fn rasterize_lanes(
    curves: &[LaneCurve],
    image_w: u32,
    image_h: u32,
    line_width: u32,
) -> Result<Mask> {
    if line_width == 0 {
        return Err(Error::invalid("line width must be positive"));
    }
    let mut mask = Mask::new(image_w as usize, image_h as usize);
    for curve in curves {
        match curve {
            LaneCurve::Polyline(points) => stamp_polyline(&mut mask, points, line_width),
            LaneCurve::Polynomial(poly) => {
                let (y0, y1) = poly.y_range;
                if y1 <= y0 {
                    continue;
                }
                let steps = ((y1 - y0) * 2.0).ceil().max(1.0) as usize;
                let pts: Vec<[f64; 2]> = (0..=steps)
                    .map(|i| {
                        let y = y0 + (y1 - y0) * i as f64 / steps as f64;
                        [poly.eval(y), y]
                    })
                    .collect();
                stamp_polyline(&mut mask, &pts, line_width);
            }
        }
    }
    Ok(mask)
}

fn stamp_polyline(mask: &mut Mask, points: &[[f64; 2]], width: u32) {
    if points.is_empty() {
        return;
    }
    stamp(mask, points[0], width);
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let steps = (len * 2.0).ceil().max(1.0) as usize; // 0.5 px sampling
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            stamp(
                mask,
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                width,
            );
        }
    }
}

fn stamp(mask: &mut Mask, p: [f64; 2], width: u32) {
    let half = width as f64 / 2.0;
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    // pixel centers (px + 0.5) within `half` of the sample
    let x0 = ((p[0] - half - 0.5).ceil() as i64).max(0);
    let x1 = ((p[0] + half - 0.5).floor() as i64).min(w - 1);
    let y0 = ((p[1] - half - 0.5).ceil() as i64).max(0);
    let y1 = ((p[1] + half - 0.5).floor() as i64).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            mask.set(x as usize, y as usize, true);
        }
    }
}

/// IoU of two binary masks; 1.0 when both are empty.
pub fn lane_mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::shape(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Macro-averaged F1 over classes with at least one ground-truth
/// occurrence; a class F1 is 0 when precision + recall is 0.
pub fn f1_multiclass(preds: &[usize], gts: &[usize], n_classes: usize) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} labels",
            preds.len(),
            gts.len()
        )));
    }
    if let Some(&bad) = preds.iter().chain(gts).find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range 0..{n_classes}"
        )));
    }
    if preds.is_empty() {
        return Ok(1.0);
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &g) in preds.iter().zip(gts) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let mut sum = 0.0;
    let mut supported = 0usize;
    for c in 0..n_classes {
        if tp[c] + fn_[c] == 0 {
            continue; // no ground truth for this class
        }
        supported += 1;
        let precision = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let recall = tp[c] as f64 / (tp[c] + fn_[c]) as f64;
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    if supported == 0 {
        return Ok(1.0);
    }
    Ok(sum / supported as f64)
}

/// One frame of predictions for dataset evaluation.
#[derive(Debug, Clone)]
pub struct FramePrediction {
    pub boxes: Vec<BoundingBoxAnn>,
    pub lanes: Vec<LaneInstance>,
    /// Parallel to `lanes`: fitted polynomial when available. Lanes with
    /// a polynomial rasterize through it; others use their points.
    pub polynomials: Vec<Option<LanePolynomial>>,
    pub tags: Option<SceneTags>,
}

/// Dataset evaluation configuration.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// IoU threshold for AP matching.
    pub iou_thresh: f64,
    /// IoU floor below which min-weight matches are discarded.
    pub iou_floor: f64,
    /// Lane rasterization width; None derives it from the image width.
    pub line_width: Option<u32>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_thresh: 0.5,
            iou_floor: 0.5,
            line_width: None,
        }
    }
}

/// Aggregate evaluation report.
///
/// Vacuous cases report 1.0: occlusion accuracy with zero matches (the
/// match count is reported alongside), lane IoU with both mask sets
/// empty, and tagging F1 when no frame carries both prediction and
/// ground-truth tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map50: f64,
    pub per_class_ap: Vec<f64>,
    pub occl_accuracy: f64,
    pub occl_matches: usize,
    pub lane_iou: f64,
    pub f1_weather: f64,
    pub f1_scene: f64,
    pub f1_tod: f64,
    /// Rasterization width actually used (pixels).
    pub line_width: u32,
}

impl EvalReport {
    /// All real-valued fields lie in [0, 1].
    pub fn check_ranges(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.map50)
            && self.per_class_ap.iter().copied().all(unit)
            && unit(self.occl_accuracy)
            && unit(self.lane_iou)
            && unit(self.f1_weather)
            && unit(self.f1_scene)
            && unit(self.f1_tod)
    }
}

/// Evaluates paired prediction / ground-truth frames into a report.
pub fn evaluate(preds: &[FramePrediction], gts: &[Scene], cfg: &EvalConfig) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::invalid(format!(
            "{} prediction frames vs {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let mut ap = ApAccumulator::new(NUM_DET_CLASSES, cfg.iou_thresh);
    let mut occl_agree = 0usize;
    let mut occl_total = 0usize;
    let mut lane_inter = 0usize;
    let mut lane_union = 0usize;
    let mut weather: (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    let mut scene: (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    let mut tod: (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    let mut width_used = 0u32;

    for (pred, gt) in preds.iter().zip(gts) {
        ap.add_frame(&pred.boxes, &gt.boxes);

        let matches = match_min_weight(&pred.boxes, &gt.boxes, cfg.iou_floor);
        let pred_flags: Vec<bool> = pred.boxes.iter().map(|b| b.occluded).collect();
        let gt_flags: Vec<bool> = gt.boxes.iter().map(|b| b.occluded).collect();
        occl_agree += matches
            .iter()
            .filter(|&&(i, j)| pred_flags[i] == gt_flags[j])
            .count();
        occl_total += matches.len();

        let line_width = cfg
            .line_width
            .unwrap_or_else(|| default_line_width(gt.image_w));
        width_used = width_used.max(line_width);
        let pred_curves: Vec<LaneCurve> = pred
            .lanes
            .iter()
            .zip(&pred.polynomials)
            .map(|(lane, poly)| match poly {
                Some(p) => LaneCurve::Polynomial(p),
                None => LaneCurve::Polyline(&lane.points),
            })
            .collect();
        let gt_curves: Vec<LaneCurve> = gt
            .lanes
            .iter()
            .map(|l| LaneCurve::Polyline(&l.points))
            .collect();
        let pm = rasterize_lanes(&pred_curves, gt.image_w, gt.image_h, line_width)?;
        let gm = rasterize_lanes(&gt_curves, gt.image_w, gt.image_h, line_width)?;
        for (&a, &b) in pm.data().iter().zip(gm.data()) {
            lane_inter += (a && b) as usize;
            lane_union += (a || b) as usize;
        }

        if let Some(pt) = pred.tags {
            weather.0.push(pt.weather);
            weather.1.push(gt.tags.weather);
            scene.0.push(pt.scene);
            scene.1.push(gt.tags.scene);
            tod.0.push(pt.time_of_day);
            tod.1.push(gt.tags.time_of_day);
        }
    }

    let ap_result = ap.finalize();
    let occl = if occl_total == 0 {
        1.0
    } else {
        occl_agree as f64 / occl_total as f64
    };
    let lane_iou = if lane_union == 0 {
        1.0
    } else {
        lane_inter as f64 / lane_union as f64
    };
    Ok(EvalReport {
        map50: ap_result.map,
        per_class_ap: ap_result.per_class,
        occl_accuracy: occl,
        occl_matches: occl_total,
        lane_iou,
        f1_weather: f1_multiclass(&weather.0, &weather.1, crate::types::NUM_WEATHER_CLASSES)?,
        f1_scene: f1_multiclass(&scene.0, &scene.1, crate::types::NUM_SCENE_CLASSES)?,
        f1_tod: f1_multiclass(&tod.0, &tod.1, crate::types::NUM_TIMEOFDAY_CLASSES)?,
        line_width: width_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64, class_id: usize, score: f64) -> BoundingBoxAnn {
        BoundingBoxAnn {
            x1,
            y1,
            x2,
            y2,
            class_id,
            occluded: false,
            score,
        }
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = bx(0.0, 0.0, 2.0, 2.0, 0, 1.0);
        assert_eq!(iou_box(&a, &a), 1.0);
        let b = bx(5.0, 5.0, 7.0, 7.0, 0, 1.0);
        assert_eq!(iou_box(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        let a = bx(0.0, 0.0, 2.0, 2.0, 0, 1.0);
        let b = bx(1.0, 1.0, 3.0, 3.0, 0, 1.0);
        assert!((iou_box(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn ap_single_hit_is_one() {
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0, 0, 1.0)];
        let pred = vec![bx(1.0, 0.0, 10.0, 10.0, 0, 0.9)];
        let r = average_precision(&pred, &gt, 0.5, 10);
        assert_eq!(r.per_class[0], 1.0);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn ap_no_predictions_is_zero() {
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0, 2, 1.0)];
        let r = average_precision(&[], &gt, 0.5, 10);
        assert_eq!(r.per_class[2], 0.0);
        assert_eq!(r.map, 0.0);
        assert!(r.supported[2]);
        assert!(!r.supported[0]);
    }

    #[test]
    fn ap_false_positive_after_hit() {
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0, 0, 1.0)];
        let pred = vec![
            bx(0.0, 0.0, 10.0, 10.0, 0, 0.9),
            bx(50.0, 50.0, 60.0, 60.0, 0, 0.5),
        ];
        // one TP at recall 1 precision 1; trailing FP does not reduce AP
        let r = average_precision(&pred, &gt, 0.5, 10);
        assert_eq!(r.per_class[0], 1.0);
    }

    #[test]
    fn assignment_on_hand_matrix() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let pairs = min_cost_assignment(&cost);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn assignment_rectangular() {
        let cost = vec![vec![5.0, 1.0, 9.0], vec![1.0, 5.0, 9.0]];
        let pairs = min_cost_assignment(&cost);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        // more rows than cols: transpose path
        let cost_t = vec![vec![5.0, 1.0], vec![1.0, 5.0], vec![9.0, 9.0]];
        let pairs_t = min_cost_assignment(&cost_t);
        assert_eq!(pairs_t, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn match_empty_preds() {
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0, 0, 1.0)];
        assert!(match_min_weight(&[], &gt, 0.5).is_empty());
    }

    #[test]
    fn match_filters_low_iou() {
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0, 0, 1.0)];
        let pred = vec![bx(100.0, 100.0, 110.0, 110.0, 0, 1.0)];
        assert!(match_min_weight(&pred, &gt, 0.5).is_empty());
    }

    #[test]
    fn occlusion_accuracy_cases() {
        let m = [(0usize, 0usize), (1, 1)];
        let acc = occlusion_accuracy(&m, &[true, false], &[true, true]);
        assert_eq!(acc.accuracy, 0.5);
        assert_eq!(acc.matched, 2);
        let none = occlusion_accuracy(&[], &[], &[]);
        assert_eq!(none.accuracy, 1.0);
        assert_eq!(none.matched, 0);
    }

    #[test]
    fn mask_iou_basics() {
        let line_a = [[10.0, 0.0], [10.0, 50.0]];
        let line_b = [[30.0, 0.0], [30.0, 50.0]];
        let a = rasterize_lanes(&[LaneCurve::Polyline(&line_a)], 64, 64, 4).unwrap();
        let b = rasterize_lanes(&[LaneCurve::Polyline(&line_b)], 64, 64, 4).unwrap();
        assert_eq!(lane_mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(lane_mask_iou(&a, &b).unwrap(), 0.0);
        let empty = Mask::new(64, 64);
        assert_eq!(lane_mask_iou(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn vertical_lines_offset_by_width_are_disjoint() {
        let w = 8u32;
        let line_a = [[20.0, 0.0], [20.0, 63.0]];
        let line_b = [[28.0, 0.0], [28.0, 63.0]];
        let a = rasterize_lanes(&[LaneCurve::Polyline(&line_a)], 64, 64, w).unwrap();
        let b = rasterize_lanes(&[LaneCurve::Polyline(&line_b)], 64, 64, w).unwrap();
        assert_eq!(lane_mask_iou(&a, &b).unwrap(), 0.0);
        assert_eq!(a.count(), 8 * 64);
    }

    #[test]
    fn rasterize_rejects_zero_width() {
        assert!(rasterize_lanes(&[], 64, 64, 0).is_err());
    }

    #[test]
    fn f1_perfect_and_all_wrong() {
        assert_eq!(f1_multiclass(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(f1_multiclass(&[1, 2, 0], &[0, 1, 2], 3).unwrap(), 0.0);
    }

    #[test]
    fn f1_hand_computed_confusion() {
        // class0: P=1/2 R=1/2 F1=1/2; class1: P=2/3 R=1 F1=4/5;
        // class2: P=1 R=1/2 F1=2/3 -> macro 0.655555...
        let gts = [0, 0, 1, 1, 2, 2];
        let preds = [0, 1, 1, 1, 2, 0];
        let f1 = f1_multiclass(&preds, &gts, 3).unwrap();
        assert!((f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_full_report_on_tiny_dataset() {
        let gt = Scene {
            image_w: 640,
            image_h: 320,
            boxes: vec![
                BoundingBoxAnn::new(10.0, 10.0, 60.0, 50.0, 2, true, 1.0).unwrap(),
                BoundingBoxAnn::new(200.0, 100.0, 280.0, 180.0, 0, false, 1.0).unwrap(),
            ],
            lanes: vec![LaneInstance::new(6, vec![[100.0, 20.0], [120.0, 300.0]]).unwrap()],
            tags: SceneTags::new(0, 1, 2).unwrap(),
        };
        let pred = FramePrediction {
            boxes: gt
                .boxes
                .iter()
                .map(|b| BoundingBoxAnn {
                    score: 0.8,
                    ..b.clone()
                })
                .collect(),
            lanes: gt.lanes.clone(),
            polynomials: vec![None],
            tags: Some(SceneTags::new(0, 1, 3).unwrap()), // timeofday wrong
        };
        let report = evaluate(&[pred], &[gt], &EvalConfig::default()).unwrap();
        assert!(report.check_ranges());
        assert_eq!(report.map50, 1.0);
        assert_eq!(report.occl_accuracy, 1.0);
        assert_eq!(report.occl_matches, 2);
        assert_eq!(report.lane_iou, 1.0); // identical polylines
        assert_eq!(report.f1_weather, 1.0);
        assert_eq!(report.f1_scene, 1.0);
        assert_eq!(report.f1_tod, 0.0);
        assert_eq!(report.line_width, default_line_width(640));
    }

    #[test]
    fn evaluate_without_prediction_tags_is_vacuous_on_f1() {
        let gt = Scene {
            image_w: 64,
            image_h: 64,
            boxes: vec![],
            lanes: vec![],
            tags: SceneTags::new(0, 0, 0).unwrap(),
        };
        let pred = FramePrediction {
            boxes: vec![],
            lanes: vec![],
            polynomials: vec![],
            tags: None,
        };
        let report = evaluate(&[pred], &[gt], &EvalConfig::default()).unwrap();
        assert_eq!(report.f1_weather, 1.0);
        assert_eq!(report.occl_matches, 0);
        assert_eq!(report.occl_accuracy, 1.0);
        assert_eq!(report.lane_iou, 1.0);
        assert_eq!(report.map50, 0.0); // no ground truth anywhere
    }

    #[test]
    fn accumulator_merge_matches_sequential_accumulation() {
        let frame_a = (
            vec![
                bx(0.0, 0.0, 10.0, 10.0, 0, 0.9),
                bx(50.0, 0.0, 80.0, 20.0, 1, 0.4),
            ],
            vec![
                bx(0.0, 0.0, 10.0, 10.0, 0, 1.0),
                bx(52.0, 0.0, 80.0, 20.0, 1, 1.0),
            ],
        );
        let frame_b = (
            vec![bx(5.0, 5.0, 20.0, 30.0, 0, 0.7)],
            vec![
                bx(4.0, 4.0, 20.0, 31.0, 0, 1.0),
                bx(90.0, 90.0, 120.0, 110.0, 2, 1.0),
            ],
        );
        let mut sequential = ApAccumulator::new(10, 0.5);
        sequential.add_frame(&frame_a.0, &frame_a.1);
        sequential.add_frame(&frame_b.0, &frame_b.1);

        let mut left = ApAccumulator::new(10, 0.5);
        left.add_frame(&frame_a.0, &frame_a.1);
        let mut right = ApAccumulator::new(10, 0.5);
        right.add_frame(&frame_b.0, &frame_b.1);

        let mut merged_lr = left.clone();
        merged_lr.merge(&right);
        let mut merged_rl = right.clone();
        merged_rl.merge(&left);

        let want = sequential.finalize();
        assert_eq!(merged_lr.finalize(), want);
        assert_eq!(merged_rl.finalize(), want);
    }

    #[test]
    fn default_width_scales() {
        assert_eq!(default_line_width(1280), 8);
        assert_eq!(default_line_width(640), 4);
        assert_eq!(default_line_width(1920), 12);
        assert_eq!(default_line_width(64), 1);
    }
}
