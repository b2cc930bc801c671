//! Independent brute-force oracles for the property tests.
//!
//! Everything here re-derives its answer from first principles —
//! exhaustive scans, permutation enumeration, from-definition linkage
//! recomputation, direct pixel counting, finite differences — and shares
//! no code with the operations it checks.

use crate::loss::{weighted_l2_loss, HeatmapLossParams};
use crate::tensor::Tensor;
use crate::types::{BoundingBoxAnn, Mask};
use crate::Result;

/// Exhaustive 3×3 local-maximum scan over a flat H×W map. Returns
/// ((gx, gy), value) sorted by descending value, ties by (gy, gx).
pub fn scan_peaks(data: &[f32], w: usize, h: usize, threshold: f64) -> Vec<((usize, usize), f32)> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = data[y * w + x];
            if (v as f64) < threshold {
                continue;
            }
            let mut best_neighbor = f32::NEG_INFINITY;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) {
                        best_neighbor = best_neighbor.max(data[ny * w + nx]);
                    }
                }
            }
            if v >= best_neighbor {
                out.push(((x, y), v));
            }
        }
    }
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then((a.0 .1, a.0 .0).cmp(&(b.0 .1, b.0 .0)))
    });
    out
}

/// Minimum-cost complete assignment by enumerating every injective
/// mapping of the smaller side into the larger. Returns (row, col)
/// pairs sorted by row, with the total cost. Feasible for n <= 8.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = cost.len();
    if rows == 0 || cost[0].is_empty() {
        return (Vec::new(), 0.0);
    }
    let cols = cost[0].len();
    if rows <= cols {
        let mut used = vec![false; cols];
        let mut current = Vec::new();
        let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
        enumerate(cost, 0, rows, cols, &mut used, &mut current, 0.0, &mut best);
        best.unwrap()
    } else {
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let (pairs, total) = brute_force_assignment(&t);
        let mut flipped: Vec<(usize, usize)> = pairs.into_iter().map(|(r, c)| (c, r)).collect();
        flipped.sort_by_key(|&(r, _)| r);
        (flipped, total)
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    cost: &[Vec<f64>],
    row: usize,
    rows: usize,
    cols: usize,
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    acc: f64,
    best: &mut Option<(Vec<(usize, usize)>, f64)>,
) {
    if row == rows {
        if best.as_ref().is_none_or(|(_, b)| acc < *b) {
            *best = Some((current.clone(), acc));
        }
        return;
    }
    for col in 0..cols {
        if used[col] {
            continue;
        }
        used[col] = true;
        current.push((row, col));
        enumerate(
            cost,
            row + 1,
            rows,
            cols,
            used,
            current,
            acc + cost[row][col],
            best,
        );
        current.pop();
        used[col] = false;
    }
}

fn rect_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let ix = (a.2.min(b.2) - a.0.max(b.0)).max(0.0);
    let iy = (a.3.min(b.3) - a.1.max(b.1)).max(0.0);
    let inter = ix * iy;
    let area_a = (a.2 - a.0).max(0.0) * (a.3 - a.1).max(0.0);
    let area_b = (b.2 - b.0).max(0.0) * (b.3 - b.1).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Per-class average precision computed the long way: for every
/// prediction-count prefix the greedy matching is re-run from scratch,
/// and the area under the monotone precision envelope is integrated by
/// direct scanning. Returns (per-class AP, mean over classes with
/// ground truth).
pub fn exhaustive_average_precision(
    preds: &[BoundingBoxAnn],
    gts: &[BoundingBoxAnn],
    iou_thresh: f64,
    n_classes: usize,
) -> (Vec<f64>, f64) {
    let mut per_class = vec![0.0f64; n_classes];
    let mut supported = 0usize;
    let mut sum = 0.0;
    for class_id in 0..n_classes {
        let gt: Vec<&BoundingBoxAnn> = gts.iter().filter(|b| b.class_id == class_id).collect();
        if gt.is_empty() {
            continue;
        }
        supported += 1;
        let mut preds_c: Vec<&BoundingBoxAnn> =
            preds.iter().filter(|b| b.class_id == class_id).collect();
        preds_c.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());

        let n = preds_c.len();
        let mut recalls = Vec::with_capacity(n);
        let mut precisions = Vec::with_capacity(n);
        for k in 1..=n {
            // greedy matching recomputed on the top-k prefix
            let mut taken = vec![false; gt.len()];
            let mut tp = 0usize;
            for p in &preds_c[..k] {
                let pr = (p.x1, p.y1, p.x2, p.y2);
                let mut best: Option<(usize, f64)> = None;
                for (j, g) in gt.iter().enumerate() {
                    if taken[j] {
                        continue;
                    }
                    let iou = rect_iou(pr, (g.x1, g.y1, g.x2, g.y2));
                    if iou >= iou_thresh && best.is_none_or(|(_, bi)| iou > bi) {
                        best = Some((j, iou));
                    }
                }
                if let Some((j, _)) = best {
                    taken[j] = true;
                    tp += 1;
                }
            }
            recalls.push(tp as f64 / gt.len() as f64);
            precisions.push(tp as f64 / k as f64);
        }

        let mut ap = 0.0;
        let mut last_recall = 0.0;
        for k in 0..n {
            if recalls[k] > last_recall {
                // max precision at any prefix >= k, scanned directly
                let mut max_p = 0.0f64;
                for j in k..n {
                    max_p = max_p.max(precisions[j]);
                }
                ap += (recalls[k] - last_recall) * max_p;
                last_recall = recalls[k];
            }
        }
        per_class[class_id] = ap;
        sum += ap;
    }
    let map = if supported > 0 {
        sum / supported as f64
    } else {
        0.0
    };
    (per_class, map)
}

/// Greedy Ward agglomeration recomputed from cluster members at every
/// step (no Lance-Williams recurrence): the pair minimizing
/// `sqrt(2 |A||B| / (|A|+|B|)) * ||mean_A - mean_B||` merges while that
/// value stays within the threshold. Labels ordered by size descending,
/// ties by smallest member index. Intended for n <= 8.
pub fn exhaustive_ward(points: &[[f64; 2]], threshold: f64) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let v = ward_linkage(points, &clusters[a], &clusters[b]);
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((a, b, v));
                }
            }
        }
        let Some((a, b, v)) = best else { break };
        if v > threshold {
            break;
        }
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        if clusters.len() == 1 {
            break;
        }
    }
    clusters.sort_by_key(|m| (usize::MAX - m.len(), *m.iter().min().unwrap()));
    let mut labels = vec![0usize; n];
    for (label, members) in clusters.iter().enumerate() {
        for &i in members {
            labels[i] = label;
        }
    }
    labels
}

fn ward_linkage(points: &[[f64; 2]], a: &[usize], b: &[usize]) -> f64 {
    let mean = |m: &[usize]| {
        let mut acc = [0.0f64; 2];
        for &i in m {
            acc[0] += points[i][0];
            acc[1] += points[i][1];
        }
        [acc[0] / m.len() as f64, acc[1] / m.len() as f64]
    };
    let (ma, mb) = (mean(a), mean(b));
    let d2 = (ma[0] - mb[0]).powi(2) + (ma[1] - mb[1]).powi(2);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    (2.0 * na * nb / (na + nb) * d2).sqrt()
}

/// Direct intersection / union pixel counts of two equally sized masks.
pub fn mask_overlap_counts(a: &Mask, b: &Mask) -> (usize, usize) {
    assert_eq!(a.width(), b.width());
    assert_eq!(a.height(), b.height());
    let mut inter = 0;
    let mut union = 0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (pa, pb) = (a.get(x, y), b.get(x, y));
            if pa && pb {
                inter += 1;
            }
            if pa || pb {
                union += 1;
            }
        }
    }
    (inter, union)
}

/// Central finite differences of [`weighted_l2_loss`] with respect to
/// each prediction cell. The perturbed values are written through f32,
/// and the division uses the actually representable step.
pub fn finite_difference_grad(
    target: &Tensor,
    pred: &Tensor,
    params: &HeatmapLossParams,
    step: f64,
) -> Result<Vec<f64>> {
    let mut grads = Vec::with_capacity(pred.numel());
    let mut work = pred.clone();
    for i in 0..pred.numel() {
        let v = pred.data()[i];
        let plus = (v as f64 + step) as f32;
        let minus = (v as f64 - step) as f32;
        work.data_mut()[i] = plus;
        let l_plus = weighted_l2_loss(target, &work, params)?;
        work.data_mut()[i] = minus;
        let l_minus = weighted_l2_loss(target, &work, params)?;
        work.data_mut()[i] = v;
        grads.push((l_plus - l_minus) / (plus as f64 - minus as f64));
    }
    Ok(grads)
}

/// Largest corner-displacement radius keeping the worst-case IoU at or
/// above `min_iou`, found by binary search over the three displacement
/// configurations evaluated geometrically; sigma = r/3 floored at 0.5.
pub fn corner_sigma_search(box_w: f64, box_h: f64, stride: u32, min_iou: f64) -> f64 {
    let w = box_w / stride as f64;
    let h = box_h / stride as f64;
    let worst_iou = |r: f64| -> f64 {
        let base = (0.0, 0.0, w, h);
        let translated = rect_iou(base, (r, r, w + r, h + r));
        let shrunk = rect_iou(base, (r, r, w - r, h - r));
        let grown = rect_iou(base, (-r, -r, w + r, h + r));
        translated.min(shrunk).min(grown)
    };
    let (mut lo, mut hi) = (0.0f64, w + h);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if worst_iou(mid) >= min_iou {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo / 3.0).max(0.5)
}

/// Untruncated Gaussian map: the exact element-wise maximum over all
/// keypoints at every cell, in f64. Keypoints are (gx, gy, sigma).
pub fn gaussian_map_reference(keypoints: &[(usize, usize, f64)], w: usize, h: usize) -> Vec<f64> {
    let mut map = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut best = 0.0f64;
            for &(cx, cy, sigma) in keypoints {
                let dx = x as f64 - cx as f64;
                let dy = y as f64 - cy as f64;
                let v = (-(dx * dx + dy * dy) / (sigma * sigma)).exp();
                best = best.max(v);
            }
            if !keypoints.is_empty() {
                map[y * w + x] = best;
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_assignment_hand_case() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let (pairs, total) = brute_force_assignment(&cost);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(total, 2.0);
    }

    #[test]
    fn scan_peaks_finds_isolated_max() {
        let mut data = vec![0.0f32; 25];
        data[2 * 5 + 3] = 0.9;
        let peaks = scan_peaks(&data, 5, 5, 0.25);
        assert_eq!(peaks, vec![((3, 2), 0.9)]);
    }

    #[test]
    fn exhaustive_ward_separated_groups() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [50.0, 50.0], [51.0, 50.0]];
        let labels = exhaustive_ward(&pts, 5.0);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn corner_sigma_search_matches_expectations() {
        // near-unit IoU forces the floor
        assert_eq!(corner_sigma_search(40.0, 40.0, 4, 0.999_999), 0.5);
        // monotone in box size
        let s_small = corner_sigma_search(40.0, 40.0, 4, 0.7);
        let s_large = corner_sigma_search(80.0, 80.0, 4, 0.7);
        assert!(s_large >= s_small);
    }
}
