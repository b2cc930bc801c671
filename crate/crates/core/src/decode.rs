//! Predicted output-space tensors to detections and lane instances.
//!
//! Boxes: per-class local maxima above the score threshold, inverted
//! through the corner-offset map. Lanes: per-class keypoint peaks whose
//! midpoint votes are grouped by agglomerative Ward clustering, then fit
//! with a polynomial per instance.
//!
//! Heatmap tensors are expected to be post-sigmoid values in [0, 1];
//! heads producing them initialize their last-convolution bias to
//! [`HEAD_BIAS_INIT`] so an untrained network starts near saturation.

use crate::tensor::Tensor;
use crate::types::{BoundingBoxAnn, GridSpec, LaneInstance, NUM_DET_CLASSES, NUM_LANE_CLASSES};
use crate::{Error, Result};

/// Default detection score threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.25;
/// Heatmap-head last-convolution bias initialization; sigmoid(4.6) ≈ 0.99.
pub const HEAD_BIAS_INIT: f64 = 4.6;
/// Default occlusion decision threshold.
pub const DEFAULT_OCCL_THRESHOLD: f64 = 0.5;
/// Default Ward-linkage stopping threshold (grid cells).
pub const DEFAULT_CLUSTER_DIST: f64 = 10.0;
/// Default lane polynomial degree.
pub const DEFAULT_POLY_DEGREE: usize = 3;

/// A heatmap local maximum at or above the score threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Grid cell as (gx, gy).
    pub cell: (usize, usize),
    pub score: f32,
}

/// Returns cells whose value is >= `threshold` and >= all in-grid
/// neighbors in the 3×3 window. Plateau cells that tie their
/// neighborhood maximum are all kept. Sorted by descending score, ties
/// by (gy, gx).
pub fn extract_peaks(heatmap: &Tensor, threshold: f64) -> Result<Vec<Peak>> {
    if heatmap.rank() != 2 {
        return Err(Error::shape(
            "rank-2 heatmap",
            format!("{:?}", heatmap.shape()),
        ));
    }
    let (h, w) = (heatmap.shape()[0], heatmap.shape()[1]);
    Ok(peaks_in(heatmap.data(), w, h, threshold))
}

pub(crate) fn peaks_in(data: &[f32], w: usize, h: usize, threshold: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = data[y * w + x];
            if (v as f64) < threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if data[ny as usize * w + nx as usize] > v {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                peaks.push(Peak {
                    cell: (x, y),
                    score: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.cell.1.cmp(&b.cell.1))
            .then(a.cell.0.cmp(&b.cell.0))
    });
    peaks
}

/// Reconstructs boxes from peaks and the corner-offset map:
/// `x1 = (c_x - off0)·S`, `y1 = (c_y - off1)·S`, `x2 = (c_x - off2)·S`,
/// `y2 = (c_y - off3)·S`. Corners are clamped to the image and boxes
/// left degenerate by clamping are discarded.
pub fn decode_boxes(
    det_heatmaps: &Tensor,
    det_offsets: &Tensor,
    occlusion: &Tensor,
    grid: &GridSpec,
    threshold: f64,
    occl_threshold: f64,
) -> Result<Vec<BoundingBoxAnn>> {
    let (gw, gh) = (grid.grid_w(), grid.grid_h());
    det_heatmaps.expect_shape(&[NUM_DET_CLASSES, gh, gw], "det_heatmaps")?;
    det_offsets.expect_shape(&[4, gh, gw], "det_offsets")?;
    occlusion.expect_shape(&[1, gh, gw], "occlusion")?;

    let s = grid.stride() as f64;
    let (iw, ih) = (grid.input_w() as f64, grid.input_h() as f64);
    let mut out = Vec::new();
    for class_id in 0..NUM_DET_CLASSES {
        for peak in peaks_in(det_heatmaps.channel(class_id), gw, gh, threshold) {
            let (cx, cy) = peak.cell;
            let x1 = (cx as f64 - det_offsets.at3(0, cy, cx) as f64) * s;
            let y1 = (cy as f64 - det_offsets.at3(1, cy, cx) as f64) * s;
            let x2 = (cx as f64 - det_offsets.at3(2, cy, cx) as f64) * s;
            let y2 = (cy as f64 - det_offsets.at3(3, cy, cx) as f64) * s;
            let (x1, y1) = (x1.clamp(0.0, iw), y1.clamp(0.0, ih));
            let (x2, y2) = (x2.clamp(0.0, iw), y2.clamp(0.0, ih));
            if x1 >= x2 || y1 >= y2 {
                continue;
            }
            let occluded = occlusion.at3(0, cy, cx) as f64 >= occl_threshold;
            out.push(BoundingBoxAnn {
                x1,
                y1,
                x2,
                y2,
                class_id,
                occluded,
                score: (peak.score as f64).clamp(0.0, 1.0),
            });
        }
    }
    Ok(out)
}

/// Agglomerative Ward clustering of midpoint votes.
///
/// The linkage value follows the variance-increase convention scaled so
/// that two singletons merge at their Euclidean distance. Merging stops
/// when the minimum linkage exceeds `dist_threshold`. Labels are
/// contiguous, ordered by cluster size descending (ties by smallest
/// member index).
pub fn cluster_by_midpoint(
    keypoints: &[(usize, usize)],
    votes: &[[f64; 2]],
    dist_threshold: f64,
) -> Result<Vec<usize>> {
    if keypoints.len() != votes.len() {
        return Err(Error::invalid(format!(
            "{} keypoints vs {} votes",
            keypoints.len(),
            votes.len()
        )));
    }
    Ok(ward::cluster(votes, dist_threshold))
}

pub(crate) mod ward {
    /// Greedy agglomeration with the Lance–Williams Ward update on
    /// squared distances. O(n^2) memory, O(n^3) time; vote sets are
    /// small (hundreds at most).
    pub fn cluster(points: &[[f64; 2]], threshold: f64) -> Vec<usize> {
        let n = points.len();
        if n == 0 {
            return Vec::new();
        }
        let thr2 = threshold * threshold;
        let mut d2 = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                let v = dx * dx + dy * dy;
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
        }
        let mut active: Vec<bool> = vec![true; n];
        let mut size: Vec<usize> = vec![1; n];
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..n {
                if !active[i] {
                    continue;
                }
                for j in (i + 1)..n {
                    if !active[j] {
                        continue;
                    }
                    let v = d2[i * n + j];
                    if best.is_none_or(|(_, _, bv)| v < bv) {
                        best = Some((i, j, v));
                    }
                }
            }
            let Some((i, j, v)) = best else { break };
            if v > thr2 {
                break;
            }
            // Merge j into i and update linkages via Lance-Williams.
            let (si, sj) = (size[i] as f64, size[j] as f64);
            for k in 0..n {
                if !active[k] || k == i || k == j {
                    continue;
                }
                let sk = size[k] as f64;
                let upd = ((si + sk) * d2[i * n + k] + (sj + sk) * d2[j * n + k] - sk * v)
                    / (si + sj + sk);
                d2[i * n + k] = upd;
                d2[k * n + i] = upd;
            }
            size[i] += size[j];
            active[j] = false;
            let moved = std::mem::take(&mut members[j]);
            members[i].extend(moved);
        }

        // Order clusters by size descending, ties by smallest member.
        let mut clusters: Vec<&Vec<usize>> =
            (0..n).filter(|&i| active[i]).map(|i| &members[i]).collect();
        clusters.sort_by_key(|m| (usize::MAX - m.len(), *m.iter().min().unwrap()));
        let mut labels = vec![0usize; n];
        for (label, m) in clusters.iter().enumerate() {
            for &idx in m.iter() {
                labels[idx] = label;
            }
        }
        labels
    }
}

/// A lane boundary expressed as `x = f(y)` with ascending-power
/// coefficients, valid over a y-range.
///
/// `class_id` is attached by whoever produced the fit; [`fit_polynomial`]
/// leaves it 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePolynomial {
    pub class_id: usize,
    /// coeffs[k] multiplies y^k.
    pub coeffs: Vec<f64>,
    pub y_range: (f64, f64),
}

impl LanePolynomial {
    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }
}

/// Least-squares fit of x as a function of y. The effective degree is
/// `min(degree, n_points - 1)`; the fit is performed on a centered,
/// scaled ordinate for conditioning and expanded back to monomials.
pub fn fit_polynomial(points: &[[f64; 2]], degree: usize) -> Result<LanePolynomial> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "polynomial fit needs >= 2 points, got {}",
            points.len()
        )));
    }
    let y_min = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let y_max = points
        .iter()
        .map(|p| p[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = y_max - y_min;
    if spread < 1e-9 {
        return Err(Error::DegenerateFit(format!(
            "all {} points share y = {y_min}",
            points.len()
        )));
    }
    let deg = degree.min(points.len() - 1);
    let mid = (y_min + y_max) / 2.0;
    let half = spread / 2.0;

    // Normal equations in the scaled basis t = (y - mid) / half.
    let m = deg + 1;
    let mut ata = vec![0.0f64; m * m];
    let mut atb = vec![0.0f64; m];
    for p in points {
        let t = (p[1] - mid) / half;
        let mut pow = vec![1.0f64; m];
        for k in 1..m {
            pow[k] = pow[k - 1] * t;
        }
        for r in 0..m {
            atb[r] += pow[r] * p[0];
            for c in 0..m {
                ata[r * m + c] += pow[r] * pow[c];
            }
        }
    }
    let b = solve_linear(&mut ata, &mut atb, m)?;

    // Expand sum b_k ((y - mid)/half)^k to monomials in y.
    let u = [-mid / half, 1.0 / half]; // (y - mid)/half as a linear poly
    let mut coeffs = vec![0.0f64; 1];
    for &bk in b.iter().rev() {
        // coeffs = coeffs * u + bk
        let mut next = vec![0.0f64; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c * u[0];
            next[i + 1] += c * u[1];
        }
        next[0] += bk;
        coeffs = next;
    }
    coeffs.truncate(m);

    Ok(LanePolynomial {
        class_id: 0,
        coeffs,
        y_range: (y_min, y_max),
    })
}

/// Gaussian elimination with partial pivoting on a dense m×m system.
fn solve_linear(a: &mut [f64], b: &mut [f64], m: usize) -> Result<Vec<f64>> {
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r1, &r2| {
                a[r1 * m + col]
                    .abs()
                    .partial_cmp(&a[r2 * m + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot * m + col].abs() < 1e-12 {
            return Err(Error::DegenerateFit("singular normal equations".into()));
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..m {
            let f = a[row * m + col] / a[col * m + col];
            for k in col..m {
                a[row * m + k] -= f * a[col * m + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in (row + 1)..m {
            acc -= a[row * m + k] * x[k];
        }
        x[row] = acc / a[row * m + row];
    }
    Ok(x)
}

/// Lane decoding configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneDecodeParams {
    pub threshold: f64,
    pub dist_threshold: f64,
    pub poly_degree: usize,
}

impl Default for LaneDecodeParams {
    fn default() -> Self {
        LaneDecodeParams {
            threshold: DEFAULT_THRESHOLD,
            dist_threshold: DEFAULT_CLUSTER_DIST,
            poly_degree: DEFAULT_POLY_DEGREE,
        }
    }
}

/// Decoded lane instances with, where the cluster is large enough, a
/// fitted polynomial per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLanes {
    pub instances: Vec<LaneInstance>,
    /// Parallel to `instances`; None for clusters smaller than
    /// `poly_degree + 1`.
    pub polynomials: Vec<Option<LanePolynomial>>,
}

/// Per class: extract keypoint peaks, add each keypoint's offset to get
/// its midpoint vote, cluster the votes, and emit one instance per
/// cluster (points in image space, ordered by y then x).
pub fn decode_lanes(
    lane_heatmaps: &Tensor,
    lane_offsets: &Tensor,
    grid: &GridSpec,
    params: &LaneDecodeParams,
) -> Result<DecodedLanes> {
    let (gw, gh) = (grid.grid_w(), grid.grid_h());
    lane_heatmaps.expect_shape(&[NUM_LANE_CLASSES, gh, gw], "lane_heatmaps")?;
    lane_offsets.expect_shape(&[2, gh, gw], "lane_offsets")?;

    let s = grid.stride() as f64;
    let mut instances = Vec::new();
    let mut polynomials = Vec::new();

    for class_id in 0..NUM_LANE_CLASSES {
        let peaks = peaks_in(lane_heatmaps.channel(class_id), gw, gh, params.threshold);
        if peaks.is_empty() {
            continue;
        }
        let keypoints: Vec<(usize, usize)> = peaks.iter().map(|p| p.cell).collect();
        let votes: Vec<[f64; 2]> = keypoints
            .iter()
            .map(|&(gx, gy)| {
                [
                    gx as f64 + lane_offsets.at3(0, gy, gx) as f64,
                    gy as f64 + lane_offsets.at3(1, gy, gx) as f64,
                ]
            })
            .collect();
        let labels = cluster_by_midpoint(&keypoints, &votes, params.dist_threshold)?;
        let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
        for label in 0..n_clusters {
            let mut points: Vec<[f64; 2]> = keypoints
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == label)
                .map(|(&(gx, gy), _)| [gx as f64 * s, gy as f64 * s])
                .collect();
            points.sort_by(|a, b| {
                a[1].partial_cmp(&b[1])
                    .unwrap()
                    .then(a[0].partial_cmp(&b[0]).unwrap())
            });
            let poly = if points.len() > params.poly_degree {
                match fit_polynomial(&points, params.poly_degree) {
                    Ok(mut p) => {
                        p.class_id = class_id;
                        Some(p)
                    }
                    // Horizontal clusters have no x = f(y) representation.
                    Err(Error::DegenerateFit(_)) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            instances.push(LaneInstance::from_decoded(class_id, points)?);
            polynomials.push(poly);
        }
    }
    Ok(DecodedLanes {
        instances,
        polynomials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_160x80() -> GridSpec {
        GridSpec::new(640, 320, 4).unwrap()
    }

    fn map_with(w: usize, h: usize, cells: &[(usize, usize, f32)]) -> Tensor {
        let mut t = Tensor::zeros(&[h, w]);
        for &(x, y, v) in cells {
            t.set2(y, x, v);
        }
        t
    }

    #[test]
    fn single_peak_extracted() {
        let map = map_with(160, 80, &[(7, 3, 0.9)]);
        let peaks = extract_peaks(&map, 0.25).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].cell, (7, 3));
        assert_eq!(peaks[0].score, 0.9);
    }

    #[test]
    fn zeros_yield_no_peaks() {
        let map = Tensor::zeros(&[80, 160]);
        assert!(extract_peaks(&map, 0.25).unwrap().is_empty());
    }

    #[test]
    fn sub_threshold_peak_rejected() {
        let map = map_with(160, 80, &[(7, 3, 0.20)]);
        assert!(extract_peaks(&map, 0.25).unwrap().is_empty());
    }

    #[test]
    fn plateau_ties_are_kept() {
        let map = map_with(10, 10, &[(4, 4, 0.8), (5, 4, 0.8)]);
        let peaks = extract_peaks(&map, 0.25).unwrap();
        assert_eq!(peaks.len(), 2);
    }

    #[test]
    fn peaks_sorted_by_descending_score() {
        let map = map_with(20, 20, &[(2, 2, 0.5), (10, 10, 0.9), (17, 4, 0.7)]);
        let peaks = extract_peaks(&map, 0.25).unwrap();
        let scores: Vec<f32> = peaks.iter().map(|p| p.score).collect();
        assert_eq!(scores, vec![0.9, 0.7, 0.5]);
    }

    #[test]
    fn decode_boxes_inverts_offsets() {
        let g = grid_160x80();
        let mut hm = Tensor::zeros(&[NUM_DET_CLASSES, 80, 160]);
        hm.set3(0, 20, 10, 0.9);
        let mut off = Tensor::zeros(&[4, 80, 160]);
        off.set3(0, 20, 10, 2.0);
        off.set3(1, 20, 10, 3.0);
        off.set3(2, 20, 10, -2.0);
        off.set3(3, 20, 10, -3.0);
        let occ = Tensor::zeros(&[1, 80, 160]);
        let boxes = decode_boxes(&hm, &off, &occ, &g, 0.25, 0.5).unwrap();
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (32.0, 68.0, 48.0, 92.0));
        assert_eq!(b.class_id, 0);
        assert!(!b.occluded);
        assert!((b.score - 0.9).abs() < 1e-6);
    }

    #[test]
    fn decode_boxes_occlusion_threshold() {
        let g = grid_160x80();
        let mut hm = Tensor::zeros(&[NUM_DET_CLASSES, 80, 160]);
        hm.set3(0, 20, 10, 0.9);
        let mut off = Tensor::zeros(&[4, 80, 160]);
        off.set3(0, 20, 10, 2.0);
        off.set3(1, 20, 10, 3.0);
        off.set3(2, 20, 10, -2.0);
        off.set3(3, 20, 10, -3.0);
        let mut occ = Tensor::zeros(&[1, 80, 160]);
        occ.set3(0, 20, 10, 0.7);
        let boxes = decode_boxes(&hm, &off, &occ, &g, 0.25, 0.5).unwrap();
        assert!(boxes[0].occluded);
    }

    #[test]
    fn decode_boxes_discards_degenerate() {
        let g = grid_160x80();
        let mut hm = Tensor::zeros(&[NUM_DET_CLASSES, 80, 160]);
        hm.set3(0, 20, 10, 0.9);
        // zero offsets produce a zero-extent box at the cell
        let off = Tensor::zeros(&[4, 80, 160]);
        let occ = Tensor::zeros(&[1, 80, 160]);
        assert!(decode_boxes(&hm, &off, &occ, &g, 0.25, 0.5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn decode_boxes_checks_shapes() {
        let g = grid_160x80();
        let hm = Tensor::zeros(&[NUM_DET_CLASSES, 80, 160]);
        let off = Tensor::zeros(&[4, 80, 159]);
        let occ = Tensor::zeros(&[1, 80, 160]);
        assert!(decode_boxes(&hm, &off, &occ, &g, 0.25, 0.5).is_err());
    }

    #[test]
    fn cluster_two_obvious_groups() {
        let votes: Vec<[f64; 2]> = (0..5)
            .map(|_| [10.0, 10.0])
            .chain((0..5).map(|_| [50.0, 50.0]))
            .collect();
        let kps: Vec<(usize, usize)> = votes
            .iter()
            .map(|v| (v[0] as usize, v[1] as usize))
            .collect();
        let labels = cluster_by_midpoint(&kps, &votes, 5.0).unwrap();
        assert_eq!(labels[..5], [labels[0]; 5]);
        assert_eq!(labels[5..], [labels[5]; 5]);
        assert_ne!(labels[0], labels[5]);
        assert_eq!(labels.iter().copied().max().unwrap(), 1);
    }

    #[test]
    fn cluster_single_point() {
        let labels = cluster_by_midpoint(&[(3, 4)], &[[3.0, 4.0]], 5.0).unwrap();
        assert_eq!(labels, vec![0]);
    }

    #[test]
    fn cluster_empty_input() {
        let labels = cluster_by_midpoint(&[], &[], 5.0).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn cluster_labels_ordered_by_size() {
        let votes: Vec<[f64; 2]> = vec![[100.0, 100.0]; 2]
            .into_iter()
            .chain(vec![[0.0, 0.0]; 5])
            .collect();
        let kps = vec![(0, 0); votes.len()];
        let labels = cluster_by_midpoint(&kps, &votes, 5.0).unwrap();
        // the size-5 cluster gets label 0 even though it comes second
        assert_eq!(&labels[2..], &[0; 5]);
        assert_eq!(&labels[..2], &[1; 2]);
    }

    #[test]
    fn fit_exact_line() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [2.0 * i as f64 + 1.0, i as f64]).collect();
        let p = fit_polynomial(&pts, 1).unwrap();
        assert!((p.coeffs[0] - 1.0).abs() < 1e-9);
        assert!((p.coeffs[1] - 2.0).abs() < 1e-9);
        assert_eq!(p.y_range, (0.0, 9.0));
    }

    #[test]
    fn fit_degree_reduces_with_points() {
        let p = fit_polynomial(&[[0.0, 0.0], [10.0, 10.0]], 3).unwrap();
        assert_eq!(p.coeffs.len(), 2);
    }

    #[test]
    fn fit_cubic_residual_small() {
        let f = |y: f64| 40.0 + 0.8 * y - 3e-3 * y * y + 4e-6 * y * y * y;
        let pts: Vec<[f64; 2]> = (0..20)
            .map(|i| [f(i as f64 * 16.0), i as f64 * 16.0])
            .collect();
        let p = fit_polynomial(&pts, 3).unwrap();
        let max_resid = pts
            .iter()
            .map(|q| (p.eval(q[1]) - q[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_resid < 1e-6, "residual {max_resid}");
    }

    #[test]
    fn fit_rejects_constant_y() {
        let pts = vec![[0.0, 5.0], [10.0, 5.0], [20.0, 5.0]];
        assert!(matches!(
            fit_polynomial(&pts, 1),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn decode_lanes_empty_heatmaps() {
        let g = grid_160x80();
        let hm = Tensor::zeros(&[NUM_LANE_CLASSES, 80, 160]);
        let off = Tensor::zeros(&[2, 80, 160]);
        let out = decode_lanes(&hm, &off, &g, &LaneDecodeParams::default()).unwrap();
        assert!(out.instances.is_empty());
        assert!(out.polynomials.is_empty());
    }
}
