//! Ground-truth annotations to output-space target tensors.
//!
//! Detection targets: one Gaussian heatmap per class (element-wise max
//! over objects), a shared 4-channel corner-offset map read at the
//! rounded center cell, a 1-channel occlusion map and the center mask.
//!
//! Lane targets: one Gaussian heatmap per lane class over all keypoints
//! regardless of instance, plus a 2-channel offset map voting for the
//! instance midpoint at each keypoint cell.

use crate::tensor::Tensor;
use crate::types::{
    image_to_grid, BoundingBoxAnn, GridSpec, LaneInstance, Mask, TargetBundle, NUM_DET_CLASSES,
    NUM_LANE_CLASSES,
};
use crate::{Error, Result};

/// A single Gaussian to splat: integer grid cell plus sigma in grid-cell
/// units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub center: (usize, usize),
    pub sigma: f64,
}

/// Splat radius in sigmas. Values beyond this distance are below 5e-6,
/// so truncation changes the map by less than the 1e-4 documented bound.
const SPLAT_RADIUS_SIGMAS: f64 = 3.5;

/// Sigma floor applied by [`corner_sigma`].
pub const SIGMA_FLOOR: f64 = 0.5;

/// Default minimum corner-displacement IoU used to derive sigma.
pub const DEFAULT_MIN_IOU: f64 = 0.7;

/// Default lane keypoint Gaussian sigma (grid cells).
pub const DEFAULT_LANE_SIGMA: f64 = 2.0;

/// Default lane resampling pace (image-space pixels of arc length).
pub const DEFAULT_PACE: f64 = 10.0;

/// Renders `H(x,y) = max_j exp(-((x-cx_j)^2 + (y-cy_j)^2) / sigma_j^2)`
/// over the output grid. An empty keypoint list yields an all-zero map.
///
/// Each Gaussian is evaluated inside a 3.5-sigma window; outside it the
/// contribution (< 5e-6) is dropped.
pub fn splat_gaussians(keypoints: &[GaussianSpec], grid: &GridSpec) -> Result<Tensor> {
    let (gw, gh) = (grid.grid_w(), grid.grid_h());
    let mut map = Tensor::zeros(&[gh, gw]);
    for kp in keypoints {
        if !(kp.sigma > 0.0) {
            return Err(Error::invalid(format!(
                "gaussian sigma must be positive, got {}",
                kp.sigma
            )));
        }
        let (cx, cy) = kp.center;
        if cx >= gw || cy >= gh {
            return Err(Error::invalid(format!(
                "gaussian center ({cx},{cy}) outside {gw}x{gh} grid"
            )));
        }
        let radius = (SPLAT_RADIUS_SIGMAS * kp.sigma).ceil() as usize;
        let x0 = cx.saturating_sub(radius);
        let x1 = (cx + radius).min(gw - 1);
        let y0 = cy.saturating_sub(radius);
        let y1 = (cy + radius).min(gh - 1);
        let inv_s2 = 1.0 / (kp.sigma * kp.sigma);
        for y in y0..=y1 {
            let dy = y as f64 - cy as f64;
            for x in x0..=x1 {
                let dx = x as f64 - cx as f64;
                let v = (-(dx * dx + dy * dy) * inv_s2).exp() as f32;
                if v > map.at2(y, x) {
                    map.set2(y, x, v);
                }
            }
        }
    }
    Ok(map)
}

/// Gaussian sigma for a box: the largest corner-displacement radius `r`
/// (grid cells) that keeps the worst-case IoU at or above `min_iou`,
/// taken as the minimum of the three quadratic-case roots, then
/// `sigma = r / 3`, floored at [`SIGMA_FLOOR`].
pub fn corner_sigma(box_w: f64, box_h: f64, stride: u32, min_iou: f64) -> Result<f64> {
    if !(box_w > 0.0 && box_h > 0.0) {
        return Err(Error::invalid(format!(
            "degenerate box extent {box_w}x{box_h}"
        )));
    }
    if !(min_iou > 0.0 && min_iou < 1.0) {
        return Err(Error::invalid(format!("min_iou {min_iou} outside (0,1)")));
    }
    let w = box_w / stride as f64;
    let h = box_h / stride as f64;
    let t = min_iou;

    // Both corners shifted in the same direction (translation):
    // r^2 - (w+h) r + wh (1-t)/(1+t) >= 0, smaller root.
    let b1 = w + h;
    let c1 = w * h * (1.0 - t) / (1.0 + t);
    let r1 = (b1 - (b1 * b1 - 4.0 * c1).max(0.0).sqrt()) / 2.0;

    // Both corners shifted inward (shrink): 4r^2 - 2(w+h) r + (1-t) wh >= 0.
    let b2 = 2.0 * (w + h);
    let c2 = (1.0 - t) * w * h;
    let r2 = (b2 - (b2 * b2 - 16.0 * c2).max(0.0).sqrt()) / 8.0;

    // Both corners shifted outward (grow): 4t r^2 + 2t(w+h) r + (t-1) wh <= 0.
    let b3 = 2.0 * t * (w + h);
    let c3 = (t - 1.0) * w * h;
    let r3 = (-b3 + (b3 * b3 - 16.0 * t * c3).max(0.0).sqrt()) / (8.0 * t);

    let r = r1.min(r2).min(r3).max(0.0);
    Ok((r / 3.0).max(SIGMA_FLOOR))
}

/// Encoded detection targets for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTargets {
    pub heatmaps: Tensor,
    pub offsets: Tensor,
    pub occlusion: Tensor,
    pub center_mask: Mask,
}

/// Encodes boxes into per-class heatmaps, the shared corner-offset map,
/// the occlusion map and the center mask.
///
/// At each rounded center `c` the offsets are
/// `(c_x - x1/S, c_y - y1/S, c_x - x2/S, c_y - y2/S)`. When two centers
/// round to the same cell the larger-area box owns the offsets and the
/// occlusion label; heatmaps still take the element-wise max.
pub fn encode_detections(
    boxes: &[BoundingBoxAnn],
    grid: &GridSpec,
    min_iou: f64,
) -> Result<DetectionTargets> {
    let (gw, gh) = (grid.grid_w(), grid.grid_h());
    let s = grid.stride() as f64;

    let mut per_class: Vec<Vec<GaussianSpec>> = vec![Vec::new(); NUM_DET_CLASSES];
    let mut offsets = Tensor::zeros(&[4, gh, gw]);
    let mut occlusion = Tensor::zeros(&[1, gh, gw]);
    let mut center_mask = Mask::new(gw, gh);
    let mut owner_area = vec![0.0f64; gw * gh];

    for b in boxes {
        if b.class_id >= NUM_DET_CLASSES {
            return Err(Error::invalid(format!(
                "box class {} out of range 0..{NUM_DET_CLASSES}",
                b.class_id
            )));
        }
        b.check_bounds(grid.input_w(), grid.input_h())?;
        let sigma = corner_sigma(b.width(), b.height(), grid.stride(), min_iou)?;
        let (cx, cy) = image_to_grid(b.center(), grid);
        per_class[b.class_id].push(GaussianSpec {
            center: (cx, cy),
            sigma,
        });

        let cell = cy * gw + cx;
        if !center_mask.get(cx, cy) || b.area() > owner_area[cell] {
            owner_area[cell] = b.area();
            center_mask.set(cx, cy, true);
            offsets.set3(0, cy, cx, (cx as f64 - b.x1 / s) as f32);
            offsets.set3(1, cy, cx, (cy as f64 - b.y1 / s) as f32);
            offsets.set3(2, cy, cx, (cx as f64 - b.x2 / s) as f32);
            offsets.set3(3, cy, cx, (cy as f64 - b.y2 / s) as f32);
            occlusion.set3(0, cy, cx, if b.occluded { 1.0 } else { 0.0 });
        }
    }

    let mut heatmaps = Tensor::zeros(&[NUM_DET_CLASSES, gh, gw]);
    for (k, kps) in per_class.iter().enumerate() {
        if kps.is_empty() {
            continue;
        }
        let map = splat_gaussians(kps, grid)?;
        heatmaps.channel_mut(k).copy_from_slice(map.data());
    }

    Ok(DetectionTargets {
        heatmaps,
        offsets,
        occlusion,
        center_mask,
    })
}

/// Arc-length-uniform resampling every `pace` pixels, keeping both
/// endpoints. Polylines shorter than one pace collapse to their two
/// endpoints.
pub fn resample_polyline(points: &[[f64; 2]], pace: f64) -> Result<Vec<[f64; 2]>> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "resample needs >= 2 points, got {}",
            points.len()
        )));
    }
    if !(pace > 0.0) {
        return Err(Error::invalid(format!("pace must be positive, got {pace}")));
    }
    let total = arc_lengths(points);
    let length = *total.last().unwrap();
    if length < pace {
        return Ok(vec![points[0], *points.last().unwrap()]);
    }
    let eps = 1e-9 * length.max(1.0);
    let steps = (length / pace + eps).floor() as usize;
    let mut out: Vec<[f64; 2]> = (0..=steps)
        .map(|k| point_at_arc(points, &total, k as f64 * pace))
        .collect();
    if length - steps as f64 * pace > eps {
        out.push(*points.last().unwrap());
    }
    Ok(out)
}

/// Resamples to exactly `count` arc-length-uniform points including both
/// endpoints.
fn resample_to_count(points: &[[f64; 2]], count: usize) -> Vec<[f64; 2]> {
    debug_assert!(count >= 2 && points.len() >= 2);
    let total = arc_lengths(points);
    let length = *total.last().unwrap();
    (0..count)
        .map(|k| point_at_arc(points, &total, length * k as f64 / (count - 1) as f64))
        .collect()
}

fn arc_lengths(points: &[[f64; 2]]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut sum = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        sum += ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        acc.push(sum);
    }
    acc
}

fn point_at_arc(points: &[[f64; 2]], cum: &[f64], s: f64) -> [f64; 2] {
    let length = *cum.last().unwrap();
    if s <= 0.0 || length == 0.0 {
        return points[0];
    }
    if s >= length {
        return *points.last().unwrap();
    }
    // cum is non-decreasing; find the segment containing s.
    let mut i = match cum.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    while cum[i + 1] <= cum[i] {
        i += 1; // skip zero-length segments
    }
    let t = (s - cum[i]) / (cum[i + 1] - cum[i]);
    [
        points[i][0] + t * (points[i + 1][0] - points[i][0]),
        points[i][1] + t * (points[i + 1][1] - points[i][1]),
    ]
}

/// Flattens a cubic Bézier given by four control points into a polyline
/// with `segments` uniform parameter steps.
pub fn flatten_cubic_bezier(ctrl: &[[f64; 2]; 4], segments: usize) -> Vec<[f64; 2]> {
    let n = segments.max(1);
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let u = 1.0 - t;
            let (b0, b1, b2, b3) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
            [
                b0 * ctrl[0][0] + b1 * ctrl[1][0] + b2 * ctrl[2][0] + b3 * ctrl[3][0],
                b0 * ctrl[0][1] + b1 * ctrl[1][1] + b2 * ctrl[2][1] + b3 * ctrl[3][1],
            ]
        })
        .collect()
}

/// Merges the two edge annotations of a road marking into its center
/// polyline: both edges are resampled to the same count, oriented by
/// increasing y, and averaged pairwise.
pub fn merge_lane_edges(
    edge_a: &[[f64; 2]],
    edge_b: &[[f64; 2]],
    pace: f64,
) -> Result<Vec<[f64; 2]>> {
    let count = resample_polyline(edge_a, pace)?
        .len()
        .max(resample_polyline(edge_b, pace)?.len());
    let mut a = resample_to_count(edge_a, count);
    let mut b = resample_to_count(edge_b, count);
    orient_by_increasing_y(&mut a);
    orient_by_increasing_y(&mut b);
    Ok(a.iter()
        .zip(&b)
        .map(|(p, q)| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0])
        .collect())
}

fn orient_by_increasing_y(points: &mut [[f64; 2]]) {
    if points.last().unwrap()[1] < points[0][1] {
        points.reverse();
    }
}

/// Encoded lane targets for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTargets {
    pub heatmaps: Tensor,
    pub offsets: Tensor,
    pub kp_mask: Mask,
}

/// Encodes lane instances (already resampled to the desired keypoint
/// pace) into per-class keypoint heatmaps plus the midpoint-vote offset
/// map.
///
/// Each point maps to a grid cell; at that cell the offset is
/// `midpoint - keypoint` in grid units, where the midpoint is the
/// instance's keypoint at index `len / 2`. Cell collisions resolve
/// last-writer-wins in input order.
pub fn encode_lanes(lanes: &[LaneInstance], grid: &GridSpec, sigma: f64) -> Result<LaneTargets> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "lane sigma must be positive, got {sigma}"
        )));
    }
    let (gw, gh) = (grid.grid_w(), grid.grid_h());
    let mut per_class: Vec<Vec<GaussianSpec>> = vec![Vec::new(); NUM_LANE_CLASSES];
    let mut offsets = Tensor::zeros(&[2, gh, gw]);
    let mut kp_mask = Mask::new(gw, gh);

    for lane in lanes {
        if lane.class_id >= NUM_LANE_CLASSES {
            return Err(Error::invalid(format!(
                "lane class {} out of range 0..{NUM_LANE_CLASSES}",
                lane.class_id
            )));
        }
        if lane.points.is_empty() {
            continue;
        }
        let cells: Vec<(usize, usize)> = lane
            .points
            .iter()
            .map(|&p| image_to_grid(p, grid))
            .collect();
        let (mx, my) = cells[cells.len() / 2];
        for &(gx, gy) in &cells {
            per_class[lane.class_id].push(GaussianSpec {
                center: (gx, gy),
                sigma,
            });
            offsets.set3(0, gy, gx, (mx as f64 - gx as f64) as f32);
            offsets.set3(1, gy, gx, (my as f64 - gy as f64) as f32);
            kp_mask.set(gx, gy, true);
        }
    }

    let mut heatmaps = Tensor::zeros(&[NUM_LANE_CLASSES, gh, gw]);
    for (l, kps) in per_class.iter().enumerate() {
        if kps.is_empty() {
            continue;
        }
        let map = splat_gaussians(kps, grid)?;
        heatmaps.channel_mut(l).copy_from_slice(map.data());
    }

    Ok(LaneTargets {
        heatmaps,
        offsets,
        kp_mask,
    })
}

/// Encoder configuration; defaults carry the documented constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeParams {
    /// Minimum corner-displacement IoU for detection sigma.
    pub min_iou: f64,
    /// Fixed lane keypoint sigma (grid cells).
    pub lane_sigma: f64,
    /// Lane resampling pace (image pixels of arc length).
    pub pace: f64,
}

impl Default for EncodeParams {
    fn default() -> Self {
        EncodeParams {
            min_iou: DEFAULT_MIN_IOU,
            lane_sigma: DEFAULT_LANE_SIGMA,
            pace: DEFAULT_PACE,
        }
    }
}

/// Full-frame encoding: boxes plus lanes into a [`TargetBundle`].
/// Lane polylines are resampled at `params.pace` before keypoint
/// extraction.
pub fn encode_targets(
    boxes: &[BoundingBoxAnn],
    lanes: &[LaneInstance],
    grid: &GridSpec,
    params: &EncodeParams,
) -> Result<TargetBundle> {
    let det = encode_detections(boxes, grid, params.min_iou)?;
    let resampled: Vec<LaneInstance> = lanes
        .iter()
        .map(|l| {
            Ok(LaneInstance {
                class_id: l.class_id,
                points: resample_polyline(&l.points, params.pace)?,
            })
        })
        .collect::<Result<_>>()?;
    let lane = encode_lanes(&resampled, grid, params.lane_sigma)?;
    Ok(TargetBundle {
        det_heatmaps: det.heatmaps,
        det_offsets: det.offsets,
        occlusion: det.occlusion,
        center_mask: det.center_mask,
        lane_heatmaps: lane.heatmaps,
        lane_offsets: lane.offsets,
        lane_kp_mask: lane.kp_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_160x80() -> GridSpec {
        GridSpec::new(640, 320, 4).unwrap()
    }

    #[test]
    fn splat_single_keypoint() {
        let g = grid_160x80();
        let map = splat_gaussians(
            &[GaussianSpec {
                center: (10, 10),
                sigma: 2.0,
            }],
            &g,
        )
        .unwrap();
        assert_eq!(map.at2(10, 10), 1.0);
        // exp(-4/4) at two cells away along x
        assert!((map.at2(10, 12) as f64 - (-1.0f64).exp()).abs() < 1e-6);
        assert!((map.at2(10, 12) - 0.36788).abs() < 1e-4);
    }

    #[test]
    fn splat_takes_elementwise_max() {
        let g = grid_160x80();
        let kps = [
            GaussianSpec {
                center: (5, 5),
                sigma: 2.0,
            },
            GaussianSpec {
                center: (7, 5),
                sigma: 2.0,
            },
        ];
        let map = splat_gaussians(&kps, &g).unwrap();
        assert!((map.at2(5, 6) as f64 - (-0.25f64).exp()).abs() < 1e-6);
        assert!((map.at2(5, 6) - 0.77880).abs() < 1e-4);
    }

    #[test]
    fn splat_empty_is_zero() {
        let g = grid_160x80();
        let map = splat_gaussians(&[], &g).unwrap();
        assert!(map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn splat_rejects_bad_sigma() {
        let g = grid_160x80();
        let kp = GaussianSpec {
            center: (0, 0),
            sigma: 0.0,
        };
        assert!(splat_gaussians(&[kp], &g).is_err());
    }

    #[test]
    fn corner_sigma_floors_at_half() {
        // min_iou close to 1 forces r to 0.
        let s = corner_sigma(40.0, 40.0, 4, 0.999_999).unwrap();
        assert_eq!(s, SIGMA_FLOOR);
    }

    #[test]
    fn corner_sigma_rejects_degenerate() {
        assert!(corner_sigma(0.0, 10.0, 4, 0.7).is_err());
        assert!(corner_sigma(10.0, 10.0, 4, 1.0).is_err());
    }

    #[test]
    fn encode_detections_offsets_match_definition() {
        let g = grid_160x80();
        let b = BoundingBoxAnn::new(32.0, 68.0, 48.0, 92.0, 0, false, 1.0).unwrap();
        let t = encode_detections(&[b], &g, 0.7).unwrap();
        // center (40, 80) -> cell (10, 20)
        assert!(t.center_mask.get(10, 20));
        assert_eq!(t.offsets.at3(0, 20, 10), 2.0);
        assert_eq!(t.offsets.at3(1, 20, 10), 3.0);
        assert_eq!(t.offsets.at3(2, 20, 10), -2.0);
        assert_eq!(t.offsets.at3(3, 20, 10), -3.0);
        assert_eq!(t.heatmaps.at3(0, 20, 10), 1.0);
    }

    #[test]
    fn encode_detections_occlusion_flag() {
        let g = grid_160x80();
        let b = BoundingBoxAnn::new(32.0, 68.0, 48.0, 92.0, 3, true, 1.0).unwrap();
        let t = encode_detections(&[b], &g, 0.7).unwrap();
        assert_eq!(t.occlusion.at3(0, 20, 10), 1.0);
    }

    #[test]
    fn encode_detections_larger_box_owns_collision() {
        let g = grid_160x80();
        // Both centers round to cell (10, 20); the second box is larger.
        let small = BoundingBoxAnn::new(36.0, 72.0, 44.0, 88.0, 0, false, 1.0).unwrap();
        let large = BoundingBoxAnn::new(24.0, 60.0, 56.0, 100.0, 1, true, 1.0).unwrap();
        let t = encode_detections(&[small.clone(), large.clone()], &g, 0.7).unwrap();
        assert_eq!(t.offsets.at3(0, 20, 10), (10.0 - 24.0 / 4.0) as f32);
        assert_eq!(t.occlusion.at3(0, 20, 10), 1.0);
        // Order independence: small last must not steal the cell back.
        let t2 = encode_detections(&[large, small], &g, 0.7).unwrap();
        assert_eq!(t2.offsets.at3(0, 20, 10), t.offsets.at3(0, 20, 10));
    }

    #[test]
    fn resample_straight_segment() {
        let pts = resample_polyline(&[[0.0, 0.0], [0.0, 100.0]], 10.0).unwrap();
        assert_eq!(pts.len(), 11);
        for (i, p) in pts.iter().enumerate() {
            assert!((p[1] - 10.0 * i as f64).abs() < 1e-9);
            assert!(p[0].abs() < 1e-9);
        }
    }

    #[test]
    fn resample_short_segment_keeps_endpoints() {
        let pts = resample_polyline(&[[0.0, 0.0], [0.0, 6.0]], 10.0).unwrap();
        assert_eq!(pts, vec![[0.0, 0.0], [0.0, 6.0]]);
    }

    #[test]
    fn resample_rejects_bad_input() {
        assert!(resample_polyline(&[[0.0, 0.0]], 10.0).is_err());
        assert!(resample_polyline(&[[0.0, 0.0], [1.0, 1.0]], 0.0).is_err());
    }

    #[test]
    fn degenerate_bezier_matches_straight_resampling() {
        // Collinear control points trace the segment (0,0)->(30,90).
        let ctrl = [[0.0, 0.0], [10.0, 30.0], [20.0, 60.0], [30.0, 90.0]];
        let flat = flatten_cubic_bezier(&ctrl, 256);
        let a = resample_polyline(&flat, 10.0).unwrap();
        let b = resample_polyline(&[[0.0, 0.0], [30.0, 90.0]], 10.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_vertical_edges_gives_center_line() {
        let a = [[10.0, 0.0], [10.0, 100.0]];
        let b = [[14.0, 0.0], [14.0, 100.0]];
        let mid = merge_lane_edges(&a, &b, 10.0).unwrap();
        assert_eq!(mid.len(), 11);
        for p in &mid {
            assert!((p[0] - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_identical_edges_is_identity() {
        // Arc length 120 is an exact pace multiple, so the uniform
        // respacing reproduces the pace-resampled edge itself.
        let a = [[5.0, 0.0], [5.0, 120.0]];
        let mid = merge_lane_edges(&a, &a, 10.0).unwrap();
        let expect = resample_polyline(&a, 10.0).unwrap();
        assert_eq!(mid.len(), expect.len());
        for (p, q) in mid.iter().zip(&expect) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_orients_by_increasing_y() {
        let a = [[10.0, 100.0], [10.0, 0.0]]; // downward order
        let b = [[14.0, 0.0], [14.0, 100.0]];
        let mid = merge_lane_edges(&a, &b, 10.0).unwrap();
        assert!(mid[0][1] < mid.last().unwrap()[1]);
        for p in &mid {
            assert!((p[0] - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lane_offsets_vote_for_midpoint() {
        let g = grid_160x80();
        // Five keypoints along y; midpoint index 2 -> cell (20, 40).
        let points: Vec<[f64; 2]> = (0..5).map(|i| [80.0, 128.0 + 16.0 * i as f64]).collect();
        let lane = LaneInstance::new(2, points).unwrap();
        let t = encode_lanes(&[lane], &g, 2.0).unwrap();
        // keypoint (20, 32) votes midpoint (20, 40): offset (0, 8)
        assert_eq!(t.offsets.at3(0, 32, 20), 0.0);
        assert_eq!(t.offsets.at3(1, 32, 20), 8.0);
        // the midpoint keypoint votes (0, 0)
        assert_eq!(t.offsets.at3(0, 40, 20), 0.0);
        assert_eq!(t.offsets.at3(1, 40, 20), 0.0);
        assert!(t.kp_mask.get(20, 40));
        assert_eq!(t.heatmaps.at3(2, 40, 20), 1.0);
    }

    #[test]
    fn heatmap_values_bounded_and_one_at_keypoints() {
        let g = grid_160x80();
        let boxes = vec![
            BoundingBoxAnn::new(10.0, 10.0, 90.0, 90.0, 0, false, 1.0).unwrap(),
            BoundingBoxAnn::new(200.0, 40.0, 380.0, 300.0, 0, true, 1.0).unwrap(),
        ];
        let t = encode_detections(&boxes, &g, 0.7).unwrap();
        assert!(t.heatmaps.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (x, y) in t.center_mask.iter_set() {
            assert_eq!(t.heatmaps.at3(0, y, x), 1.0);
        }
    }
}
