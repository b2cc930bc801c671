//! Deterministic synthetic scene generation for property and round-trip
//! tests.
//!
//! Scenes are reproducible byte-for-byte across platforms: all sampling
//! goes through a ChaCha8 stream cipher keyed by the config seed, and
//! geometry is plain f64 arithmetic.

use crate::encode::{encode_targets, EncodeParams};
use crate::types::{
    image_to_grid, BoundingBoxAnn, GridSpec, LaneInstance, Scene, SceneTags, TargetBundle,
    NUM_DET_CLASSES, NUM_LANE_CLASSES, NUM_SCENE_CLASSES, NUM_TIMEOFDAY_CLASSES,
    NUM_WEATHER_CLASSES,
};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const MAX_RETRIES: usize = 200;
const MAX_SET_RETRIES: usize = 25;

/// Synthetic scene parameters. Ranges are inclusive `[lo, hi]` pairs;
/// separations are in grid-cell units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_boxes: (usize, usize),
    pub n_lanes: (usize, usize),
    pub image_w: u32,
    pub image_h: u32,
    pub stride: u32,
    /// Minimum Euclidean distance between rounded box centers (grid
    /// cells); 0 disables the constraint.
    pub min_center_sep: f64,
    /// Lane generator polynomial degree range.
    pub lane_degree: (usize, usize),
    /// Minimum Euclidean distance between lane midpoint cells (grid
    /// cells); 0 disables the constraint.
    pub midpoint_sep_floor: f64,
    /// Resampling pace used when deriving keypoints/midpoints (image
    /// pixels).
    pub pace: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            n_boxes: (1, 6),
            n_lanes: (1, 3),
            image_w: 640,
            image_h: 320,
            stride: 4,
            min_center_sep: 2.0,
            lane_degree: (1, 3),
            midpoint_sep_floor: 20.0,
            pace: 10.0,
        }
    }
}

impl SceneConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.image_w, self.image_h, self.stride)
    }

    fn validate(&self) -> Result<()> {
        if self.n_boxes.0 > self.n_boxes.1 || self.n_lanes.0 > self.n_lanes.1 {
            return Err(Error::invalid("empty count range"));
        }
        if self.lane_degree.0 > self.lane_degree.1 {
            return Err(Error::invalid("empty degree range"));
        }
        if self.min_center_sep < 0.0 || self.midpoint_sep_floor < 0.0 {
            return Err(Error::invalid("separations must be non-negative"));
        }
        if !(self.pace > 0.0) {
            return Err(Error::invalid("pace must be positive"));
        }
        self.grid()?;
        Ok(())
    }
}

/// Generates one scene. The same config (seed included) always yields an
/// identical scene; infeasible separation constraints surface as a
/// generation error after a bounded number of retries.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n_boxes = rng.gen_range(cfg.n_boxes.0..=cfg.n_boxes.1);
    let mut boxes: Vec<BoundingBoxAnn> = Vec::with_capacity(n_boxes);
    let mut centers: Vec<(usize, usize)> = Vec::with_capacity(n_boxes);
    for _ in 0..n_boxes {
        let mut placed = false;
        for _ in 0..MAX_RETRIES {
            let b = sample_box(&mut rng, cfg);
            let cell = image_to_grid(b.center(), &grid);
            if cfg.min_center_sep > 0.0 {
                let ok = centers.iter().all(|&(cx, cy)| {
                    let dx = cx as f64 - cell.0 as f64;
                    let dy = cy as f64 - cell.1 as f64;
                    (dx * dx + dy * dy).sqrt() >= cfg.min_center_sep
                });
                if !ok {
                    continue;
                }
            }
            centers.push(cell);
            boxes.push(b);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place box {} with center separation {}",
                boxes.len(),
                cfg.min_center_sep
            )));
        }
    }

    // Lane placement can dead-end when early midpoints crowd the
    // feasible band, so failed sets restart from scratch.
    let n_lanes = rng.gen_range(cfg.n_lanes.0..=cfg.n_lanes.1);
    let mut lanes: Vec<LaneInstance> = Vec::new();
    'sets: for attempt in 0..=MAX_SET_RETRIES {
        if attempt == MAX_SET_RETRIES {
            return Err(Error::Generation(format!(
                "could not place {n_lanes} lanes with midpoint separation {}",
                cfg.midpoint_sep_floor
            )));
        }
        lanes.clear();
        let mut midpoints: Vec<(usize, usize)> = Vec::with_capacity(n_lanes);
        let mut occupied: std::collections::HashSet<(usize, usize)> =
            std::collections::HashSet::new();
        while lanes.len() < n_lanes {
            let mut placed = false;
            for _ in 0..MAX_RETRIES {
                let Some(lane) = sample_lane(&mut rng, cfg) else {
                    continue;
                };
                let cells = lane_keypoint_cells(&lane, cfg, &grid)?;
                // Distinct markings never share a keypoint cell: the
                // offset map is shared across classes, so a collision
                // would corrupt one lane's midpoint vote.
                if cells.iter().any(|c| occupied.contains(c)) {
                    continue;
                }
                let mid = cells[cells.len() / 2];
                if cfg.midpoint_sep_floor > 0.0 {
                    let ok = midpoints.iter().all(|&(mx, my)| {
                        let dx = mx as f64 - mid.0 as f64;
                        let dy = my as f64 - mid.1 as f64;
                        (dx * dx + dy * dy).sqrt() >= cfg.midpoint_sep_floor
                    });
                    if !ok {
                        continue;
                    }
                }
                occupied.extend(cells.iter().copied());
                midpoints.push(mid);
                lanes.push(lane);
                placed = true;
                break;
            }
            if !placed {
                continue 'sets;
            }
        }
        break;
    }

    let tags = SceneTags {
        weather: rng.gen_range(0..NUM_WEATHER_CLASSES),
        scene: rng.gen_range(0..NUM_SCENE_CLASSES),
        time_of_day: rng.gen_range(0..NUM_TIMEOFDAY_CLASSES),
    };

    Ok(Scene {
        image_w: cfg.image_w,
        image_h: cfg.image_h,
        boxes,
        lanes,
        tags,
    })
}

fn sample_box(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> BoundingBoxAnn {
    let (iw, ih) = (cfg.image_w as f64, cfg.image_h as f64);
    let w = rng.gen_range(12.0..=(0.35 * iw).max(13.0));
    let h = rng.gen_range(12.0..=(0.35 * ih).max(13.0));
    let cx = rng.gen_range(w / 2.0..=iw - w / 2.0);
    let cy = rng.gen_range(h / 2.0..=ih - h / 2.0);
    BoundingBoxAnn {
        x1: cx - w / 2.0,
        y1: cy - h / 2.0,
        x2: cx + w / 2.0,
        y2: cy + h / 2.0,
        class_id: rng.gen_range(0..NUM_DET_CLASSES),
        occluded: rng.gen_bool(0.3),
        score: 1.0,
    }
}

/// Samples a lane as `x = f(y)` through degree+1 anchors spread between
/// a bottom point and a convergence-biased top point, emitted as a dense
/// polyline (2 px steps in y). Returns None when the curve escapes the
/// horizontal margins.
fn sample_lane(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Option<LaneInstance> {
    let (iw, ih) = (cfg.image_w as f64, cfg.image_h as f64);
    let degree = rng.gen_range(cfg.lane_degree.0..=cfg.lane_degree.1);
    let y_top = ih * rng.gen_range(0.05..=0.30);
    let y_bot = ih * rng.gen_range(0.70..=0.97);
    let x_bot = iw * rng.gen_range(0.08..=0.92);
    let x_top = iw * (0.5 + rng.gen_range(-0.28..=0.28));

    let n_anchor = degree + 1;
    let mut ys = Vec::with_capacity(n_anchor);
    let mut xs = Vec::with_capacity(n_anchor);
    for i in 0..n_anchor {
        let t = if n_anchor == 1 {
            0.5
        } else {
            i as f64 / (n_anchor - 1) as f64
        };
        let y = y_top + t * (y_bot - y_top);
        let mut x = x_top + t * (x_bot - x_top);
        if i > 0 && i + 1 < n_anchor {
            x += iw * rng.gen_range(-0.05..=0.05);
        }
        ys.push(y);
        xs.push(x);
    }

    let margin = 2.0;
    let steps = ((y_bot - y_top) / 2.0).ceil().max(1.0) as usize;
    let mut points = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let y = y_top + (y_bot - y_top) * i as f64 / steps as f64;
        let x = lagrange_eval(&ys, &xs, y);
        if !(margin..=iw - margin).contains(&x) {
            return None;
        }
        points.push([x, y]);
    }
    Some(LaneInstance {
        class_id: rng.gen_range(0..NUM_LANE_CLASSES),
        points,
    })
}

fn lagrange_eval(ys: &[f64], xs: &[f64], y: f64) -> f64 {
    let n = ys.len();
    if n == 1 {
        return xs[0];
    }
    let mut acc = 0.0;
    for i in 0..n {
        let mut term = xs[i];
        for j in 0..n {
            if j != i {
                term *= (y - ys[j]) / (ys[i] - ys[j]);
            }
        }
        acc += term;
    }
    acc
}

/// Keypoint cells of a lane as the encoder will see them: resample at
/// the configured pace, map to cells. The midpoint cell is index len/2.
fn lane_keypoint_cells(
    lane: &LaneInstance,
    cfg: &SceneConfig,
    grid: &GridSpec,
) -> Result<Vec<(usize, usize)>> {
    let resampled = crate::encode::resample_polyline(&lane.points, cfg.pace)?;
    Ok(resampled.iter().map(|&p| image_to_grid(p, grid)).collect())
}

/// The target bundle a perfect predictor would emit for a scene; tests
/// read as `decode(ideal_outputs(s)) ≍ s`.
pub fn ideal_outputs(
    scene: &Scene,
    grid: &GridSpec,
    params: &EncodeParams,
) -> Result<TargetBundle> {
    encode_targets(&scene.boxes, &scene.lanes, grid, params)
}
