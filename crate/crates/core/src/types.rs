//! Domain types shared by every module, and the image↔grid coordinate
//! conventions.
//!
//! Image space is continuous pixels with the origin in the top-left
//! corner; output (grid) space is the image downscaled by the output
//! stride. Rounding to a grid cell is half-away-from-zero, and cells
//! that round past the border are clamped to the last valid cell.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Number of object-detection classes.
pub const NUM_DET_CLASSES: usize = 10;
/// Number of lane-marking classes.
pub const NUM_LANE_CLASSES: usize = 8;
/// Number of weather tag classes.
pub const NUM_WEATHER_CLASSES: usize = 7;
/// Number of scene tag classes.
pub const NUM_SCENE_CLASSES: usize = 7;
/// Number of time-of-day tag classes.
pub const NUM_TIMEOFDAY_CLASSES: usize = 4;

/// Input resolution plus output stride, with the derived grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    input_w: u32,
    input_h: u32,
    stride: u32,
}

impl GridSpec {
    /// The stride must divide both input dimensions exactly.
    pub fn new(input_w: u32, input_h: u32, stride: u32) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        if input_w == 0 || input_h == 0 {
            return Err(Error::invalid("input dimensions must be positive"));
        }
        if !input_w.is_multiple_of(stride) || !input_h.is_multiple_of(stride) {
            return Err(Error::invalid(format!(
                "stride {stride} does not divide input {input_w}x{input_h} exactly"
            )));
        }
        Ok(GridSpec {
            input_w,
            input_h,
            stride,
        })
    }

    pub fn input_w(&self) -> u32 {
        self.input_w
    }

    pub fn input_h(&self) -> u32 {
        self.input_h
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn grid_w(&self) -> usize {
        (self.input_w / self.stride) as usize
    }

    pub fn grid_h(&self) -> usize {
        (self.input_h / self.stride) as usize
    }
}

/// Maps an image-space point to its grid cell: `round(p / S)` with
/// half-away-from-zero rounding, clamped into the grid.
pub fn image_to_grid(p: [f64; 2], grid: &GridSpec) -> (usize, usize) {
    let s = grid.stride() as f64;
    let gx = (p[0] / s).round().clamp(0.0, (grid.grid_w() - 1) as f64) as usize;
    let gy = (p[1] / s).round().clamp(0.0, (grid.grid_h() - 1) as f64) as usize;
    (gx, gy)
}

/// An image-space bounding box with class, occlusion flag and score.
///
/// Ground-truth boxes carry score 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBoxAnn {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub class_id: usize,
    pub occluded: bool,
    pub score: f64,
}

impl BoundingBoxAnn {
    pub fn new(
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        class_id: usize,
        occluded: bool,
        score: f64,
    ) -> Result<Self> {
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::invalid(format!(
                "degenerate box ({x1},{y1},{x2},{y2})"
            )));
        }
        if class_id >= NUM_DET_CLASSES {
            return Err(Error::invalid(format!(
                "box class {class_id} out of range 0..{NUM_DET_CLASSES}"
            )));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!("score {score} outside [0,1]")));
        }
        Ok(BoundingBoxAnn {
            x1,
            y1,
            x2,
            y2,
            class_id,
            occluded,
            score,
        })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Image-space center point.
    pub fn center(&self) -> [f64; 2] {
        [(self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0]
    }

    /// Checks the in-bounds invariant against an image size.
    pub fn check_bounds(&self, input_w: u32, input_h: u32) -> Result<()> {
        let (w, h) = (input_w as f64, input_h as f64);
        if self.x1 < 0.0 || self.y1 < 0.0 || self.x2 > w || self.y2 > h {
            return Err(Error::invalid(format!(
                "box ({},{},{},{}) outside image {input_w}x{input_h}",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }
}

/// An ordered lane-marking polyline with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneInstance {
    pub class_id: usize,
    pub points: Vec<[f64; 2]>,
}

impl LaneInstance {
    /// Annotation constructor: requires at least two points.
    pub fn new(class_id: usize, points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "lane needs >= 2 points, got {}",
                points.len()
            )));
        }
        Self::from_decoded(class_id, points)
    }

    /// Decoder constructor: clusters may legitimately hold a single
    /// keypoint, so only the class range is enforced.
    pub fn from_decoded(class_id: usize, points: Vec<[f64; 2]>) -> Result<Self> {
        if class_id >= NUM_LANE_CLASSES {
            return Err(Error::invalid(format!(
                "lane class {class_id} out of range 0..{NUM_LANE_CLASSES}"
            )));
        }
        Ok(LaneInstance { class_id, points })
    }
}

/// Frame-level weather / scene / time-of-day labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneTags {
    pub weather: usize,
    pub scene: usize,
    pub time_of_day: usize,
}

impl SceneTags {
    pub fn new(weather: usize, scene: usize, time_of_day: usize) -> Result<Self> {
        if weather >= NUM_WEATHER_CLASSES {
            return Err(Error::invalid(format!(
                "weather tag {weather} out of range"
            )));
        }
        if scene >= NUM_SCENE_CLASSES {
            return Err(Error::invalid(format!("scene tag {scene} out of range")));
        }
        if time_of_day >= NUM_TIMEOFDAY_CLASSES {
            return Err(Error::invalid(format!(
                "time-of-day tag {time_of_day} out of range"
            )));
        }
        Ok(SceneTags {
            weather,
            scene,
            time_of_day,
        })
    }
}

pub type Detections = Vec<BoundingBoxAnn>;
pub type LaneSet = Vec<LaneInstance>;

/// One annotated frame: geometry only, no pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_w: u32,
    pub image_h: u32,
    pub boxes: Detections,
    pub lanes: LaneSet,
    pub tags: SceneTags,
}

/// A boolean grid, row-major, used for offset-validity masks and
/// rasterized lane masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    w: usize,
    h: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(w: usize, h: usize) -> Self {
        Mask {
            w,
            h,
            data: vec![false; w * h],
        }
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.w + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Set cells as (x, y) pairs, row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.w;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

/// The full set of encoded output-space target tensors for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBundle {
    /// Per-class center heatmaps, `NUM_DET_CLASSES × grid_h × grid_w`.
    pub det_heatmaps: Tensor,
    /// Box-corner offsets at center cells, `4 × grid_h × grid_w`.
    pub det_offsets: Tensor,
    /// Occlusion labels at center cells, `1 × grid_h × grid_w`.
    pub occlusion: Tensor,
    /// True exactly where `det_offsets` / `occlusion` are defined.
    pub center_mask: Mask,
    /// Per-class lane keypoint heatmaps, `NUM_LANE_CLASSES × grid_h × grid_w`.
    pub lane_heatmaps: Tensor,
    /// Midpoint-vote offsets at keypoint cells, `2 × grid_h × grid_w`.
    pub lane_offsets: Tensor,
    /// True exactly where `lane_offsets` is defined.
    pub lane_kp_mask: Mask,
}
