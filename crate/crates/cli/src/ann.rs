//! Annotation file format: a JSON list of frames with boxes, lanes and
//! frame tags, following the BDD100K label vocabulary. Prediction files
//! use the same format plus optional per-box `score` and per-lane `poly`
//! fields. The machine-readable schema ships in `docs/annotation-schema.json`.

use crate::{CliError, Result};
use centergrid::decode::LanePolynomial;
use centergrid::metrics::FramePrediction;
use centergrid::types::{BoundingBoxAnn, LaneInstance, Scene, SceneTags};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DET_CATEGORIES: [&str; 10] = [
    "pedestrian",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
    "traffic light",
    "traffic sign",
];

pub const LANE_CATEGORIES: [&str; 8] = [
    "crosswalk",
    "double other",
    "double white",
    "double yellow",
    "road curb",
    "single other",
    "single white",
    "single yellow",
];

pub const WEATHER_TAGS: [&str; 7] = [
    "clear",
    "partly cloudy",
    "overcast",
    "rainy",
    "snowy",
    "foggy",
    "undefined",
];

pub const SCENE_TAGS: [&str; 7] = [
    "residential",
    "highway",
    "city street",
    "parking lot",
    "gas stations",
    "tunnel",
    "undefined",
];

pub const TIMEOFDAY_TAGS: [&str; 4] = ["daytime", "night", "dawn/dusk", "undefined"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameJson {
    pub name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<TagsJson>,
    #[serde(default)]
    pub boxes: Vec<BoxJson>,
    #[serde(default)]
    pub lanes: Vec<LaneJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagsJson {
    pub weather: String,
    pub scene: String,
    pub timeofday: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxJson {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub category: String,
    pub occluded: bool,
    /// Prediction confidence; ground-truth files omit it (treated as 1.0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneJson {
    pub category: String,
    pub points: Vec<[f64; 2]>,
    /// Fitted x = f(y) curve, present on decoded lanes with enough
    /// keypoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<PolyJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyJson {
    /// Ascending powers of y.
    pub coeffs: Vec<f64>,
    pub y_range: [f64; 2],
}

pub fn load_frames(path: &Path) -> Result<Vec<FrameJson>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let frames: Vec<FrameJson> = serde_json::from_str(&text).map_err(|e| {
        CliError::schema(
            path,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    Ok(frames)
}

pub fn save_frames(path: &Path, frames: &[FrameJson]) -> Result<()> {
    let text = serde_json::to_string_pretty(frames).expect("frames serialize");
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn lookup(
    table: &[&str],
    value: &str,
    what: &str,
    ctx: &str,
) -> std::result::Result<usize, String> {
    table
        .iter()
        .position(|&t| t == value)
        .ok_or_else(|| format!("{ctx}: unknown {what} category {value:?}"))
}

/// Converts a frame into core types, validating every invariant. The
/// returned scene carries ground-truth semantics (scores forced to the
/// annotated value or 1.0). Ground truth requires two points per lane;
/// decoded predictions may carry single-keypoint instances.
pub fn frame_to_scene(frame: &FrameJson, path: &Path) -> Result<Scene> {
    convert_frame(frame, path, true)
}

fn convert_frame(frame: &FrameJson, path: &Path, strict_lanes: bool) -> Result<Scene> {
    let err = |detail: String| CliError::schema(path, detail);
    let ctx = &frame.name;
    let mut boxes = Vec::with_capacity(frame.boxes.len());
    for (i, b) in frame.boxes.iter().enumerate() {
        let class_id = lookup(&DET_CATEGORIES, &b.category, "box", ctx).map_err(&err)?;
        let ann = BoundingBoxAnn::new(
            b.x1,
            b.y1,
            b.x2,
            b.y2,
            class_id,
            b.occluded,
            b.score.unwrap_or(1.0),
        )
        .map_err(|e| err(format!("{ctx}: box {i}: {e}")))?;
        ann.check_bounds(frame.width, frame.height)
            .map_err(|e| err(format!("{ctx}: box {i}: {e}")))?;
        boxes.push(ann);
    }
    let mut lanes = Vec::with_capacity(frame.lanes.len());
    for (i, l) in frame.lanes.iter().enumerate() {
        let class_id = lookup(&LANE_CATEGORIES, &l.category, "lane", ctx).map_err(&err)?;
        let lane = if strict_lanes {
            LaneInstance::new(class_id, l.points.clone())
        } else {
            LaneInstance::from_decoded(class_id, l.points.clone())
        }
        .map_err(|e| err(format!("{ctx}: lane {i}: {e}")))?;
        for (j, p) in lane.points.iter().enumerate() {
            if p[0] < 0.0 || p[0] > frame.width as f64 || p[1] < 0.0 || p[1] > frame.height as f64 {
                return Err(err(format!(
                    "{ctx}: lane {i} point {j} ({},{}) outside {}x{}",
                    p[0], p[1], frame.width, frame.height
                )));
            }
        }
        lanes.push(lane);
    }
    let tags = match &frame.tags {
        Some(t) => SceneTags::new(
            lookup(&WEATHER_TAGS, &t.weather, "weather", ctx).map_err(&err)?,
            lookup(&SCENE_TAGS, &t.scene, "scene", ctx).map_err(&err)?,
            lookup(&TIMEOFDAY_TAGS, &t.timeofday, "timeofday", ctx).map_err(&err)?,
        )
        .map_err(|e| err(format!("{ctx}: {e}")))?,
        // tags default to the "undefined" labels when absent
        None => SceneTags::new(6, 6, 3).expect("undefined tags in range"),
    };
    Ok(Scene {
        image_w: frame.width,
        image_h: frame.height,
        boxes,
        lanes,
        tags,
    })
}

/// Converts a frame into the prediction view used by evaluation.
pub fn frame_to_prediction(frame: &FrameJson, path: &Path) -> Result<FramePrediction> {
    let scene = convert_frame(frame, path, false)?;
    let polynomials = frame
        .lanes
        .iter()
        .zip(&scene.lanes)
        .map(|(l, lane)| {
            l.poly.as_ref().map(|p| LanePolynomial {
                class_id: lane.class_id,
                coeffs: p.coeffs.clone(),
                y_range: (p.y_range[0], p.y_range[1]),
            })
        })
        .collect();
    Ok(FramePrediction {
        boxes: scene.boxes,
        lanes: scene.lanes,
        polynomials,
        tags: frame.tags.as_ref().map(|_| scene.tags),
    })
}

pub fn scene_to_frame(name: String, scene: &Scene) -> FrameJson {
    FrameJson {
        name,
        width: scene.image_w,
        height: scene.image_h,
        tags: Some(TagsJson {
            weather: WEATHER_TAGS[scene.tags.weather].to_string(),
            scene: SCENE_TAGS[scene.tags.scene].to_string(),
            timeofday: TIMEOFDAY_TAGS[scene.tags.time_of_day].to_string(),
        }),
        boxes: scene
            .boxes
            .iter()
            .map(|b| BoxJson {
                x1: b.x1,
                y1: b.y1,
                x2: b.x2,
                y2: b.y2,
                category: DET_CATEGORIES[b.class_id].to_string(),
                occluded: b.occluded,
                score: None,
            })
            .collect(),
        lanes: scene
            .lanes
            .iter()
            .map(|l| LaneJson {
                category: LANE_CATEGORIES[l.class_id].to_string(),
                points: l.points.clone(),
                poly: None,
            })
            .collect(),
    }
}

/// Builds a prediction frame from decoded outputs.
pub fn decoded_to_frame(
    name: String,
    width: u32,
    height: u32,
    boxes: &[BoundingBoxAnn],
    lanes: &[LaneInstance],
    polynomials: &[Option<LanePolynomial>],
) -> FrameJson {
    FrameJson {
        name,
        width,
        height,
        tags: None,
        boxes: boxes
            .iter()
            .map(|b| BoxJson {
                x1: b.x1,
                y1: b.y1,
                x2: b.x2,
                y2: b.y2,
                category: DET_CATEGORIES[b.class_id].to_string(),
                occluded: b.occluded,
                score: Some(b.score),
            })
            .collect(),
        lanes: lanes
            .iter()
            .zip(polynomials)
            .map(|(l, poly)| LaneJson {
                category: LANE_CATEGORIES[l.class_id].to_string(),
                points: l.points.clone(),
                poly: poly.as_ref().map(|p| PolyJson {
                    coeffs: p.coeffs.clone(),
                    y_range: [p.y_range.0, p.y_range.1],
                }),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_tables_have_documented_sizes() {
        assert_eq!(DET_CATEGORIES.len(), 10);
        assert_eq!(LANE_CATEGORIES.len(), 8);
        assert_eq!(WEATHER_TAGS.len(), 7);
        assert_eq!(SCENE_TAGS.len(), 7);
        assert_eq!(TIMEOFDAY_TAGS.len(), 4);
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let text = r#"[{"name":"f","width":64,"height":64,"bogus":1}]"#;
        let err = serde_json::from_str::<Vec<FrameJson>>(text).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn unknown_category_is_rejected() {
        let frame = FrameJson {
            name: "f".into(),
            width: 64,
            height: 64,
            tags: None,
            boxes: vec![BoxJson {
                x1: 0.0,
                y1: 0.0,
                x2: 10.0,
                y2: 10.0,
                category: "spaceship".into(),
                occluded: false,
                score: None,
            }],
            lanes: vec![],
        };
        let err = frame_to_scene(&frame, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("spaceship"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn scene_round_trips_through_json() {
        let scene = Scene {
            image_w: 640,
            image_h: 320,
            boxes: vec![BoundingBoxAnn::new(1.0, 2.0, 30.0, 40.0, 2, true, 1.0).unwrap()],
            lanes: vec![LaneInstance::new(6, vec![[10.0, 10.0], [20.0, 300.0]]).unwrap()],
            tags: SceneTags::new(0, 1, 2).unwrap(),
        };
        let frame = scene_to_frame("frame1".into(), &scene);
        let back = frame_to_scene(&frame, Path::new("mem")).unwrap();
        assert_eq!(back, scene);
    }
}
