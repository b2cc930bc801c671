//! Command drivers: frame-parallel encode/decode/eval plus synthetic
//! generation, the loss self-check, and overlay rendering.

use crate::ann::{self, FrameJson};
use crate::io;
use crate::viz::{Canvas, CYAN, GREEN, RED, YELLOW};
use crate::{CliError, Result};
use centergrid::decode::{decode_boxes, decode_lanes, LaneDecodeParams};
use centergrid::encode::{encode_targets, EncodeParams};
use centergrid::loss::{sigmoid, weighted_l2_grad, weighted_l2_loss, HeatmapLossParams};
use centergrid::metrics::{evaluate, EvalConfig};
use centergrid::synth::{generate_scene, SceneConfig};
use centergrid::types::{NUM_DET_CLASSES, NUM_LANE_CLASSES};
use centergrid::{GridSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::PathBuf;

/// Environment variable selecting the worker count (default: all cores).
pub const WORKERS_ENV: &str = "CENTERGRID_WORKERS";

pub fn init_worker_pool() {
    if let Ok(n) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = n.parse::<usize>() {
            // build_global fails if a pool already exists; that's fine
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

const HEADS: [&str; 7] = [
    "det_heatmaps",
    "det_offsets",
    "occlusion",
    "center_mask",
    "lane_heatmaps",
    "lane_offsets",
    "lane_kp_mask",
];

fn file_stem(name: &str) -> String {
    name.replace(['/', '\\', ':'], "_")
}

pub struct EncodeArgs {
    pub ann: PathBuf,
    pub out: PathBuf,
    pub stride: u32,
    pub lane_sigma: f64,
    pub min_iou: f64,
    pub pace: f64,
}

pub fn run_encode(args: &EncodeArgs) -> Result<()> {
    let frames = ann::load_frames(&args.ann)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let params = EncodeParams {
        min_iou: args.min_iou,
        lane_sigma: args.lane_sigma,
        pace: args.pace,
    };
    frames
        .par_iter()
        .map(|frame| {
            let grid = GridSpec::new(frame.width, frame.height, args.stride)
                .map_err(|e| CliError::schema(&args.ann, format!("{}: {e}", frame.name)))?;
            let scene = ann::frame_to_scene(frame, &args.ann)?;
            let bundle = encode_targets(&scene.boxes, &scene.lanes, &grid, &params)?;
            let stem = file_stem(&frame.name);
            let path = |head: &str| args.out.join(format!("{stem}.{head}.tns"));
            io::write_tensor(&path("det_heatmaps"), &bundle.det_heatmaps)?;
            io::write_tensor(&path("det_offsets"), &bundle.det_offsets)?;
            io::write_tensor(&path("occlusion"), &bundle.occlusion)?;
            io::write_mask(&path("center_mask"), &bundle.center_mask)?;
            io::write_tensor(&path("lane_heatmaps"), &bundle.lane_heatmaps)?;
            io::write_tensor(&path("lane_offsets"), &bundle.lane_offsets)?;
            io::write_mask(&path("lane_kp_mask"), &bundle.lane_kp_mask)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    println!(
        "encoded {} frame(s) into {} ({} tensors each)",
        frames.len(),
        args.out.display(),
        HEADS.len()
    );
    Ok(())
}

pub struct DecodeArgs {
    pub tensors: PathBuf,
    pub out: PathBuf,
    pub stride: u32,
    pub threshold: f64,
    pub occl_threshold: f64,
    pub cluster_dist: f64,
    pub poly_degree: usize,
}

pub fn run_decode(args: &DecodeArgs) -> Result<()> {
    let suffix = ".det_heatmaps.tns";
    let mut stems: Vec<String> = std::fs::read_dir(&args.tensors)
        .map_err(|e| CliError::io(&args.tensors, e))?
        .filter_map(|entry| {
            let name = entry.ok()?.file_name().into_string().ok()?;
            name.strip_suffix(suffix).map(str::to_string)
        })
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(CliError::schema(
            &args.tensors,
            format!("no *{suffix} files found"),
        ));
    }
    let lane_params = LaneDecodeParams {
        threshold: args.threshold,
        dist_threshold: args.cluster_dist,
        poly_degree: args.poly_degree,
    };
    let frames: Vec<FrameJson> = stems
        .par_iter()
        .map(|stem| {
            let path = |head: &str| args.tensors.join(format!("{stem}.{head}.tns"));
            let det_heatmaps = io::read_tensor(&path("det_heatmaps"))?;
            let det_offsets = io::read_tensor(&path("det_offsets"))?;
            let occlusion = io::read_tensor(&path("occlusion"))?;
            let lane_heatmaps = io::read_tensor(&path("lane_heatmaps"))?;
            let lane_offsets = io::read_tensor(&path("lane_offsets"))?;
            if det_heatmaps.rank() != 3 || det_heatmaps.shape()[0] != NUM_DET_CLASSES {
                return Err(CliError::schema(
                    path("det_heatmaps"),
                    format!(
                        "expected {NUM_DET_CLASSES}xHxW detection heatmaps, got {:?}",
                        det_heatmaps.shape()
                    ),
                ));
            }
            if lane_heatmaps.rank() != 3 || lane_heatmaps.shape()[0] != NUM_LANE_CLASSES {
                return Err(CliError::schema(
                    path("lane_heatmaps"),
                    format!(
                        "expected {NUM_LANE_CLASSES}xHxW lane heatmaps, got {:?}",
                        lane_heatmaps.shape()
                    ),
                ));
            }
            let (gh, gw) = (det_heatmaps.shape()[1], det_heatmaps.shape()[2]);
            let width = gw as u32 * args.stride;
            let height = gh as u32 * args.stride;
            let grid = GridSpec::new(width, height, args.stride)?;
            let boxes = decode_boxes(
                &det_heatmaps,
                &det_offsets,
                &occlusion,
                &grid,
                args.threshold,
                args.occl_threshold,
            )?;
            let lanes = decode_lanes(&lane_heatmaps, &lane_offsets, &grid, &lane_params)?;
            Ok(ann::decoded_to_frame(
                stem.clone(),
                width,
                height,
                &boxes,
                &lanes.instances,
                &lanes.polynomials,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    ann::save_frames(&args.out, &frames)?;
    println!(
        "decoded {} frame(s) into {}",
        frames.len(),
        args.out.display()
    );
    Ok(())
}

pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub out: PathBuf,
    pub line_width: Option<u32>,
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let pred_frames = ann::load_frames(&args.pred)?;
    let gt_frames = ann::load_frames(&args.gt)?;
    let by_name: HashMap<&str, &FrameJson> =
        pred_frames.iter().map(|f| (f.name.as_str(), f)).collect();
    if pred_frames.len() != by_name.len() {
        return Err(CliError::schema(&args.pred, "duplicate frame names"));
    }

    let mut preds = Vec::with_capacity(gt_frames.len());
    let mut gts = Vec::with_capacity(gt_frames.len());
    for gt_frame in &gt_frames {
        let stem = file_stem(&gt_frame.name);
        let pred_frame = by_name
            .get(gt_frame.name.as_str())
            .or_else(|| by_name.get(stem.as_str()))
            .ok_or_else(|| {
                CliError::schema(
                    &args.pred,
                    format!("missing predictions for frame {:?}", gt_frame.name),
                )
            })?;
        preds.push(ann::frame_to_prediction(pred_frame, &args.pred)?);
        gts.push(ann::frame_to_scene(gt_frame, &args.gt)?);
    }

    let report = evaluate(
        &preds,
        &gts,
        &EvalConfig {
            line_width: args.line_width,
            ..Default::default()
        },
    )?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.out, text).map_err(|e| CliError::io(&args.out, e))?;
    println!(
        "frames {}  mAP@0.5 {:.4}  occl_acc {:.4} ({} matches)  lane_iou {:.4}  \
         F1 weather/scene/tod {:.4}/{:.4}/{:.4}",
        gt_frames.len(),
        report.map50,
        report.occl_accuracy,
        report.occl_matches,
        report.lane_iou,
        report.f1_weather,
        report.f1_scene,
        report.f1_tod
    );
    println!("report written to {}", args.out.display());
    Ok(())
}

pub struct SynthArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub frames: usize,
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let base: SceneConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::schema(
            &args.config,
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let frames: Vec<FrameJson> = (0..args.frames.max(1))
        .map(|i| {
            let cfg = SceneConfig {
                seed: base.seed.wrapping_add(i as u64),
                ..base
            };
            let scene = generate_scene(&cfg)?;
            Ok(ann::scene_to_frame(format!("synth_{i:06}"), &scene))
        })
        .collect::<Result<Vec<_>>>()?;
    ann::save_frames(&args.out, &frames)?;
    println!(
        "generated {} synthetic frame(s) into {}",
        frames.len(),
        args.out.display()
    );
    Ok(())
}

pub struct LosscheckArgs {
    pub seed: u64,
    pub trials: usize,
}

/// Verifies the fixed-point loss values and the analytic gradient
/// against central finite differences; fails (exit 1) past 1e-3
/// relative error.
pub fn run_losscheck(args: &LosscheckArgs) -> Result<()> {
    let params = HeatmapLossParams::default();
    let single = |v: f32| Tensor::new(vec![1, 1], vec![v]).expect("1x1 tensor");
    let miss = weighted_l2_loss(&single(1.0), &single(0.0), &params).expect("shapes match");
    let false_pos = weighted_l2_loss(&single(0.0), &single(1.0), &params).expect("shapes match");
    println!("loss(H=1, Hp=0) = {miss} (expect 16)");
    println!("loss(H=0, Hp=1) = {false_pos} (expect 4)");
    println!("sigmoid(4.6) = {:.4} (expect 0.990)", sigmoid(4.6));
    if miss != 16.0 || false_pos != 4.0 {
        return Err(CliError::Tolerance("hand loss values diverged".into()));
    }

    let step = 1e-3;
    let mut max_rel = 0.0f64;
    let mut cells = 0usize;
    for trial in 0..args.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(trial as u64));
        let mut fill = |_: usize| rng.gen_range(0.0f32..1.0);
        let target = Tensor::new(vec![32, 32], (0..1024).map(&mut fill).collect()).expect("shape");
        let pred = Tensor::new(vec![32, 32], (0..1024).map(&mut fill).collect()).expect("shape");
        let grad = weighted_l2_grad(&target, &pred, &params).expect("shapes match");
        for i in 0..grad.numel() {
            let (h, hp) = (target.data()[i] as f64, pred.data()[i] as f64);
            let wt = (1.0 + h).powf(params.alpha);
            // skip cells whose weight branch flips inside the stencil
            let crosses = (wt >= (1.0 + hp - step).powf(params.beta))
                != (wt >= (1.0 + hp + step).powf(params.beta));
            if crosses || (wt - (1.0 + hp).powf(params.beta)).abs() < 1e-6 {
                continue;
            }
            let fd = {
                let mut work = pred.clone();
                let v = pred.data()[i];
                let plus = (v as f64 + step) as f32;
                let minus = (v as f64 - step) as f32;
                work.data_mut()[i] = plus;
                let lp = weighted_l2_loss(&target, &work, &params).expect("shapes match");
                work.data_mut()[i] = minus;
                let lm = weighted_l2_loss(&target, &work, &params).expect("shapes match");
                (lp - lm) / (plus as f64 - minus as f64)
            };
            let g = grad.data()[i] as f64;
            let denom = g.abs().max(fd.abs());
            if denom < 1e-12 {
                continue;
            }
            max_rel = max_rel.max((g - fd).abs() / denom);
            cells += 1;
        }
    }
    println!(
        "max finite-difference gradient relative error: {max_rel:.3e} over {cells} cells \
         ({} trials, tolerance 1e-3)",
        args.trials
    );
    if max_rel >= 1e-3 {
        return Err(CliError::Tolerance(format!(
            "gradient relative error {max_rel:.3e} >= 1e-3"
        )));
    }
    Ok(())
}

pub struct VizArgs {
    pub ann: PathBuf,
    pub pred: Option<PathBuf>,
    pub out: PathBuf,
    pub stride: u32,
}

pub fn run_viz(args: &VizArgs) -> Result<()> {
    let frames = ann::load_frames(&args.ann)?;
    let pred_frames = match &args.pred {
        Some(p) => ann::load_frames(p)?,
        None => Vec::new(),
    };
    let preds_by_name: HashMap<&str, &FrameJson> =
        pred_frames.iter().map(|f| (f.name.as_str(), f)).collect();
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    frames
        .par_iter()
        .map(|frame| {
            let grid = GridSpec::new(frame.width, frame.height, args.stride)
                .map_err(|e| CliError::schema(&args.ann, format!("{}: {e}", frame.name)))?;
            let scene = ann::frame_to_scene(frame, &args.ann)?;
            let bundle =
                encode_targets(&scene.boxes, &scene.lanes, &grid, &EncodeParams::default())?;
            let mut canvas = Canvas::new(frame.width as usize, frame.height as usize);
            canvas.blend_heatmap(&bundle.det_heatmaps, args.stride as usize, RED);
            canvas.blend_heatmap(&bundle.lane_heatmaps, args.stride as usize, CYAN);
            for lane in &scene.lanes {
                canvas.draw_polyline(&lane.points, CYAN);
            }
            for b in &scene.boxes {
                canvas.draw_box(b.x1, b.y1, b.x2, b.y2, GREEN);
            }
            if let Some(pred) = preds_by_name
                .get(frame.name.as_str())
                .or_else(|| preds_by_name.get(file_stem(&frame.name).as_str()))
            {
                let p = ann::frame_to_prediction(pred, args.pred.as_ref().unwrap())?;
                for b in &p.boxes {
                    canvas.draw_box(b.x1, b.y1, b.x2, b.y2, RED);
                }
                for (lane, poly) in p.lanes.iter().zip(&p.polynomials) {
                    match poly {
                        Some(poly) => canvas.draw_polynomial(poly, YELLOW),
                        None => canvas.draw_polyline(&lane.points, YELLOW),
                    }
                }
            }
            let out = args.out.join(format!("{}.ppm", file_stem(&frame.name)));
            io::write_ppm(&out, canvas.width, canvas.height, &canvas.rgb)
        })
        .collect::<Result<Vec<()>>>()?;
    println!(
        "rendered {} overlay(s) into {}",
        frames.len(),
        args.out.display()
    );
    Ok(())
}
