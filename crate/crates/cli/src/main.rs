//! centergrid CLI: encode annotations to target tensors, decode
//! predicted tensors to detections and lanes, evaluate, synthesize
//! scenes, self-check the loss, and render overlays.

use centergrid_cli::config::FileConfig;
use centergrid_cli::pipeline::{
    self, DecodeArgs, EncodeArgs, EvalArgs, LosscheckArgs, SynthArgs, VizArgs,
};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Flags marked "(chosen)" have defaults this implementation picked;
/// the rest carry the standard values for this encoding (stride 4,
/// decode threshold 0.25, lane sigma 2).
#[derive(Parser)]
#[command(name = "centergrid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode ground-truth annotations into per-frame target tensors.
    Encode {
        /// Annotation JSON file
        #[arg(long)]
        ann: PathBuf,
        /// Output directory for .tns tensors
        #[arg(long)]
        out: PathBuf,
        /// Output stride S [default: 4]
        #[arg(long)]
        stride: Option<u32>,
        /// Lane keypoint Gaussian sigma in grid cells [default: 2]
        #[arg(long)]
        lane_sigma: Option<f64>,
        /// Min corner-displacement IoU for box sigma [default: 0.7] (chosen)
        #[arg(long)]
        min_iou: Option<f64>,
        /// Lane resampling pace in pixels [default: 10] (chosen)
        #[arg(long)]
        pace: Option<f64>,
        /// JSON config mirroring these flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Decode predicted tensors into detections and lane instances.
    Decode {
        /// Directory holding <frame>.<head>.tns tensors
        #[arg(long)]
        tensors: PathBuf,
        /// Output predictions JSON path
        #[arg(long)]
        out: PathBuf,
        /// Output stride S the tensors were produced at [default: 4]
        #[arg(long)]
        stride: Option<u32>,
        /// Peak score threshold [default: 0.25]
        #[arg(long)]
        threshold: Option<f64>,
        /// Occlusion decision threshold [default: 0.5] (chosen)
        #[arg(long)]
        occl_threshold: Option<f64>,
        /// Ward-linkage stopping threshold in grid cells [default: 10] (chosen)
        #[arg(long)]
        cluster_dist: Option<f64>,
        /// Lane polynomial degree [default: 3] (chosen)
        #[arg(long)]
        poly_degree: Option<usize>,
        /// JSON config mirroring these flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate predictions against ground truth.
    Eval {
        /// Predictions JSON (decode output format)
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth annotation JSON
        #[arg(long)]
        gt: PathBuf,
        /// Output report JSON path
        #[arg(long)]
        out: PathBuf,
        /// Lane rasterization width in px [default: 8 at 1280-wide, scaled] (chosen)
        #[arg(long)]
        line_width: Option<u32>,
        /// JSON config mirroring these flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Verify loss values and analytic gradients; exit 1 past tolerance.
    Losscheck {
        /// Base RNG seed [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random tensor pairs [default: 20] (chosen)
        #[arg(long)]
        trials: Option<usize>,
        /// JSON config mirroring these flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic annotation file from a scene config.
    Synth {
        /// Scene config JSON (see README for the schema)
        #[arg(long)]
        config: PathBuf,
        /// Output annotation JSON path
        #[arg(long)]
        out: PathBuf,
        /// Number of frames; frame i uses seed + i [default: 1]
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Render PPM overlays of heatmaps, boxes and lanes.
    Viz {
        /// Ground-truth annotation JSON
        #[arg(long)]
        ann: PathBuf,
        /// Optional predictions JSON to overlay
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Output directory for .ppm images
        #[arg(long)]
        out: PathBuf,
        /// Output stride for the heatmap underlay [default: 4]
        #[arg(long)]
        stride: Option<u32>,
        /// JSON config mirroring these flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> centergrid_cli::Result<()> {
    match cli.command {
        Command::Encode {
            ann,
            out,
            stride,
            lane_sigma,
            min_iou,
            pace,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            pipeline::run_encode(&EncodeArgs {
                ann,
                out,
                stride: stride.or(file.encode.stride).unwrap_or(4),
                lane_sigma: lane_sigma.or(file.encode.lane_sigma).unwrap_or(2.0),
                min_iou: min_iou.or(file.encode.min_iou).unwrap_or(0.7),
                pace: pace.or(file.encode.pace).unwrap_or(10.0),
            })
        }
        Command::Decode {
            tensors,
            out,
            stride,
            threshold,
            occl_threshold,
            cluster_dist,
            poly_degree,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            pipeline::run_decode(&DecodeArgs {
                tensors,
                out,
                stride: stride.or(file.decode.stride).unwrap_or(4),
                threshold: threshold.or(file.decode.threshold).unwrap_or(0.25),
                occl_threshold: occl_threshold.or(file.decode.occl_threshold).unwrap_or(0.5),
                cluster_dist: cluster_dist.or(file.decode.cluster_dist).unwrap_or(10.0),
                poly_degree: poly_degree.or(file.decode.poly_degree).unwrap_or(3),
            })
        }
        Command::Eval {
            pred,
            gt,
            out,
            line_width,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            pipeline::run_eval(&EvalArgs {
                pred,
                gt,
                out,
                line_width: line_width.or(file.eval.line_width),
            })
        }
        Command::Losscheck {
            seed,
            trials,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            pipeline::run_losscheck(&LosscheckArgs {
                seed: seed.or(file.losscheck.seed).unwrap_or(0),
                trials: trials.or(file.losscheck.trials).unwrap_or(20),
            })
        }
        Command::Synth {
            config,
            out,
            frames,
        } => pipeline::run_synth(&SynthArgs {
            config,
            out,
            frames: frames.unwrap_or(1),
        }),
        Command::Viz {
            ann,
            pred,
            out,
            stride,
            config,
        } => {
            let file = FileConfig::load(config.as_deref())?;
            pipeline::run_viz(&VizArgs {
                ann,
                pred,
                out,
                stride: stride.or(file.viz.stride).unwrap_or(4),
            })
        }
    }
}

fn main() -> ExitCode {
    pipeline::init_worker_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
