//! centergrid — the deterministic core of a center-based multi-task
//! perception stack for driving imagery.
//!
//! Everything a trained network sits between is implemented here as pure,
//! testable functions:
//!
//! * **encode** — ground-truth boxes and lane polylines to output-space
//!   target tensors (per-class Gaussian heatmaps, corner/midpoint offset
//!   maps, occlusion map, validity masks).
//! * **decode** — predicted tensors back to scored boxes and lane
//!   instances: peak extraction, midpoint-vote clustering (Ward linkage)
//!   and polynomial lane fitting.
//! * **loss** — the weighted-L2 heatmap objective with analytic gradients,
//!   masked L1 offset loss, cross-entropy and occlusion BCE.
//! * **neck** — reference CPU implementations of the neck arithmetic:
//!   direct convolution, bilinear-initialized transposed convolution,
//!   nearest-neighbor upsampling, max pooling and weighted bi-directional
//!   pyramid fusion.
//! * **metrics** — mAP@0.5, minimum-weight box matching, occlusion
//!   accuracy, class-agnostic lane mask IoU and macro F1 tagging scores.
//! * **synth** / **oracle** — seeded synthetic scene generation and the
//!   independent brute-force oracles the property tests check against.
//!
//! All tensors are dense `f32`, channel-major (C×H×W), row-major within a
//! channel. Geometry is carried in `f64` image-space coordinates.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values;
// indexed loops in the oracles keep them deliberately naive.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decode;
pub mod encode;
mod error;
pub mod loss;
pub mod metrics;
pub mod neck;
pub mod oracle;
pub mod synth;
pub mod tensor;
pub mod types;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use types::{
    image_to_grid, BoundingBoxAnn, Detections, GridSpec, LaneInstance, LaneSet, Mask, Scene,
    SceneTags, TargetBundle,
};
