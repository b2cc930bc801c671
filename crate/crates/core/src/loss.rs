//! Objective functions with analytic gradients.
//!
//! The heatmap objective is a weighted L2:
//! `(1/N_K) * sum max{(1+H)^alpha, (1+Hp)^beta} * (H - Hp)^2`,
//! which upweights cells where either the target or the prediction is
//! close to 1. Offsets use a masked L1; classification uses softmax
//! cross-entropy; occlusion uses a sigmoid BCE read out at object
//! centers. Accumulation is in f64.

use crate::tensor::Tensor;
use crate::types::Mask;
use crate::{Error, Result};

/// Default target-weight exponent.
pub const DEFAULT_ALPHA: f64 = 4.0;
/// Default prediction-weight exponent.
pub const DEFAULT_BETA: f64 = 2.0;

/// Heatmap loss parameters. `n_k` normalizes the sum; it is interpreted
/// as the number of ground-truth peaks on the map, floored at 1, but
/// callers may substitute any positive count (e.g. the pixel count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapLossParams {
    pub alpha: f64,
    pub beta: f64,
    pub n_k: usize,
}

impl Default for HeatmapLossParams {
    fn default() -> Self {
        HeatmapLossParams {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            n_k: 1,
        }
    }
}

impl HeatmapLossParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("exponents must be non-negative"));
        }
        if self.n_k == 0 {
            return Err(Error::invalid("n_k must be >= 1"));
        }
        Ok(())
    }

    /// Params with `n_k` set to the number of exact-1 cells in the
    /// target map, floored at 1.
    pub fn for_target(target: &Tensor) -> Self {
        let peaks = target.data().iter().filter(|&&v| v == 1.0).count();
        HeatmapLossParams {
            n_k: peaks.max(1),
            ..Default::default()
        }
    }
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(())
}

/// Weighted L2 heatmap loss.
pub fn weighted_l2_loss(target: &Tensor, pred: &Tensor, params: &HeatmapLossParams) -> Result<f64> {
    check_same_shape(target, pred)?;
    params.validate()?;
    let mut acc = 0.0f64;
    for (&h, &hp) in target.data().iter().zip(pred.data()) {
        let (h, hp) = (h as f64, hp as f64);
        let w = (1.0 + h)
            .powf(params.alpha)
            .max((1.0 + hp).powf(params.beta));
        let d = h - hp;
        acc += w * d * d;
    }
    Ok(acc / params.n_k as f64)
}

/// Elementwise gradient of [`weighted_l2_loss`] with respect to the
/// prediction. On the prediction-weighted branch the gradient flows
/// through the weight as well; exact ties resolve to the target branch.
pub fn weighted_l2_grad(
    target: &Tensor,
    pred: &Tensor,
    params: &HeatmapLossParams,
) -> Result<Tensor> {
    check_same_shape(target, pred)?;
    params.validate()?;
    let inv_nk = 1.0 / params.n_k as f64;
    let mut grad = Tensor::zeros(target.shape());
    for (i, (&h, &hp)) in target.data().iter().zip(pred.data()).enumerate() {
        let (h, hp) = (h as f64, hp as f64);
        let wt = (1.0 + h).powf(params.alpha);
        let wp = (1.0 + hp).powf(params.beta);
        let d = h - hp;
        let g = if wt >= wp {
            -2.0 * wt * d
        } else {
            params.beta * (1.0 + hp).powf(params.beta - 1.0) * d * d - 2.0 * wp * d
        };
        grad.data_mut()[i] = (g * inv_nk) as f32;
    }
    Ok(grad)
}

/// Mean absolute error over all channels at masked cells; 0 when the
/// mask is empty. Tensors are C×H×W, the mask H×W.
pub fn offset_l1_loss(pred: &Tensor, target: &Tensor, mask: &Mask) -> Result<f64> {
    check_same_shape(pred, target)?;
    if pred.rank() != 3 {
        return Err(Error::shape(
            "rank-3 offsets",
            format!("{:?}", pred.shape()),
        ));
    }
    let (c, h, w) = (pred.shape()[0], pred.shape()[1], pred.shape()[2]);
    if mask.width() != w || mask.height() != h {
        return Err(Error::shape(
            format!("{w}x{h} mask"),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for (x, y) in mask.iter_set() {
        for ch in 0..c {
            acc += (pred.at3(ch, y, x) as f64 - target.at3(ch, y, x) as f64).abs();
        }
        count += c;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(acc / count as f64)
}

/// Softmax cross-entropy of a logit vector against an integer label.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::invalid("empty logits"));
    }
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range 0..{}",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    Ok(log_sum - logits[label])
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable log(1 + exp(x)).
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy of sigmoid(map value) against the occlusion
/// flag, read out at each object center and averaged; 0 with no objects.
pub fn occlusion_bce(occl_map: &Tensor, centers: &[(usize, usize)], flags: &[bool]) -> Result<f64> {
    if occl_map.rank() != 3 || occl_map.shape()[0] != 1 {
        return Err(Error::shape(
            "1xHxW occlusion map",
            format!("{:?}", occl_map.shape()),
        ));
    }
    if centers.len() != flags.len() {
        return Err(Error::invalid(format!(
            "{} centers vs {} flags",
            centers.len(),
            flags.len()
        )));
    }
    if centers.is_empty() {
        return Ok(0.0);
    }
    let (h, w) = (occl_map.shape()[1], occl_map.shape()[2]);
    let mut acc = 0.0f64;
    for (&(cx, cy), &flag) in centers.iter().zip(flags) {
        if cx >= w || cy >= h {
            return Err(Error::invalid(format!(
                "center ({cx},{cy}) outside {w}x{h} grid"
            )));
        }
        let z = occl_map.at3(0, cy, cx) as f64;
        acc += if flag { softplus(-z) } else { softplus(z) };
    }
    Ok(acc / centers.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f32) -> Tensor {
        Tensor::new(vec![1, 1], vec![v]).unwrap()
    }

    #[test]
    fn loss_zero_when_equal() {
        let t = Tensor::new(vec![2, 2], vec![0.1, 0.5, 0.9, 1.0]).unwrap();
        assert_eq!(
            weighted_l2_loss(&t, &t, &HeatmapLossParams::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn loss_hand_values() {
        let p = HeatmapLossParams::default();
        // H=1, Hp=0: max{2^4, 1} * 1 = 16
        assert_eq!(
            weighted_l2_loss(&single(1.0), &single(0.0), &p).unwrap(),
            16.0
        );
        // H=0, Hp=1: max{1, 2^2} * 1 = 4
        assert_eq!(
            weighted_l2_loss(&single(0.0), &single(1.0), &p).unwrap(),
            4.0
        );
    }

    #[test]
    fn grad_zero_when_equal() {
        let t = Tensor::new(vec![2, 2], vec![0.1, 0.5, 0.9, 1.0]).unwrap();
        let g = weighted_l2_grad(&t, &t, &HeatmapLossParams::default()).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_hand_value_target_branch() {
        let p = HeatmapLossParams::default();
        let g = weighted_l2_grad(&single(1.0), &single(0.0), &p).unwrap();
        assert_eq!(g.data()[0], -32.0);
    }

    #[test]
    fn loss_shape_mismatch() {
        let a = Tensor::zeros(&[2, 2]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(weighted_l2_loss(&a, &b, &HeatmapLossParams::default()).is_err());
    }

    #[test]
    fn n_k_divides_loss_and_gradient() {
        let p1 = HeatmapLossParams::default();
        let p4 = HeatmapLossParams {
            n_k: 4,
            ..Default::default()
        };
        let l1 = weighted_l2_loss(&single(1.0), &single(0.25), &p1).unwrap();
        let l4 = weighted_l2_loss(&single(1.0), &single(0.25), &p4).unwrap();
        assert_eq!(l4, l1 / 4.0);
        let g1 = weighted_l2_grad(&single(1.0), &single(0.25), &p1).unwrap();
        let g4 = weighted_l2_grad(&single(1.0), &single(0.25), &p4).unwrap();
        assert!((g4.data()[0] - g1.data()[0] / 4.0).abs() < 1e-7);
        assert!(HeatmapLossParams {
            n_k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn l1_examples() {
        let mut mask = Mask::new(3, 3);
        mask.set(1, 1, true);
        let mut pred = Tensor::zeros(&[4, 3, 3]);
        for (c, v) in [1.0f32, 2.0, 3.0, 4.0].iter().enumerate() {
            pred.set3(c, 1, 1, *v);
        }
        let target = Tensor::zeros(&[4, 3, 3]);
        assert_eq!(offset_l1_loss(&pred, &target, &mask).unwrap(), 2.5);
        assert_eq!(offset_l1_loss(&target, &target, &mask).unwrap(), 0.0);
        let empty = Mask::new(3, 3);
        assert_eq!(offset_l1_loss(&pred, &target, &empty).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let ce = cross_entropy(&[0.0; 7], 3).unwrap();
        assert!((ce - (7.0f64).ln()).abs() < 1e-12);
        assert!((ce - 1.94591).abs() < 1e-5);
    }

    #[test]
    fn cross_entropy_label_range() {
        assert!(cross_entropy(&[0.0; 7], 7).is_err());
    }

    #[test]
    fn sigmoid_of_bias_init() {
        assert!((sigmoid(4.6) - 0.990).abs() < 5e-4);
    }

    #[test]
    fn occlusion_bce_no_objects() {
        let map = Tensor::zeros(&[1, 4, 4]);
        assert_eq!(occlusion_bce(&map, &[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn occlusion_bce_matches_direct_formula() {
        let mut map = Tensor::zeros(&[1, 4, 4]);
        map.set3(0, 1, 2, 4.6);
        let z = 4.6f32 as f64; // the map stores f32
        let loss = occlusion_bce(&map, &[(2, 1)], &[true]).unwrap();
        assert!((loss - (-(sigmoid(z).ln()))).abs() < 1e-12);
    }

    #[test]
    fn n_k_from_target_peaks() {
        let mut t = Tensor::zeros(&[4, 4]);
        t.set2(0, 0, 1.0);
        t.set2(2, 3, 1.0);
        t.set2(1, 1, 0.999);
        assert_eq!(HeatmapLossParams::for_target(&t).n_k, 2);
        assert_eq!(
            HeatmapLossParams::for_target(&Tensor::zeros(&[4, 4])).n_k,
            1
        );
    }
}
