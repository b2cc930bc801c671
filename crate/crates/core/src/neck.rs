//! Reference implementations of the neck arithmetic: direct
//! convolution, transposed convolution with bilinear initialization,
//! nearest-neighbor upsampling, max pooling, the weighted bi-directional
//! pyramid fusion, and the simple alternating conv/upsample neck.
//!
//! These are correctness references, not performance kernels: direct
//! loops with f64 accumulation.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Convolution parameters. Weights are `out_ch × in_ch × kH × kW`; the
/// same struct drives both the forward and the transposed kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        if weights.rank() != 4 {
            return Err(Error::shape(
                "rank-4 conv weights",
                format!("{:?}", weights.shape()),
            ));
        }
        if bias.rank() != 1 || bias.shape()[0] != weights.shape()[0] {
            return Err(Error::shape(
                format!("bias [{}]", weights.shape()[0]),
                format!("{:?}", bias.shape()),
            ));
        }
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        Ok(ConvParams {
            weights,
            bias,
            stride,
            padding,
        })
    }

    /// 1×1 identity convolution: output equals input bit-for-bit.
    pub fn identity(channels: usize) -> Self {
        let mut weights = Tensor::zeros(&[channels, channels, 1, 1]);
        for c in 0..channels {
            let idx = c * channels + c;
            weights.data_mut()[idx] = 1.0;
        }
        ConvParams {
            weights,
            bias: Tensor::zeros(&[channels]),
            stride: 1,
            padding: 0,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }
}

/// Direct cross-correlation with zero padding. Output spatial dims are
/// `(H + 2p - kH)/stride + 1` per axis.
pub fn conv2d_ref(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    if input.rank() != 3 {
        return Err(Error::shape("CxHxW input", format!("{:?}", input.shape())));
    }
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if c_in != params.in_channels() {
        return Err(Error::shape(
            format!("{} input channels", params.in_channels()),
            format!("{c_in}"),
        ));
    }
    let (kh, kw) = params.kernel();
    let (s, p) = (params.stride, params.padding);
    if h + 2 * p < kh || w + 2 * p < kw {
        return Err(Error::invalid("kernel larger than padded input"));
    }
    let oh = (h + 2 * p - kh) / s + 1;
    let ow = (w + 2 * p - kw) / s + 1;
    let c_out = params.out_channels();
    let mut out = Tensor::zeros(&[c_out, oh, ow]);
    for oc in 0..c_out {
        let bias = params.bias.data()[oc] as f64;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias;
                for ic in 0..c_in {
                    for ky in 0..kh {
                        let iy = (oy * s + ky) as i64 - p as i64;
                        if iy < 0 || iy >= h as i64 {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * s + kx) as i64 - p as i64;
                            if ix < 0 || ix >= w as i64 {
                                continue;
                            }
                            acc += input.at3(ic, iy as usize, ix as usize) as f64
                                * params.weights.at4(oc, ic, ky, kx) as f64;
                        }
                    }
                }
                out.set3(oc, oy, ox, acc as f32);
            }
        }
    }
    Ok(out)
}

/// Standard transposed convolution (gradient of [`conv2d_ref`] with the
/// same parameters). Output spatial dims are
/// `(H - 1)·stride - 2p + kH` per axis.
pub fn transposed_conv2d_ref(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    if input.rank() != 3 {
        return Err(Error::shape("CxHxW input", format!("{:?}", input.shape())));
    }
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if c_in != params.in_channels() {
        return Err(Error::shape(
            format!("{} input channels", params.in_channels()),
            format!("{c_in}"),
        ));
    }
    let (kh, kw) = params.kernel();
    let (s, p) = (params.stride, params.padding);
    let oh = (h - 1) * s + kh;
    let ow = (w - 1) * s + kw;
    if oh < 2 * p || ow < 2 * p {
        return Err(Error::invalid("padding exceeds transposed output"));
    }
    let (oh, ow) = (oh - 2 * p, ow - 2 * p);
    let c_out = params.out_channels();
    let mut acc = vec![0.0f64; c_out * oh * ow];
    for oc in 0..c_out {
        let base = oc * oh * ow;
        let bias = params.bias.data()[oc] as f64;
        acc[base..base + oh * ow].fill(bias);
        for ic in 0..c_in {
            for iy in 0..h {
                for ix in 0..w {
                    let v = input.at3(ic, iy, ix) as f64;
                    if v == 0.0 {
                        continue;
                    }
                    for ky in 0..kh {
                        let oy = (iy * s + ky) as i64 - p as i64;
                        if oy < 0 || oy >= oh as i64 {
                            continue;
                        }
                        for kx in 0..kw {
                            let ox = (ix * s + kx) as i64 - p as i64;
                            if ox < 0 || ox >= ow as i64 {
                                continue;
                            }
                            acc[base + oy as usize * ow + ox as usize] +=
                                v * params.weights.at4(oc, ic, ky, kx) as f64;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(
        vec![c_out, oh, ow],
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

/// Per-channel transposed-convolution weights performing bilinear
/// upsampling: stride 2, padding `k/2 - 1`, so the output is exactly 2×
/// the input. `kernel_size` must be even.
pub fn bilinear_kernel(channels: usize, kernel_size: usize) -> Result<ConvParams> {
    if kernel_size == 0 || !kernel_size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "bilinear kernel size must be even, got {kernel_size}"
        )));
    }
    let k = kernel_size;
    let factor = k.div_ceil(2);
    let center = factor as f64 - 0.5;
    let mut weights = Tensor::zeros(&[channels, channels, k, k]);
    for c in 0..channels {
        for ky in 0..k {
            let wy = 1.0 - (ky as f64 - center).abs() / factor as f64;
            for kx in 0..k {
                let wx = 1.0 - (kx as f64 - center).abs() / factor as f64;
                let idx = ((c * channels + c) * k + ky) * k + kx;
                weights.data_mut()[idx] = (wy * wx) as f32;
            }
        }
    }
    ConvParams::new(weights, Tensor::zeros(&[channels]), 2, k / 2 - 1)
}

/// Nearest-neighbor upsampling with floor index mapping.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be positive"));
    }
    if input.rank() != 3 {
        return Err(Error::shape("CxHxW input", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let mut out = Tensor::zeros(&[c, h * factor, w * factor]);
    for ch in 0..c {
        for y in 0..h * factor {
            for x in 0..w * factor {
                out.set3(ch, y, x, input.at3(ch, y / factor, x / factor));
            }
        }
    }
    Ok(out)
}

/// Max pooling with window `k` and the given stride, no padding.
pub fn maxpool(input: &Tensor, k: usize, stride: usize) -> Result<Tensor> {
    if k == 0 || stride == 0 {
        return Err(Error::invalid("pool size and stride must be positive"));
    }
    if input.rank() != 3 {
        return Err(Error::shape("CxHxW input", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if h < k || w < k {
        return Err(Error::invalid("pool window larger than input"));
    }
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..k {
                    for dx in 0..k {
                        m = m.max(input.at3(ch, oy * stride + dy, ox * stride + dx));
                    }
                }
                out.set3(ch, oy, ox, m);
            }
        }
    }
    Ok(out)
}

/// Learned scalar fusion weights per scale, ordered finest to coarsest
/// alongside the feature list. `top_down[i]` weighs the upsampled
/// coarser map fused into scale `i` (all scales but the coarsest);
/// `bottom_up[i]` weighs the downsampled finer map fused into scale
/// `i + 1` (all scales but the finest).
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    top_down: Vec<f32>,
    bottom_up: Vec<f32>,
}

impl FusionWeights {
    /// Negative weights are clamped to zero at construction.
    pub fn new(top_down: Vec<f32>, bottom_up: Vec<f32>) -> Result<Self> {
        if top_down.iter().chain(&bottom_up).any(|w| !w.is_finite()) {
            return Err(Error::invalid("fusion weights must be finite"));
        }
        Ok(FusionWeights {
            top_down: top_down.into_iter().map(|w| w.max(0.0)).collect(),
            bottom_up: bottom_up.into_iter().map(|w| w.max(0.0)).collect(),
        })
    }

    pub fn uniform(n_scales: usize, value: f32) -> Self {
        FusionWeights {
            top_down: vec![value.max(0.0); n_scales.saturating_sub(1)],
            bottom_up: vec![value.max(0.0); n_scales.saturating_sub(1)],
        }
    }

    pub fn top_down(&self) -> &[f32] {
        &self.top_down
    }

    pub fn bottom_up(&self) -> &[f32] {
        &self.bottom_up
    }
}

/// Per-scale fusion convolutions, aligned like [`FusionWeights`]:
/// `top_down[i]` applies at scale `i`, `bottom_up[i]` at scale `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BifpnConvs {
    pub top_down: Vec<ConvParams>,
    pub bottom_up: Vec<ConvParams>,
}

impl BifpnConvs {
    pub fn identity(channels: usize, n_scales: usize) -> Self {
        let n = n_scales.saturating_sub(1);
        BifpnConvs {
            top_down: (0..n).map(|_| ConvParams::identity(channels)).collect(),
            bottom_up: (0..n).map(|_| ConvParams::identity(channels)).collect(),
        }
    }
}

/// Weighted bi-directional pyramid fusion.
///
/// `features` is ordered finest to coarsest with spatial dims halving at
/// each step (strides 4, 8, 16, 32 in the four-scale configuration).
/// Top-down from the coarsest: `T_last = F_last`,
/// `T_i = Conv_i(F_i + up(T_{i+1}) · w_T_i)`. Bottom-up from the
/// finest: `B_0 = T_0`, `B_i = Conv_i(T_i + down(B_{i-1}) · w_B_i)`.
/// Returns all fused maps in input order; index 0 feeds detection and
/// lanes, the last feeds tagging.
pub fn bifpn_fuse(
    features: &[Tensor],
    weights: &FusionWeights,
    convs: &BifpnConvs,
) -> Result<Vec<Tensor>> {
    if features.is_empty() {
        return Err(Error::invalid("empty feature pyramid"));
    }
    let n = features.len();
    let channels = features[0].shape()[0];
    for (i, f) in features.iter().enumerate() {
        if f.rank() != 3 || f.shape()[0] != channels {
            return Err(Error::shape(
                format!("{channels}xHxW at scale {i}"),
                format!("{:?}", f.shape()),
            ));
        }
        if i > 0 {
            let (ph, pw) = (features[i - 1].shape()[1], features[i - 1].shape()[2]);
            if ph != 2 * f.shape()[1] || pw != 2 * f.shape()[2] {
                return Err(Error::invalid(format!(
                    "scale {i} dims {}x{} are not half of {}x{}",
                    f.shape()[1],
                    f.shape()[2],
                    ph,
                    pw
                )));
            }
        }
    }
    if weights.top_down().len() != n - 1 || weights.bottom_up().len() != n - 1 {
        return Err(Error::invalid(format!(
            "expected {} fusion weights per pass",
            n - 1
        )));
    }
    if convs.top_down.len() != n - 1 || convs.bottom_up.len() != n - 1 {
        return Err(Error::invalid(format!(
            "expected {} fusion convs per pass",
            n - 1
        )));
    }

    // Top-down: coarsest passes through, finer scales fuse the
    // upsampled coarser intermediate.
    let mut top_down: Vec<Option<Tensor>> = vec![None; n];
    top_down[n - 1] = Some(features[n - 1].clone());
    for i in (0..n - 1).rev() {
        let up = upsample_nearest(top_down[i + 1].as_ref().unwrap(), 2)?;
        let fused = add_scaled(&features[i], &up, weights.top_down()[i])?;
        top_down[i] = Some(conv2d_ref(&fused, &convs.top_down[i])?);
    }

    // Bottom-up: finest passes through, coarser scales fuse the
    // downsampled finer output.
    let mut out: Vec<Tensor> = Vec::with_capacity(n);
    out.push(top_down[0].take().unwrap());
    for i in 1..n {
        let down = maxpool(&out[i - 1], 2, 2)?;
        let fused = add_scaled(
            top_down[i].as_ref().unwrap(),
            &down,
            weights.bottom_up()[i - 1],
        )?;
        out.push(conv2d_ref(&fused, &convs.bottom_up[i - 1])?);
    }
    Ok(out)
}

fn add_scaled(a: &Tensor, b: &Tensor, w: f32) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    let mut out = a.clone();
    for (o, &bv) in out.data_mut().iter_mut().zip(b.data()) {
        *o += bv * w;
    }
    Ok(out)
}

/// The simple neck: alternating same-resolution convolution and 2×
/// transposed-convolution upsampling stages. The tagging feature is the
/// output of the first convolution; the final output carries the finest
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleNeck {
    pub stages: Vec<(ConvParams, ConvParams)>,
}

impl SimpleNeck {
    /// Identity convolutions with bilinear-initialized upsampling, the
    /// documented initialization. Three stages take stride 32 to 4.
    pub fn bilinear_preset(channels: usize, n_stages: usize) -> Result<Self> {
        let stages = (0..n_stages)
            .map(|_| {
                Ok((
                    ConvParams::identity(channels),
                    bilinear_kernel(channels, 4)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(SimpleNeck { stages })
    }
}

/// Runs the simple neck, returning (tagging map, finest map).
pub fn simple_neck(input: &Tensor, neck: &SimpleNeck) -> Result<(Tensor, Tensor)> {
    if neck.stages.is_empty() {
        return Err(Error::invalid("simple neck needs at least one stage"));
    }
    let mut x = input.clone();
    let mut tag: Option<Tensor> = None;
    for (conv, up) in &neck.stages {
        x = conv2d_ref(&x, conv)?;
        if tag.is_none() {
            tag = Some(x.clone());
        }
        x = transposed_conv2d_ref(&x, up)?;
    }
    Ok((tag.unwrap(), x))
}
