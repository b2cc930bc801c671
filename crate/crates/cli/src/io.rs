//! Binary tensor file format.
//!
//! Layout (little-endian):
//! - magic `TNS1` (4 bytes)
//! - dtype code u8 (0 = 32-bit float)
//! - rank u8
//! - 2 reserved zero bytes
//! - rank × u64 dims
//! - payload: f32, row-major, 4 × product(dims) bytes
//!
//! Files round-trip bit-exactly; readers reject trailing bytes,
//! non-finite values and dtype codes they do not know.

use crate::{CliError, Result};
use centergrid::Tensor;
use std::io::Read;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"TNS1";
pub const DTYPE_F32: u8 = 0;

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + tensor.rank() * 8 + tensor.numel() * 4);
    buf.extend_from_slice(&MAGIC);
    buf.push(DTYPE_F32);
    buf.push(tensor.rank() as u8);
    buf.extend_from_slice(&[0u8; 2]);
    for &d in tensor.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in tensor.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header)
        .map_err(|_| CliError::schema(path, "truncated header (need 8 bytes)"))?;
    if header[0..4] != MAGIC {
        return Err(CliError::schema(
            path,
            format!(
                "bad magic {:02x?} at byte 0, expected \"TNS1\"",
                &header[0..4]
            ),
        ));
    }
    if header[4] != DTYPE_F32 {
        return Err(CliError::schema(
            path,
            format!("unknown dtype code {} at byte 4", header[4]),
        ));
    }
    let rank = header[5] as usize;
    if header[6] != 0 || header[7] != 0 {
        return Err(CliError::schema(path, "reserved bytes 6..8 must be zero"));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut numel: usize = 1;
    for i in 0..rank {
        let mut raw = [0u8; 8];
        file.read_exact(&mut raw)
            .map_err(|_| CliError::schema(path, format!("truncated dims at byte {}", 8 + i * 8)))?;
        let d = u64::from_le_bytes(raw) as usize;
        numel = numel
            .checked_mul(d)
            .ok_or_else(|| CliError::schema(path, format!("dimension overflow in {:?}", dims)))?;
        dims.push(d);
    }
    let payload_at = 8 + rank * 8;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)
        .map_err(|e| CliError::io(path, e))?;
    if payload.len() != numel * 4 {
        return Err(CliError::schema(
            path,
            format!(
                "payload at byte {payload_at} is {} bytes, expected {} for dims {:?}",
                payload.len(),
                numel * 4,
                dims
            ),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data).map_err(|e| CliError::schema(path, format!("invalid payload: {e}")))
}

/// Loads convolution parameters from a pair of tensor files: rank-4
/// weights (out_ch × in_ch × kH × kW) plus a rank-1 bias. This is how
/// exported neck weights enter the reference kernels.
pub fn read_conv_params(
    weights_path: &Path,
    bias_path: &Path,
    stride: usize,
    padding: usize,
) -> Result<centergrid::neck::ConvParams> {
    let weights = read_tensor(weights_path)?;
    let bias = read_tensor(bias_path)?;
    centergrid::neck::ConvParams::new(weights, bias, stride, padding)
        .map_err(|e| CliError::schema(weights_path, e.to_string()))
}

/// Writes an H×W boolean mask as a 1×H×W f32 tensor of 0/1 values.
pub fn write_mask(path: &Path, mask: &centergrid::Mask) -> Result<()> {
    let data: Vec<f32> = mask.data().iter().map(|&b| b as u8 as f32).collect();
    let tensor =
        Tensor::new(vec![1, mask.height(), mask.width()], data).expect("mask dims are consistent");
    write_tensor(path, &tensor)
}

/// PPM (P6) image writer for overlays.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut buf = Vec::with_capacity(rgb.len() + 32);
    buf.extend_from_slice(format!("P6\n{width} {height}\n255\n").as_bytes());
    buf.extend_from_slice(rgb);
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}
