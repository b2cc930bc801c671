//! Dense 32-bit float tensor, row-major, with an explicit shape.
//!
//! Rank-3 tensors are channel-major (C×H×W); rank-2 tensors are H×W.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, validating that the payload length matches the
    /// shape and that every value is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                format!("{shape:?} ({numel} values)"),
                format!("{} values", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite tensor value {v}")));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Value at (y, x) of a rank-2 tensor.
    #[inline]
    pub fn at2(&self, y: usize, x: usize) -> f32 {
        debug_assert_eq!(self.rank(), 2);
        self.data[y * self.shape[1] + x]
    }

    #[inline]
    pub fn set2(&mut self, y: usize, x: usize, v: f32) {
        debug_assert_eq!(self.rank(), 2);
        let w = self.shape[1];
        self.data[y * w + x] = v;
    }

    /// Value at (c, y, x) of a rank-3 tensor.
    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f32 {
        debug_assert_eq!(self.rank(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: f32) {
        debug_assert_eq!(self.rank(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x] = v;
    }

    /// Value at (o, i, ky, kx) of a rank-4 tensor.
    #[inline]
    pub fn at4(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        debug_assert_eq!(self.rank(), 4);
        let (d1, d2, d3) = (self.shape()[1], self.shape()[2], self.shape()[3]);
        self.data[((o * d1 + i) * d2 + ky) * d3 + kx]
    }

    /// Borrows one H×W channel of a rank-3 tensor as a flat slice.
    pub fn channel(&self, c: usize) -> &[f32] {
        debug_assert_eq!(self.rank(), 3);
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        debug_assert_eq!(self.rank(), 3);
        let plane = self.shape[1] * self.shape[2];
        &mut self.data[c * plane..(c + 1) * plane]
    }

    /// Asserts an exact shape, returning a shape-mismatch error otherwise.
    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(
                format!("{what}: {shape:?}"),
                format!("{:?}", self.shape),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(Tensor::new(vec![2], vec![1.0, f32::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f32::INFINITY]).is_err());
    }

    #[test]
    fn indexing_is_row_major_channel_major() {
        let mut t = Tensor::zeros(&[2, 2, 3]);
        t.set3(1, 0, 2, 7.0);
        assert_eq!(t.data()[2 * 3 + 2], 7.0);
        assert_eq!(t.at3(1, 0, 2), 7.0);
        assert_eq!(t.channel(1)[2], 7.0);
    }
}
