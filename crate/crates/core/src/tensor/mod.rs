//! Dense `[channels, height, width]` tensors and the handful of operations
//! the restoration and prediction networks are built from.
//!
//! Everything is generic over [`Scalar`] so the same code runs in 32-bit
//! (inference, training) and 64-bit (gradient checks).

mod conv;
pub mod fd;
mod ops;
mod simd;

use std::fmt;
use std::iter::Sum;

use num_traits::Float;

use crate::error::{Error, Result};

pub use conv::{conv2d_backward, conv2d_same, ConvKernel, GradBundle};
pub use ops::{
    add, concat_channels, linear, linear_backward, relu, relu_backward, LinearGrad,
};

pub trait Scalar: Float + Default + fmt::Debug + Send + Sync + Sum + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Vectorized four-row convolution tile; `false` means "use the portable loop".
    #[doc(hidden)]
    #[allow(clippy::too_many_arguments)]
    fn conv_rows4(
        _dst: &mut [Self],
        _src: &[Self],
        _packed: &[Self],
        _bias: [Self; 4],
        _in_ch: usize,
        _plane: usize,
        _offsets: &[usize],
        _len: usize,
    ) -> bool {
        false
    }

    #[doc(hidden)]
    fn weight_grad_rows4(
        _out: &mut [[Self; 16]; 4],
        _g: [&[Self]; 4],
        _patches: &[Self],
        _k0: usize,
        _stride: usize,
        _pixels: usize,
    ) -> bool {
        false
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn conv_rows4(
        dst: &mut [f32],
        src: &[f32],
        packed: &[f32],
        bias: [f32; 4],
        in_ch: usize,
        plane: usize,
        offsets: &[usize],
        len: usize,
    ) -> bool {
        simd::conv_rows4(dst, src, packed, bias, in_ch, plane, offsets, len)
    }

    fn weight_grad_rows4(
        out: &mut [[f32; 16]; 4],
        g: [&[f32]; 4],
        patches: &[f32],
        k0: usize,
        stride: usize,
        pixels: usize,
    ) -> bool {
        simd::weight_grad_rows4(out, g, patches, k0, stride, pixels)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.channels, self.height, self.width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.channels == 0 || shape.height == 0 || shape.width == 0 {
            return Err(Error::contract("tensor", format!("empty shape {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::contract(
                "tensor",
                format!("shape {shape} needs {} values, got {}", shape.len(), data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for i in 0..shape.height {
                for j in 0..shape.width {
                    data.push(f(c, i, j));
                }
            }
        }
        Self { shape, data }
    }

    /// Flat vector viewed as `(len, 1, 1)`.
    pub fn vector(data: Vec<T>) -> Result<Self> {
        Self::new(Shape::new(data.len(), 1, 1), data)
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> T {
        self.data[(c * self.shape.height + i) * self.shape.width + j]
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.shape.plane();
        &self.data[c * p..(c + 1) * p]
    }

    /// Copy of channels `start..end`.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.shape.channels {
            return Err(Error::contract(
                "slice_channels",
                format!("range {start}..{end} outside {} channels", self.shape.channels),
            ));
        }
        let p = self.shape.plane();
        Ok(Self {
            shape: Shape::new(end - start, self.shape.height, self.shape.width),
            data: self.data[start * p..end * p].to_vec(),
        })
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}
