//! Dense `f64` tensors and a minimal reverse-mode autodiff engine.
//!
//! The design is a classic Wengert tape: [`Tape`] records every operation as
//! a node holding its forward value and a backward closure, [`Var`] is a copy
//! handle into the tape, and [`Tape::backward`] walks the recording in
//! reverse, accumulating gradients across fan-out. Everything is `f64`;
//! model sizes here are far below the scale where mixed precision would pay
//! for its complexity, and double precision keeps the finite-difference
//! gradient checks tight.
//!
//! All shapes are explicit and checked: a shape error is a bug in the caller,
//! reported as [`TensorError`] rather than a panic so the CLI can surface it.

mod adam;
mod ops;
mod tape;
mod vector;

pub use adam::{AdamConfig, AdamState};
pub use ops::Axis;
pub use tape::{Tape, Var};
pub use vector::SMOOTH_NORM_EPS;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Errors from tensor construction, tape operations and backward passes.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorError {
    /// Operand shapes are incompatible for the named operation.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// `backward` was called on a tensor with more than one element.
    NotScalar { shape: Vec<usize> },
    /// Axis index is invalid for the operand's rank.
    BadAxis {
        op: &'static str,
        axis: usize,
        ndim: usize,
    },
    /// A slice bound or gather index lies outside the operand.
    IndexOutOfBounds {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    /// Element count does not match the requested shape.
    BadReshape { from: Vec<usize>, to: Vec<usize> },
    /// Dropout rate outside `[0, 1)`.
    BadRate { rate: f64 },
}

impl core::fmt::Display for TensorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            TensorError::NotScalar { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            TensorError::BadAxis { op, axis, ndim } => {
                write!(f, "{op}: axis {axis} out of range for rank {ndim}")
            }
            TensorError::IndexOutOfBounds { op, index, bound } => {
                write!(f, "{op}: index {index} out of bounds ({bound})")
            }
            TensorError::BadReshape { from, to } => {
                write!(f, "cannot reshape {from:?} ({} elements) to {to:?}", numel_of(from))
            }
            TensorError::BadRate { rate } => write!(f, "dropout rate {rate} not in [0, 1)"),
        }
    }
}

impl core::error::Error for TensorError {}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// A dense row-major `f64` tensor. Rank 1 and 2 cover everything in this
/// crate; 3-vector bundles are carried as separate x/y/z rank-2 tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel_of(shape)],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel_of(shape)],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        if numel_of(shape) != data.len() {
            return Err(TensorError::BadReshape {
                from: vec![data.len()],
                to: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-2 constructor from a row-major nested slice, for tests and fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor {
            shape: vec![r, c],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> Result<f64, TensorError> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(TensorError::NotScalar {
                shape: self.shape.clone(),
            })
        }
    }

    /// Rows of a rank-2 tensor (rank-1 counts as a single row).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Columns of a rank-2 tensor (length, for rank 1).
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => self.numel(),
        }
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.ndim(), 2);
        self.data[r * self.shape[1] + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        debug_assert_eq!(self.ndim(), 2);
        self.data[r * self.shape[1] + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert_eq!(self.ndim(), 2);
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        debug_assert_eq!(self.ndim(), 2);
        let c = self.shape[1];
        &mut self.data[r * c..(r + 1) * c]
    }

    /// Elementwise in-place addition; shapes must match exactly.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "add_assign",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor, TensorError> {
        if numel_of(shape) != self.numel() {
            return Err(TensorError::BadReshape {
                from: self.shape.clone(),
                to: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Largest absolute element difference; shapes must match. Used widely in
    /// tests and the invariance suites.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "max_abs_diff",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.data.iter().zip(&other.data) {
            let d = (a - b).abs();
            if d > worst {
                worst = d;
            }
        }
        Ok(worst)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Compact one-line description for error paths and logs.
    pub fn describe(&self) -> String {
        format!("Tensor{:?}", self.shape)
    }
}
