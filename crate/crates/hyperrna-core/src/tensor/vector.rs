//! Tape helpers for banks of 3-vector channels stored flat.
//!
//! A bank of `d` vector channels over `n` nodes is kept as an `[n, 3d]`
//! matrix: columns `0..d` hold x components, `d..2d` y, `2d..3d` z. Channel
//! `c` of node `i` therefore lives at columns `c`, `d + c`, `2d + c`. The
//! helpers below are plain compositions of recorded primitives, so gradients
//! flow through them like any other tape expression.

use super::ops::Axis;
use super::tape::{Tape, Var};
use super::TensorError;

/// Additive guard inside the per-channel norm so the gradient stays finite
/// at the zero vector: `norm = sqrt(x^2 + y^2 + z^2 + SMOOTH_NORM_EPS)`.
pub const SMOOTH_NORM_EPS: f64 = 1e-12;

impl Tape {
    fn split_xyz(&self, v: Var, d: usize) -> Result<[Var; 3], TensorError> {
        Ok([
            self.slice(v, Axis::Col, 0, d)?,
            self.slice(v, Axis::Col, d, 2 * d)?,
            self.slice(v, Axis::Col, 2 * d, 3 * d)?,
        ])
    }

    /// Apply a `d x d_out` mix matrix to every spatial coordinate of a
    /// flattened `[n, 3d]` bank, producing `[n, 3 * d_out]`.
    pub fn per_coordinate_matmul(
        &self,
        v: Var,
        theta: Var,
        d: usize,
    ) -> Result<Var, TensorError> {
        let [x, y, z] = self.split_xyz(v, d)?;
        let xo = self.matmul(x, theta)?;
        let yo = self.matmul(y, theta)?;
        let zo = self.matmul(z, theta)?;
        self.concat(Axis::Col, &[xo, yo, zo])
    }

    /// Smooth per-channel Euclidean norms of a flattened bank: `[n, d]`.
    pub fn channel_norms(&self, v: Var, d: usize) -> Result<Var, TensorError> {
        let [x, y, z] = self.split_xyz(v, d)?;
        let xx = self.multiply(x, x)?;
        let yy = self.multiply(y, y)?;
        let zz = self.multiply(z, z)?;
        let s = self.add(self.add(xx, yy)?, zz)?;
        let guarded = self.scalar_add(s, SMOOTH_NORM_EPS)?;
        Ok(self.sqrt(guarded))
    }

    /// Divide every channel vector by its smooth norm, keeping direction and
    /// squashing magnitude to ~1 (exactly 0 stays ~0 thanks to the guard).
    pub fn normalize_channels(&self, v: Var, d: usize) -> Result<Var, TensorError> {
        let inv = self.recip(self.channel_norms(v, d)?);
        self.scale_channels(v, inv, d)
    }

    /// Magnitude gating: scale each channel vector by the sigmoid of its own
    /// smooth norm. Directions are preserved, so the map commutes with
    /// rotations applied to every channel.
    pub fn gate_channels_by_norm(&self, v: Var, d: usize) -> Result<Var, TensorError> {
        let gate = self.sigmoid(self.channel_norms(v, d)?);
        self.scale_channels(v, gate, d)
    }

    /// Multiply a flattened `[n, 3d]` bank by per-channel scales `[n, d]`.
    pub fn scale_channels(&self, v: Var, scales: Var, d: usize) -> Result<Var, TensorError> {
        let [x, y, z] = self.split_xyz(v, d)?;
        let xs = self.multiply(x, scales)?;
        let ys = self.multiply(y, scales)?;
        let zs = self.multiply(z, scales)?;
        self.concat(Axis::Col, &[xs, ys, zs])
    }
}
