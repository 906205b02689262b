//! Differentiable primitives recorded on the [`Tape`].
//!
//! Each op validates shapes, computes its forward value eagerly, and (when a
//! gradient-requiring leaf is reachable) stores a backward closure that maps
//! the output gradient to parent gradients. Backward rules capture clones of
//! whatever forward values they need; at the model sizes this crate targets,
//! that trade of memory for simplicity is the right one.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::tape::{Node, Tape, Var};
use super::{Tensor, TensorError};
use crate::mathf;
use crate::rng::Xoshiro256StarStar;

/// Epsilon inside the layer-norm denominator, `sqrt(var + EPS)`.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Norm magnitudes at or below this are treated as exactly zero in backward
/// rules (`sqrt`, `l2_norm_rows`): the subgradient at the cone tip is taken
/// to be zero instead of dividing by a vanishing norm. Terminal residues
/// carry exact zero vectors, so this path is exercised in every real graph.
pub const NORM_GRAD_GUARD: f64 = 1e-12;

/// Which way a lane-wise op (softmax, layer norm, concat, slice) runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Lanes are rows: the op normalizes/concatenates across columns.
    Row,
    /// Lanes are columns: the op runs down each column.
    Col,
}

// ---------------------------------------------------------------------------
// Raw f64 kernels shared by forward and backward paths.
// ---------------------------------------------------------------------------

/// `out += a @ b` for row-major `a: m x k`, `b: k x n`. The i-k-j ordering
/// keeps the inner loop contiguous in both `b` and `out`.
fn matmul_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

/// `out += a @ b^T` for `a: m x n`, `b: k x n`, giving `m x k`.
fn matmul_nt_acc(a: &[f64], m: usize, n: usize, b: &[f64], k: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += a_row[j] * b_row[j];
            }
            out_row[kk] += acc;
        }
    }
}

/// `out += a^T @ b` for `a: m x k`, `b: m x n`, giving `k x n`.
fn matmul_tn_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let out_row = &mut out[kk * n..(kk + 1) * n];
            for j in 0..n {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

fn transpose_data(x: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = x[i * c + j];
        }
    }
    out
}

/// How the right operand of an elementwise binary op maps onto the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// rhs has a single element.
    Scalar,
    /// lhs is `r x c`, rhs is `[c]` or `1 x c`: one copy per row.
    PerRow,
    /// lhs is `r x c`, rhs is `r x 1`: one copy per column.
    PerCol,
}

fn broadcast_kind(lhs: &[usize], rhs: &[usize]) -> Option<Broadcast> {
    if lhs == rhs {
        return Some(Broadcast::Same);
    }
    let rn: usize = rhs.iter().product();
    if rn == 1 {
        return Some(Broadcast::Scalar);
    }
    if lhs.len() == 2 {
        let (r, c) = (lhs[0], lhs[1]);
        if rhs == [c] || rhs == [1, c] {
            return Some(Broadcast::PerRow);
        }
        if rhs == [r, 1] {
            return Some(Broadcast::PerCol);
        }
    }
    None
}

/// rhs element aligned with flat lhs index `i`.
#[inline]
fn rhs_index(kind: Broadcast, i: usize, cols: usize) -> usize {
    match kind {
        Broadcast::Same => i,
        Broadcast::Scalar => 0,
        Broadcast::PerRow => i % cols,
        Broadcast::PerCol => i / cols,
    }
}

/// Sums a gradient of the lhs shape down to the rhs shape.
fn reduce_to_rhs(g: &[f64], kind: Broadcast, cols: usize, rhs_shape: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(rhs_shape);
    let data = out.data_mut();
    for (i, &gv) in g.iter().enumerate() {
        data[rhs_index(kind, i, cols)] += gv;
    }
    out
}

/// (number of lanes, lane length, first index of lane `l`, stride within a lane)
fn lane_geometry(
    shape: &[usize],
    axis: Axis,
    op: &'static str,
) -> Result<(usize, usize, usize, usize), TensorError> {
    match (shape.len(), axis) {
        (1, Axis::Row) => Ok((1, shape[0], 0, 1)),
        (2, Axis::Row) => Ok((shape[0], shape[1], shape[1], 1)),
        (2, Axis::Col) => Ok((shape[1], shape[0], 1, shape[1])),
        (ndim, _) => Err(TensorError::BadAxis {
            op,
            axis: match axis {
                Axis::Row => 1,
                Axis::Col => 0,
            },
            ndim,
        }),
    }
}

// ---------------------------------------------------------------------------
// Op recording.
// ---------------------------------------------------------------------------

impl Tape {
    fn value_ref(&self, v: Var) -> Tensor {
        self.value(v)
    }

    fn record1<F>(&self, parent: Var, value: Tensor, back: F) -> Var
    where
        F: Fn(&Tensor) -> Tensor + 'static,
    {
        let needs = self.needs_grad(parent);
        self.push(Node {
            value,
            parents: vec![parent.index()],
            needs_grad: needs,
            backward: if needs {
                Some(Box::new(move |g: &Tensor| vec![back(g)]))
            } else {
                None
            },
        })
    }

    fn record2<F>(&self, a: Var, b: Var, value: Tensor, back: F) -> Var
    where
        F: Fn(&Tensor) -> (Tensor, Tensor) + 'static,
    {
        let needs = self.needs_grad(a) || self.needs_grad(b);
        self.push(Node {
            value,
            parents: vec![a.index(), b.index()],
            needs_grad: needs,
            backward: if needs {
                Some(Box::new(move |g: &Tensor| {
                    let (ga, gb) = back(g);
                    vec![ga, gb]
                }))
            } else {
                None
            },
        })
    }

    /// `a @ b` for rank-2 operands.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let av = self.value_ref(a);
        let bv = self.value_ref(b);
        if av.ndim() != 2 || bv.ndim() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let (m, k) = (av.shape()[0], av.shape()[1]);
        let n = bv.shape()[1];
        let mut out = Tensor::zeros(&[m, n]);
        matmul_acc(av.data(), m, k, bv.data(), n, out.data_mut());
        Ok(self.record2(a, b, out, move |g| {
            let mut ga = Tensor::zeros(&[m, k]);
            matmul_nt_acc(g.data(), m, n, bv.data(), k, ga.data_mut());
            let mut gb = Tensor::zeros(&[k, n]);
            matmul_tn_acc(av.data(), m, k, g.data(), n, gb.data_mut());
            (ga, gb)
        }))
    }

    /// Rank-2 transpose.
    pub fn transpose(&self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        if xv.ndim() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "transpose",
                lhs: xv.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let out = Tensor::from_vec(&[c, r], transpose_data(xv.data(), r, c))?;
        Ok(self.record1(x, out, move |g| {
            Tensor::from_vec(&[r, c], transpose_data(g.data(), c, r)).expect("transpose grad")
        }))
    }

    fn binary_elementwise(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        is_add: bool,
    ) -> Result<Var, TensorError> {
        let av = self.value_ref(a);
        let bv = self.value_ref(b);
        let Some(kind) = broadcast_kind(av.shape(), bv.shape()) else {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        };
        let cols = av.cols();
        let mut out = Tensor::zeros(av.shape());
        {
            let od = out.data_mut();
            let ad = av.data();
            let bd = bv.data();
            for i in 0..ad.len() {
                let rb = bd[rhs_index(kind, i, cols)];
                od[i] = if is_add { ad[i] + rb } else { ad[i] * rb };
            }
        }
        let rhs_shape = bv.shape().to_vec();
        Ok(self.record2(a, b, out, move |g| {
            if is_add {
                let ga = g.clone();
                let gb = reduce_to_rhs(g.data(), kind, cols, &rhs_shape);
                (ga, gb)
            } else {
                // d(a*b)/da = b (broadcast), d/db = a reduced.
                let mut ga = Tensor::zeros(av.shape());
                {
                    let gad = ga.data_mut();
                    for i in 0..gad.len() {
                        gad[i] = g.data()[i] * bv.data()[rhs_index(kind, i, cols)];
                    }
                }
                let mut scratch = vec![0.0; g.numel()];
                for (i, s) in scratch.iter_mut().enumerate() {
                    *s = g.data()[i] * av.data()[i];
                }
                let gb = reduce_to_rhs(&scratch, kind, cols, &rhs_shape);
                (ga, gb)
            }
        }))
    }

    /// Elementwise sum. The right operand may be a scalar, a `[c]`/`1 x c`
    /// row or an `r x 1` column broadcast against an `r x c` left operand.
    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_elementwise("add", a, b, true)
    }

    /// Elementwise product, with the same broadcast rules as [`Tape::add`].
    pub fn multiply(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_elementwise("multiply", a, b, false)
    }

    /// `a - b`, recorded as `a + (-1) * b`.
    pub fn sub(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let nb = self.scalar_mul(b, -1.0)?;
        self.add(a, nb)
    }

    /// Multiplication by a compile-time constant (not a tape value).
    pub fn scalar_mul(&self, x: Var, c: f64) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let mut out = xv.clone();
        out.scale_in_place(c);
        Ok(self.record1(x, out, move |g| {
            let mut gx = g.clone();
            gx.scale_in_place(c);
            gx
        }))
    }

    /// Addition of a compile-time constant.
    pub fn scalar_add(&self, x: Var, c: f64) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let mut out = xv.clone();
        for v in out.data_mut() {
            *v += c;
        }
        Ok(self.record1(x, out, move |g| g.clone()))
    }

    fn unary_elementwise<Fwd, Bwd>(&self, x: Var, fwd: Fwd, bwd: Bwd) -> Var
    where
        Fwd: Fn(f64) -> f64,
        Bwd: Fn(f64, f64) -> f64 + 'static, // (input, output) -> d out / d in
    {
        let xv = self.value_ref(x);
        let mut out = Tensor::zeros(xv.shape());
        for (o, &v) in out.data_mut().iter_mut().zip(xv.data()) {
            *o = fwd(v);
        }
        let yv = out.clone();
        self.record1(x, out, move |g| {
            let mut gx = Tensor::zeros(xv.shape());
            for i in 0..gx.numel() {
                gx.data_mut()[i] = g.data()[i] * bwd(xv.data()[i], yv.data()[i]);
            }
            gx
        })
    }

    pub fn exp(&self, x: Var) -> Var {
        self.unary_elementwise(x, mathf::exp, |_, y| y)
    }

    /// Natural logarithm. Non-positive inputs produce non-finite values that
    /// propagate honestly; callers guard their domains.
    pub fn log(&self, x: Var) -> Var {
        self.unary_elementwise(x, mathf::ln, |x, _| 1.0 / x)
    }

    pub fn relu(&self, x: Var) -> Var {
        self.unary_elementwise(
            x,
            |v| if v > 0.0 { v } else { 0.0 },
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary_elementwise(
            x,
            |v| 1.0 / (1.0 + mathf::exp(-v)),
            |_, y| y * (1.0 - y),
        )
    }

    /// Elementwise square root with a guarded subgradient: at arguments
    /// within [`NORM_GRAD_GUARD`] of zero the derivative is taken as 0.
    pub fn sqrt(&self, x: Var) -> Var {
        self.unary_elementwise(
            x,
            mathf::sqrt,
            |x, y| if x <= NORM_GRAD_GUARD { 0.0 } else { 0.5 / y },
        )
    }

    /// Elementwise reciprocal; d(1/x)/dx = -1/x^2.
    pub fn recip(&self, x: Var) -> Var {
        self.unary_elementwise(x, |v| 1.0 / v, |_, y| -y * y)
    }

    /// Numerically stable softmax along `axis` lanes; each lane sums to 1.
    pub fn softmax(&self, x: Var, axis: Axis) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let (lanes, len, base, stride) = lane_geometry(xv.shape(), axis, "softmax")?;
        let mut out = xv.clone();
        for l in 0..lanes {
            let start = lane_start(axis, l, base);
            let mut hi = f64::NEG_INFINITY;
            for i in 0..len {
                hi = hi.max(out.data()[start + i * stride]);
            }
            let mut z = 0.0;
            for i in 0..len {
                let idx = start + i * stride;
                let e = mathf::exp(out.data()[idx] - hi);
                out.data_mut()[idx] = e;
                z += e;
            }
            for i in 0..len {
                out.data_mut()[start + i * stride] /= z;
            }
        }
        let yv = out.clone();
        Ok(self.record1(x, out, move |g| {
            // dx = y * (g - sum(g * y)) per lane
            let mut gx = Tensor::zeros(yv.shape());
            for l in 0..lanes {
                let start = lane_start(axis, l, base);
                let mut dot = 0.0;
                for i in 0..len {
                    let idx = start + i * stride;
                    dot += g.data()[idx] * yv.data()[idx];
                }
                for i in 0..len {
                    let idx = start + i * stride;
                    gx.data_mut()[idx] = yv.data()[idx] * (g.data()[idx] - dot);
                }
            }
            gx
        }))
    }

    /// `log(softmax(x))` computed stably in one node. Preferred over the
    /// composition when the result feeds a cross-entropy, because every
    /// output stays finite even for saturated lanes.
    pub fn log_softmax(&self, x: Var, axis: Axis) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let (lanes, len, base, stride) = lane_geometry(xv.shape(), axis, "log_softmax")?;
        let mut out = xv.clone();
        let mut soft = xv.clone();
        for l in 0..lanes {
            let start = lane_start(axis, l, base);
            let mut hi = f64::NEG_INFINITY;
            for i in 0..len {
                hi = hi.max(out.data()[start + i * stride]);
            }
            let mut z = 0.0;
            for i in 0..len {
                z += mathf::exp(out.data()[start + i * stride] - hi);
            }
            let log_z = hi + mathf::ln(z);
            for i in 0..len {
                let idx = start + i * stride;
                let lp = out.data()[idx] - log_z;
                out.data_mut()[idx] = lp;
                soft.data_mut()[idx] = mathf::exp(lp);
            }
        }
        Ok(self.record1(x, out, move |g| {
            // dx = g - softmax * sum(g) per lane
            let mut gx = Tensor::zeros(soft.shape());
            for l in 0..lanes {
                let start = lane_start(axis, l, base);
                let mut gsum = 0.0;
                for i in 0..len {
                    gsum += g.data()[start + i * stride];
                }
                for i in 0..len {
                    let idx = start + i * stride;
                    gx.data_mut()[idx] = g.data()[idx] - soft.data()[idx] * gsum;
                }
            }
            gx
        }))
    }

    /// Lane-wise standardization `(x - mean) / sqrt(var + eps)` without an
    /// affine tail; variance is the population variance of the lane.
    pub fn layer_norm(&self, x: Var, axis: Axis) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let (lanes, len, base, stride) = lane_geometry(xv.shape(), axis, "layer_norm")?;
        let mut out = xv.clone();
        let mut inv_std = vec![0.0; lanes];
        for l in 0..lanes {
            let start = lane_start(axis, l, base);
            let mut mean = 0.0;
            for i in 0..len {
                mean += out.data()[start + i * stride];
            }
            mean /= len as f64;
            let mut var = 0.0;
            for i in 0..len {
                let d = out.data()[start + i * stride] - mean;
                var += d * d;
            }
            var /= len as f64;
            let istd = 1.0 / mathf::sqrt(var + LAYER_NORM_EPS);
            inv_std[l] = istd;
            for i in 0..len {
                let idx = start + i * stride;
                out.data_mut()[idx] = (out.data()[idx] - mean) * istd;
            }
        }
        let yv = out.clone();
        Ok(self.record1(x, out, move |g| {
            // dx = istd * (g - mean(g) - xhat * mean(g * xhat)) per lane
            let mut gx = Tensor::zeros(yv.shape());
            let n = len as f64;
            for l in 0..lanes {
                let start = lane_start(axis, l, base);
                let mut g_mean = 0.0;
                let mut gx_mean = 0.0;
                for i in 0..len {
                    let idx = start + i * stride;
                    g_mean += g.data()[idx];
                    gx_mean += g.data()[idx] * yv.data()[idx];
                }
                g_mean /= n;
                gx_mean /= n;
                for i in 0..len {
                    let idx = start + i * stride;
                    gx.data_mut()[idx] =
                        inv_std[l] * (g.data()[idx] - g_mean - yv.data()[idx] * gx_mean);
                }
            }
            gx
        }))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`, so the
    /// expectation is unchanged and evaluation needs no rescaling. Outside
    /// training (or at rate 0) this is an exact identity.
    pub fn dropout(
        &self,
        x: Var,
        rate: f64,
        train: bool,
        rng: &mut Xoshiro256StarStar,
    ) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::BadRate { rate });
        }
        let xv = self.value_ref(x);
        if !train || rate == 0.0 {
            let out = xv;
            return Ok(self.record1(x, out, |g| g.clone()));
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mut mask = Tensor::zeros(xv.shape());
        for m in mask.data_mut() {
            *m = if rng.next_f64() >= rate { scale } else { 0.0 };
        }
        let mut out = xv;
        for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
            *o *= m;
        }
        Ok(self.record1(x, out, move |g| {
            let mut gx = g.clone();
            for (gv, &m) in gx.data_mut().iter_mut().zip(mask.data()) {
                *gv *= m;
            }
            gx
        }))
    }

    /// Concatenation of rank-2 tensors along rows (`Axis::Col` stacks columns
    /// side by side; `Axis::Row` stacks blocks of rows).
    pub fn concat(&self, axis: Axis, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                lhs: vec![],
                rhs: vec![],
            });
        }
        let vals: Vec<Tensor> = parts.iter().map(|&p| self.value_ref(p)).collect();
        for v in &vals {
            if v.ndim() != 2 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: vals[0].shape().to_vec(),
                    rhs: v.shape().to_vec(),
                });
            }
        }
        let out = match axis {
            Axis::Col => {
                let r = vals[0].shape()[0];
                if vals.iter().any(|v| v.shape()[0] != r) {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vals[0].shape().to_vec(),
                        rhs: vals.iter().find(|v| v.shape()[0] != r).unwrap().shape().to_vec(),
                    });
                }
                let total: usize = vals.iter().map(|v| v.shape()[1]).sum();
                let mut out = Tensor::zeros(&[r, total]);
                for i in 0..r {
                    let mut off = 0;
                    for v in &vals {
                        let c = v.shape()[1];
                        out.data_mut()[i * total + off..i * total + off + c]
                            .copy_from_slice(v.row(i));
                        off += c;
                    }
                }
                out
            }
            Axis::Row => {
                let c = vals[0].shape()[1];
                if vals.iter().any(|v| v.shape()[1] != c) {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vals[0].shape().to_vec(),
                        rhs: vals.iter().find(|v| v.shape()[1] != c).unwrap().shape().to_vec(),
                    });
                }
                let total: usize = vals.iter().map(|v| v.shape()[0]).sum();
                let mut out = Tensor::zeros(&[total, c]);
                let mut off = 0;
                for v in &vals {
                    let n = v.numel();
                    out.data_mut()[off..off + n].copy_from_slice(v.data());
                    off += n;
                }
                out
            }
        };
        let shapes: Vec<Vec<usize>> = vals.iter().map(|v| v.shape().to_vec()).collect();
        let needs = parts.iter().any(|&p| self.needs_grad(p));
        let parents: Vec<usize> = parts.iter().map(|p| p.index()).collect();
        Ok(self.push(Node {
            value: out,
            parents,
            needs_grad: needs,
            backward: if needs {
                Some(Box::new(move |g: &Tensor| {
                    let mut grads = Vec::with_capacity(shapes.len());
                    match axis {
                        Axis::Col => {
                            let total = g.shape()[1];
                            let r = g.shape()[0];
                            let mut off = 0;
                            for s in &shapes {
                                let c = s[1];
                                let mut part = Tensor::zeros(s);
                                for i in 0..r {
                                    part.data_mut()[i * c..(i + 1) * c].copy_from_slice(
                                        &g.data()[i * total + off..i * total + off + c],
                                    );
                                }
                                grads.push(part);
                                off += c;
                            }
                        }
                        Axis::Row => {
                            let mut off = 0;
                            for s in &shapes {
                                let n: usize = s.iter().product();
                                let mut part = Tensor::zeros(s);
                                part.data_mut().copy_from_slice(&g.data()[off..off + n]);
                                grads.push(part);
                                off += n;
                            }
                        }
                    }
                    grads
                }))
            } else {
                None
            },
        }))
    }

    /// Contiguous slice `[start, stop)` along `axis` of a rank-2 tensor.
    pub fn slice(&self, x: Var, axis: Axis, start: usize, stop: usize) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        if xv.ndim() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "slice",
                lhs: xv.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let bound = match axis {
            Axis::Row => r,
            Axis::Col => c,
        };
        if start > stop || stop > bound {
            return Err(TensorError::IndexOutOfBounds {
                op: "slice",
                index: stop,
                bound,
            });
        }
        let out = match axis {
            Axis::Row => {
                let mut out = Tensor::zeros(&[stop - start, c]);
                out.data_mut()
                    .copy_from_slice(&xv.data()[start * c..stop * c]);
                out
            }
            Axis::Col => {
                let mut out = Tensor::zeros(&[r, stop - start]);
                for i in 0..r {
                    out.data_mut()[i * (stop - start)..(i + 1) * (stop - start)]
                        .copy_from_slice(&xv.row(i)[start..stop]);
                }
                out
            }
        };
        Ok(self.record1(x, out, move |g| {
            let mut gx = Tensor::zeros(&[r, c]);
            match axis {
                Axis::Row => {
                    gx.data_mut()[start * c..stop * c].copy_from_slice(g.data());
                }
                Axis::Col => {
                    let w = stop - start;
                    for i in 0..r {
                        gx.data_mut()[i * c + start..i * c + stop]
                            .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                    }
                }
            }
            gx
        }))
    }

    /// Selects rows of a rank-2 tensor; indices may repeat. The backward
    /// pass scatter-adds, so repeated rows accumulate gradient.
    pub fn gather_rows(&self, x: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        if xv.ndim() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "gather_rows",
                lhs: xv.shape().to_vec(),
                rhs: vec![indices.len()],
            });
        }
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= r) {
            return Err(TensorError::IndexOutOfBounds {
                op: "gather_rows",
                index: bad,
                bound: r,
            });
        }
        let idx: Vec<usize> = indices.to_vec();
        let mut out = Tensor::zeros(&[idx.len(), c]);
        for (o, &i) in idx.iter().enumerate() {
            out.data_mut()[o * c..(o + 1) * c].copy_from_slice(xv.row(i));
        }
        Ok(self.record1(x, out, move |g| {
            let mut gx = Tensor::zeros(&[r, c]);
            for (o, &i) in idx.iter().enumerate() {
                for j in 0..c {
                    gx.data_mut()[i * c + j] += g.data()[o * c + j];
                }
            }
            gx
        }))
    }

    /// Adds row `i` of `src` into row `indices[i]` of a fresh `out_rows x c`
    /// zero tensor. Duplicate targets accumulate.
    pub fn scatter_add_rows(
        &self,
        src: Var,
        indices: &[usize],
        out_rows: usize,
    ) -> Result<Var, TensorError> {
        let sv = self.value_ref(src);
        if sv.ndim() != 2 || sv.shape()[0] != indices.len() {
            return Err(TensorError::ShapeMismatch {
                op: "scatter_add_rows",
                lhs: sv.shape().to_vec(),
                rhs: vec![indices.len()],
            });
        }
        let c = sv.shape()[1];
        if let Some(&bad) = indices.iter().find(|&&i| i >= out_rows) {
            return Err(TensorError::IndexOutOfBounds {
                op: "scatter_add_rows",
                index: bad,
                bound: out_rows,
            });
        }
        let idx: Vec<usize> = indices.to_vec();
        let mut out = Tensor::zeros(&[out_rows, c]);
        for (s, &i) in idx.iter().enumerate() {
            for j in 0..c {
                out.data_mut()[i * c + j] += sv.data()[s * c + j];
            }
        }
        Ok(self.record1(src, out, move |g| {
            let mut gs = Tensor::zeros(&[idx.len(), c]);
            for (s, &i) in idx.iter().enumerate() {
                gs.data_mut()[s * c..(s + 1) * c].copy_from_slice(&g.data()[i * c..(i + 1) * c]);
            }
            gs
        }))
    }

    /// Sum of every element, as a `[1]`-shaped scalar.
    pub fn sum(&self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let total: f64 = xv.data().iter().sum();
        let shape = xv.shape().to_vec();
        Ok(self.record1(x, Tensor::scalar(total), move |g| {
            Tensor::filled(&shape, g.data()[0])
        }))
    }

    /// Mean of every element, as a `[1]`-shaped scalar.
    pub fn mean(&self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let n = xv.numel() as f64;
        let total: f64 = xv.data().iter().sum();
        let shape = xv.shape().to_vec();
        Ok(self.record1(x, Tensor::scalar(total / n), move |g| {
            Tensor::filled(&shape, g.data()[0] / n)
        }))
    }

    /// Euclidean norm of each row of a rank-2 tensor, as a rank-1 vector.
    /// Rows with norm at or below [`NORM_GRAD_GUARD`] get zero gradient (the
    /// subgradient at the origin).
    pub fn l2_norm_rows(&self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        if xv.ndim() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "l2_norm_rows",
                lhs: xv.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let mut out = Tensor::zeros(&[r]);
        for i in 0..r {
            let mut acc = 0.0;
            for &v in xv.row(i) {
                acc += v * v;
            }
            out.data_mut()[i] = mathf::sqrt(acc);
        }
        let norms = out.clone();
        Ok(self.record1(x, out, move |g| {
            let mut gx = Tensor::zeros(&[r, c]);
            for i in 0..r {
                let n = norms.data()[i];
                if n <= NORM_GRAD_GUARD {
                    continue;
                }
                let f = g.data()[i] / n;
                for j in 0..c {
                    gx.data_mut()[i * c + j] = f * xv.data()[i * c + j];
                }
            }
            gx
        }))
    }

    /// Shape change without data movement.
    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let xv = self.value_ref(x);
        let out = xv.reshaped(shape)?;
        let orig = xv.shape().to_vec();
        Ok(self.record1(x, out, move |g| {
            g.reshaped(&orig).expect("reshape grad")
        }))
    }
}

#[inline]
fn lane_start(axis: Axis, lane: usize, base: usize) -> usize {
    match axis {
        Axis::Row => lane * base,
        Axis::Col => lane * base, // base is 1 for columns; start index equals lane
    }
}

impl Var {
    pub(super) fn index(self) -> usize {
        self.0
    }
}
