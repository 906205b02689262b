//! Autoregressive sequence decoder: geometric vector perceptron (GVP)
//! layers interleaved with neighbor propagation.
//!
//! Each GVP layer mixes the flattened 3-vector channels per spatial
//! coordinate, feeds channel norms into the scalar path, and gates the
//! vector output by a sigmoid of its channel norms. Decoding runs node by
//! node along the RNA chain: already-generated bases enter as additive
//! learned embeddings on their own node's scalar features, everything else
//! (undecoded RNA and all protein nodes) carries a shared mask embedding,
//! and the stack runs over every node. After each GVP layer the scalar
//! features take a residual update from the mean over each node's stored
//! neighbors (one shared linear map) — that propagation step is what lets
//! already-generated bases influence later positions, since the read node
//! itself always carries the mask token. A linear readout of the current
//! node's scalar state yields 4-way logits. The stack is re-run from
//! scratch each step with undecoded positions masked, so causality holds
//! by construction.

use alloc::vec::Vec;
use core::fmt;

use crate::mathf;
use crate::rng::Xoshiro256StarStar;
use crate::tensor::{Axis, Tape, Tensor, TensorError, Var};

/// Row index of the shared mask embedding inside the embedding table
/// (rows 0..4 are the nucleotide embeddings).
pub const MASK_TOKEN: usize = 4;

/// Errors from decoding.
#[derive(Debug, Clone, PartialEq)]
pub enum DecoderError {
    /// Asked to decode a step at or past the RNA length.
    StepOutOfRange { step: usize, rna_len: usize },
    /// Sampling or step temperature must be strictly positive.
    NonPositiveTemperature,
    /// Supplied sequence length disagrees with the RNA node count.
    LengthMismatch { expected: usize, got: usize },
    /// A prefix entry is not a nucleotide index in 0..4.
    BadBase { index: usize },
    /// Underlying tensor-shape failure.
    Tensor(TensorError),
}

impl fmt::Display for DecoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderError::StepOutOfRange { step, rna_len } => {
                write!(f, "decode step {step} out of range for {rna_len} RNA nodes")
            }
            DecoderError::NonPositiveTemperature => {
                write!(f, "sampling temperature must be > 0")
            }
            DecoderError::LengthMismatch { expected, got } => {
                write!(f, "sequence length {got} does not match {expected} RNA nodes")
            }
            DecoderError::BadBase { index } => {
                write!(f, "nucleotide index {index} out of range 0..4")
            }
            DecoderError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DecoderError {}

impl From<TensorError> for DecoderError {
    fn from(e: TensorError) -> Self {
        DecoderError::Tensor(e)
    }
}

/// One GVP layer's weights bound on a tape.
///
/// `w_h` is `[d_v, d_h]` applied to each spatial coordinate, `w_mu` is
/// `[d_h, d_v]`, `w_m` maps `[d_e + d_h, d_e]`, and `bias` is `[1, d_e]`.
#[derive(Debug, Clone, Copy)]
pub struct GvpLayerVars {
    pub w_h: Var,
    pub w_mu: Var,
    pub w_m: Var,
    pub bias: Var,
}

/// Full decoder weights: GVP stack, the neighbor-propagation map, the 5-row
/// embedding table (four bases plus the mask token), and the linear readout
/// to 4 logits.
#[derive(Debug, Clone)]
pub struct DecoderVars {
    pub layers: Vec<GvpLayerVars>,
    /// `[d_e, d_e]` map applied to each node's neighbor-mean scalars after
    /// every layer (shared across layers). This is the only path through
    /// which generated-base embeddings reach other nodes.
    pub nbr: Var,
    /// `[5, d_e]`: rows 0..4 are A, G, C, U; row 4 is the mask embedding.
    pub embed: Var,
    /// `[d_e, 4]` readout weight.
    pub readout: Var,
    /// `[1, 4]` readout bias.
    pub readout_bias: Var,
}

/// Row-normalized neighbor-mean operator for a node adjacency: row `i` holds
/// `1/|N(i)|` at each stored neighbor column (zero row when `N(i)` is empty).
/// Left-multiplying `[n, d]` features by this `[n, n]` matrix replaces each
/// node's features with the mean over its stored neighbors.
pub fn neighbor_mean_matrix(adjacency: &[Vec<usize>]) -> Tensor {
    let n = adjacency.len();
    let mut m = Tensor::zeros(&[n, n]);
    for (i, nbrs) in adjacency.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            m.set2(i, j, m.get2(i, j) + w);
        }
    }
    m
}

/// One GVP layer: vector channels are mixed per coordinate, their norms join
/// the scalar path, and the vector output is gated by its own channel norms.
pub fn gvp_forward(
    tape: &Tape,
    s: Var,
    v: Var,
    d_v: usize,
    d_h: usize,
    layer: &GvpLayerVars,
) -> Result<(Var, Var), TensorError> {
    let v_h = tape.per_coordinate_matmul(v, layer.w_h, d_v)?;
    let norms = tape.channel_norms(v_h, d_h)?;
    let joined = tape.concat(Axis::Col, &[s, norms])?;
    let pre = tape.add(tape.matmul(joined, layer.w_m)?, layer.bias)?;
    let s_out = tape.relu(pre);
    let v_mu = tape.per_coordinate_matmul(v_h, layer.w_mu, d_h)?;
    let v_out = tape.gate_channels_by_norm(v_mu, d_v)?;
    Ok((s_out, v_out))
}

fn check_prefix(prefix: &[usize]) -> Result<(), DecoderError> {
    for &b in prefix {
        if b >= 4 {
            return Err(DecoderError::BadBase { index: b });
        }
    }
    Ok(())
}

/// Logits for the node at `prefix.len()`, conditioning on the given prefix.
///
/// `s_ctx`/`v_ctx` are per-node context features over the whole complex
/// (RNA nodes first, in chain order, then protein nodes); `prop` is the
/// `[n, n]` neighbor-mean operator from [`neighbor_mean_matrix`], carried
/// on the tape as a constant. Differentiable with respect to the context
/// and every decoder weight.
pub fn step_logits(
    tape: &Tape,
    s_ctx: Var,
    v_ctx: Var,
    prop: Var,
    d_v: usize,
    d_h: usize,
    rna_len: usize,
    prefix: &[usize],
    vars: &DecoderVars,
) -> Result<Var, DecoderError> {
    let t = prefix.len();
    if t >= rna_len {
        return Err(DecoderError::StepOutOfRange { step: t, rna_len });
    }
    check_prefix(prefix)?;
    let n = tape.shape_of(s_ctx)[0];
    let mut token_rows = Vec::with_capacity(n);
    for i in 0..n {
        token_rows.push(if i < t { prefix[i] } else { MASK_TOKEN });
    }
    let tokens = tape.gather_rows(vars.embed, &token_rows)?;
    let mut s = tape.add(s_ctx, tokens)?;
    let mut v = v_ctx;
    for layer in &vars.layers {
        let (s2, v2) = gvp_forward(tape, s, v, d_v, d_h, layer)?;
        let pooled = tape.matmul(prop, s2)?;
        s = tape.add(s2, tape.matmul(pooled, vars.nbr)?)?;
        v = v2;
    }
    let picked = tape.gather_rows(s, &[t])?;
    let logits = tape.add(tape.matmul(picked, vars.readout)?, vars.readout_bias)?;
    Ok(logits)
}

/// One decoding step: temperature-scaled softmax of [`step_logits`].
/// Returns the `[1, 4]` probability row as a tape value.
pub fn decode_step(
    tape: &Tape,
    s_ctx: Var,
    v_ctx: Var,
    prop: Var,
    d_v: usize,
    d_h: usize,
    rna_len: usize,
    prefix: &[usize],
    vars: &DecoderVars,
    temperature: f64,
) -> Result<Var, DecoderError> {
    if !(temperature > 0.0) {
        return Err(DecoderError::NonPositiveTemperature);
    }
    let logits = step_logits(tape, s_ctx, v_ctx, prop, d_v, d_h, rna_len, prefix, vars)?;
    let scaled = tape.scalar_mul(logits, 1.0 / temperature)?;
    Ok(tape.softmax(scaled, Axis::Row)?)
}

/// Teacher forcing: per step `t` the prefix is the TRUE bases `0..t`.
/// Returns the stacked `[rna_len, 4]` logits, one row per step.
pub fn teacher_forced_logits(
    tape: &Tape,
    s_ctx: Var,
    v_ctx: Var,
    prop: Var,
    d_v: usize,
    d_h: usize,
    rna_len: usize,
    sequence: &[usize],
    vars: &DecoderVars,
) -> Result<Var, DecoderError> {
    if sequence.len() != rna_len {
        return Err(DecoderError::LengthMismatch {
            expected: rna_len,
            got: sequence.len(),
        });
    }
    check_prefix(sequence)?;
    let mut rows = Vec::with_capacity(rna_len);
    for t in 0..rna_len {
        rows.push(step_logits(
            tape,
            s_ctx,
            v_ctx,
            prop,
            d_v,
            d_h,
            rna_len,
            &sequence[..t],
            vars,
        )?);
    }
    if rows.len() == 1 {
        Ok(rows[0])
    } else {
        Ok(tape.concat(Axis::Row, &rows)?)
    }
}

/// Sample a full sequence 5'→3'. Deterministic given the generator state.
pub fn autoregressive_sample(
    tape: &Tape,
    s_ctx: Var,
    v_ctx: Var,
    prop: Var,
    d_v: usize,
    d_h: usize,
    rna_len: usize,
    vars: &DecoderVars,
    temperature: f64,
    rng: &mut Xoshiro256StarStar,
) -> Result<Vec<usize>, DecoderError> {
    if !(temperature > 0.0) {
        return Err(DecoderError::NonPositiveTemperature);
    }
    let mut out = Vec::with_capacity(rna_len);
    for _ in 0..rna_len {
        let probs = decode_step(
            tape,
            s_ctx,
            v_ctx,
            prop,
            d_v,
            d_h,
            rna_len,
            &out,
            vars,
            temperature,
        )?;
        let p = tape.value(probs);
        out.push(sample_categorical(p.data(), rng));
    }
    Ok(out)
}

/// Inverse-CDF draw from a probability vector; the last index absorbs any
/// floating-point shortfall.
fn sample_categorical(probs: &[f64], rng: &mut Xoshiro256StarStar) -> usize {
    let u = rng.next_f64();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Temperature softmax on a plain logit slice (numerically stable). Used by
/// value-level consumers and as a direct oracle for the tape path.
pub fn temperature_softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>, DecoderError> {
    if !(temperature > 0.0) {
        return Err(DecoderError::NonPositiveTemperature);
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|z| mathf::exp(z - max)).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / z).collect())
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * mathf::ln(p))
        .sum()
}
