//! Attention embedding: multi-head self-attention over flattened vector
//! channels and attention pooling over the five scalar blocks.
//!
//! Vector attention treats the `[n, 3 * d_v]` flattened bank as ordinary
//! row features: per head, `softmax(Q K^T / sqrt(head_width))` mixes node
//! rows globally and head outputs are concatenated (no output projection).
//! Scalar pooling scores each of the five blocks per node, softmaxes the
//! five scores, and sums learned per-block projections under those weights.

use alloc::vec::Vec;
use core::fmt;

use crate::mathf;
use crate::tensor::{Axis, Tape, Tensor, TensorError, Var};

/// Additive logit for disallowed pairs in masked attention; large enough to
/// zero them out through softmax without producing non-finite values.
pub const MASK_LOGIT: f64 = -1e9;

/// Errors specific to attention configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttentionError {
    /// Flattened vector width is not divisible by the head count.
    IndivisibleHeads { width: usize, heads: usize },
    /// The pool was not given exactly five blocks.
    NotFiveBlocks { got: usize },
}

impl fmt::Display for AttentionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionError::IndivisibleHeads { width, heads } => {
                write!(f, "width {width} not divisible by {heads} heads")
            }
            AttentionError::NotFiveBlocks { got } => {
                write!(f, "scalar pooling expects 5 blocks, got {got}")
            }
        }
    }
}

impl core::error::Error for AttentionError {}

/// Per-head projection weights bound on a tape, each `[3 d_v, 3 d_v / h]`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionHeadVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
}

/// One stacked attention application: its set of heads.
#[derive(Debug, Clone)]
pub struct VectorAttentionLayerVars {
    pub heads: Vec<AttentionHeadVars>,
}

/// Scalar pooling weights: per block a score vector `[w_i, 1]` and a
/// projection `[w_i, d_e]`.
#[derive(Debug, Clone)]
pub struct ScalarPoolVars {
    pub scores: Vec<Var>,
    pub projections: Vec<Var>,
}

/// Additive attention mask restricting each query to itself and its stored
/// neighbours; entries are 0 where attention is allowed, [`MASK_LOGIT`]
/// elsewhere.
pub fn knn_attention_mask(adjacency: &[Vec<usize>]) -> Tensor {
    let n = adjacency.len();
    let mut mask = Tensor::filled(&[n, n], MASK_LOGIT);
    for (i, nbrs) in adjacency.iter().enumerate() {
        mask.set2(i, i, 0.0);
        for &j in nbrs {
            mask.set2(i, j, 0.0);
        }
    }
    mask
}

/// Multi-head self-attention over flattened vector features.
///
/// Every head computes `softmax((F W_q)(F W_k)^T / sqrt(head_width)) (F W_v)`
/// with the softmax running across nodes within each query row; outputs are
/// concatenated back to the input width.
pub fn vector_self_attention(
    tape: &Tape,
    v_flat: Var,
    layer: &VectorAttentionLayerVars,
    mask: Option<&Tensor>,
) -> Result<Var, TensorError> {
    let mask_var = mask.map(|m| tape.constant(m.clone()));
    let mut head_outputs = Vec::with_capacity(layer.heads.len());
    for head in &layer.heads {
        let q = tape.matmul(v_flat, head.w_q)?;
        let k = tape.matmul(v_flat, head.w_k)?;
        let val = tape.matmul(v_flat, head.w_v)?;
        let head_width = tape.shape_of(q)[1];
        let logits = tape.matmul(q, tape.transpose(k)?)?;
        let mut scaled = tape.scalar_mul(logits, 1.0 / mathf::sqrt(head_width as f64))?;
        if let Some(mv) = mask_var {
            scaled = tape.add(scaled, mv)?;
        }
        let weights = tape.softmax(scaled, Axis::Row)?;
        head_outputs.push(tape.matmul(weights, val)?);
    }
    if head_outputs.len() == 1 {
        Ok(head_outputs[0])
    } else {
        tape.concat(Axis::Col, &head_outputs)
    }
}

/// Attention pooling over the five scalar blocks.
///
/// Per node: `score_i = s_i . w_p_i`, `gamma = softmax(scores)`, and the
/// pooled row is `sum_i gamma_i * (s_i P_i)`. Returns the pooled `[n, d_e]`
/// features and the `[n, 5]` gamma matrix (handy for tests and inspection).
pub fn scalar_attention_pool(
    tape: &Tape,
    blocks: &[Var],
    pool: &ScalarPoolVars,
) -> Result<(Var, Var), TensorError> {
    assert_eq!(
        blocks.len(),
        pool.scores.len(),
        "one score vector per block"
    );
    assert_eq!(
        blocks.len(),
        pool.projections.len(),
        "one projection per block"
    );
    let mut score_cols = Vec::with_capacity(blocks.len());
    for (&b, &w) in blocks.iter().zip(&pool.scores) {
        score_cols.push(tape.matmul(b, w)?);
    }
    let scores = tape.concat(Axis::Col, &score_cols)?;
    let gamma = tape.softmax(scores, Axis::Row)?;

    let mut pooled: Option<Var> = None;
    for (i, (&b, &p)) in blocks.iter().zip(&pool.projections).enumerate() {
        let projected = tape.matmul(b, p)?;
        let g_col = tape.slice(gamma, Axis::Col, i, i + 1)?;
        let weighted = tape.multiply(projected, g_col)?;
        pooled = Some(match pooled {
            None => weighted,
            Some(acc) => tape.add(acc, weighted)?,
        });
    }
    Ok((pooled.expect("at least one block"), gamma))
}

/// All embedding weights bound on a tape.
#[derive(Debug, Clone)]
pub struct EmbedVars {
    /// Stacked vector attention applications; may be empty (vector identity).
    pub attn_layers: Vec<VectorAttentionLayerVars>,
    pub pool: ScalarPoolVars,
}

/// The embedded graph features: pooled scalars, attended vectors, and the
/// per-node block weights from pooling.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedFeatures {
    pub s_a: Var,
    pub v_a: Var,
    pub gamma: Var,
}

/// Apply both attention paths to bound node features. `block_widths` carves
/// the scalar matrix into its five blocks; adjacency is untouched.
pub fn embed_graph(
    tape: &Tape,
    s: Var,
    v_flat: Var,
    block_widths: &[usize],
    vars: &EmbedVars,
    mask: Option<&Tensor>,
) -> Result<EmbeddedFeatures, TensorError> {
    let mut blocks = Vec::with_capacity(block_widths.len());
    let mut off = 0;
    for &w in block_widths {
        blocks.push(tape.slice(s, Axis::Col, off, off + w)?);
        off += w;
    }
    let (s_a, gamma) = scalar_attention_pool(tape, &blocks, &vars.pool)?;
    let mut v_a = v_flat;
    for layer in &vars.attn_layers {
        v_a = vector_self_attention(tape, v_a, layer, mask)?;
    }
    Ok(EmbeddedFeatures { s_a, v_a, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use crate::rng::Xoshiro256StarStar;
    use alloc::vec;

    /// Explicit per-row oracle for single-head attention, all plain loops.
    fn single_head_oracle(f: &Tensor, wq: &Tensor, wk: &Tensor, wv: &Tensor) -> Tensor {
        let n = f.shape()[0];
        let w = f.shape()[1];
        let hd = wq.shape()[1];
        let project = |m: &Tensor| -> Vec<Vec<f64>> {
            let mut out = vec![vec![0.0; hd]; n];
            for i in 0..n {
                for o in 0..hd {
                    let mut acc = 0.0;
                    for c in 0..w {
                        acc += f.get2(i, c) * m.get2(c, o);
                    }
                    out[i][o] = acc;
                }
            }
            out
        };
        let q = project(wq);
        let k = project(wk);
        let v = project(wv);
        let scale = 1.0 / (hd as f64).sqrt();
        let mut out = Tensor::zeros(&[n, hd]);
        for i in 0..n {
            let mut logits = vec![0.0; n];
            for j in 0..n {
                logits[j] = scale * q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for o in 0..hd {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += exps[j] / z * v[j][o];
                }
                out.set2(i, o, acc);
            }
        }
        out
    }

    fn random_heads(
        tape: &Tape,
        width: usize,
        heads: usize,
        spread: f64,
        rng: &mut Xoshiro256StarStar,
    ) -> VectorAttentionLayerVars {
        let hd = width / heads;
        VectorAttentionLayerVars {
            heads: (0..heads)
                .map(|_| AttentionHeadVars {
                    w_q: tape.param(gradcheck::random_tensor(&[width, hd], spread, rng)),
                    w_k: tape.param(gradcheck::random_tensor(&[width, hd], spread, rng)),
                    w_v: tape.param(gradcheck::random_tensor(&[width, hd], spread, rng)),
                })
                .collect(),
        }
    }

    #[test]
    fn single_node_attention_is_value_projection() {
        let mut rng = Xoshiro256StarStar::stream(41, 0);
        let tape = Tape::new();
        let f = gradcheck::random_tensor(&[1, 6], 1.0, &mut rng);
        let v = tape.constant(f.clone());
        let layer = random_heads(&tape, 6, 2, 0.7, &mut rng);
        let out = vector_self_attention(&tape, v, &layer, None).unwrap();
        // Expected: concatenated value projections of the single row.
        let mut want = Vec::new();
        for head in &layer.heads {
            let wv = tape.value(head.w_v);
            for o in 0..3 {
                let mut acc = 0.0;
                for c in 0..6 {
                    acc += f.get2(0, c) * wv.get2(c, o);
                }
                want.push(acc);
            }
        }
        let got = tape.value(out);
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_queries_give_uniform_attention() {
        let mut rng = Xoshiro256StarStar::stream(41, 1);
        let tape = Tape::new();
        let n = 5;
        let f = gradcheck::random_tensor(&[n, 4], 1.2, &mut rng);
        let v = tape.constant(f.clone());
        let layer = VectorAttentionLayerVars {
            heads: vec![AttentionHeadVars {
                w_q: tape.constant(Tensor::zeros(&[4, 4])),
                w_k: tape.constant(Tensor::zeros(&[4, 4])),
                w_v: tape.param(gradcheck::random_tensor(&[4, 4], 0.8, &mut rng)),
            }],
        };
        let out = vector_self_attention(&tape, v, &layer, None).unwrap();
        let got = tape.value(out);
        // Every row should equal the mean of the value-projected rows.
        let wv = tape.value(layer.heads[0].w_v);
        let mut mean = vec![0.0; 4];
        for i in 0..n {
            for o in 0..4 {
                let mut acc = 0.0;
                for c in 0..4 {
                    acc += f.get2(i, c) * wv.get2(c, o);
                }
                mean[o] += acc / n as f64;
            }
        }
        for i in 0..n {
            for o in 0..4 {
                assert!((got.get2(i, o) - mean[o]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_head_matches_loop_oracle() {
        let mut rng = Xoshiro256StarStar::stream(41, 2);
        for _ in 0..10 {
            let n = 3;
            let tape = Tape::new();
            let f = gradcheck::random_tensor(&[n, 6], 1.0, &mut rng);
            let v = tape.constant(f.clone());
            let layer = random_heads(&tape, 6, 1, 0.6, &mut rng);
            let out = vector_self_attention(&tape, v, &layer, None).unwrap();
            let want = single_head_oracle(
                &f,
                &tape.value(layer.heads[0].w_q),
                &tape.value(layer.heads[0].w_k),
                &tape.value(layer.heads[0].w_v),
            );
            assert!(tape.value(out).max_abs_diff(&want).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn masked_attention_ignores_non_neighbours() {
        let mut rng = Xoshiro256StarStar::stream(41, 3);
        let tape = Tape::new();
        let n = 4;
        let f = gradcheck::random_tensor(&[n, 4], 1.0, &mut rng);
        let v = tape.constant(f.clone());
        let layer = random_heads(&tape, 4, 1, 0.6, &mut rng);
        // Node 0 may look only at itself: changing every other row must not
        // change node 0's output.
        let adjacency = vec![vec![], vec![0], vec![0, 1], vec![2]];
        let mask = knn_attention_mask(&adjacency);
        let out = vector_self_attention(&tape, v, &layer, Some(&mask)).unwrap();
        let row0: Vec<f64> = tape.value(out).row(0).to_vec();

        let mut f2 = f.clone();
        for i in 1..n {
            for c in 0..4 {
                f2.set2(i, c, f2.get2(i, c) + rng.normal());
            }
        }
        let tape2 = Tape::new();
        let v2 = tape2.constant(f2);
        let layer2 = VectorAttentionLayerVars {
            heads: vec![AttentionHeadVars {
                w_q: tape2.constant(tape.value(layer.heads[0].w_q)),
                w_k: tape2.constant(tape.value(layer.heads[0].w_k)),
                w_v: tape2.constant(tape.value(layer.heads[0].w_v)),
            }],
        };
        let out2 = vector_self_attention(&tape2, v2, &layer2, Some(&mask)).unwrap();
        let row0b: Vec<f64> = tape2.value(out2).row(0).to_vec();
        for (a, b) in row0.iter().zip(&row0b) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    fn random_pool(
        tape: &Tape,
        widths: &[usize],
        d_e: usize,
        rng: &mut Xoshiro256StarStar,
    ) -> ScalarPoolVars {
        ScalarPoolVars {
            scores: widths
                .iter()
                .map(|&w| tape.param(gradcheck::random_tensor(&[w, 1], 0.8, rng)))
                .collect(),
            projections: widths
                .iter()
                .map(|&w| tape.param(gradcheck::random_tensor(&[w, d_e], 0.8, rng)))
                .collect(),
        }
    }

    fn random_blocks(
        tape: &Tape,
        n: usize,
        widths: &[usize],
        rng: &mut Xoshiro256StarStar,
    ) -> Vec<Var> {
        widths
            .iter()
            .map(|&w| tape.constant(gradcheck::random_tensor(&[n, w], 1.0, rng)))
            .collect()
    }

    #[test]
    fn equal_scores_pool_to_mean_of_projections() {
        let mut rng = Xoshiro256StarStar::stream(43, 0);
        let tape = Tape::new();
        let widths = [3usize, 2, 4, 3, 2];
        let n = 4;
        let d_e = 5;
        let blocks = random_blocks(&tape, n, &widths, &mut rng);
        let mut pool = random_pool(&tape, &widths, d_e, &mut rng);
        // Zero score vectors: all five scores are 0 for every node.
        pool.scores = widths
            .iter()
            .map(|&w| tape.constant(Tensor::zeros(&[w, 1])))
            .collect();
        let (s_a, gamma) = scalar_attention_pool(&tape, &blocks, &pool).unwrap();
        let gv = tape.value(gamma);
        for i in 0..n {
            for b in 0..5 {
                assert!((gv.get2(i, b) - 0.2).abs() <= 1e-12);
            }
        }
        // Pooled row = mean of the five projected rows.
        let mut want = Tensor::zeros(&[n, d_e]);
        for (b, &blk) in blocks.iter().enumerate() {
            let bv = tape.value(blk);
            let pv = tape.value(pool.projections[b]);
            for i in 0..n {
                for o in 0..d_e {
                    let mut acc = 0.0;
                    for c in 0..widths[b] {
                        acc += bv.get2(i, c) * pv.get2(c, o);
                    }
                    want.set2(i, o, want.get2(i, o) + 0.2 * acc);
                }
            }
        }
        assert!(tape.value(s_a).max_abs_diff(&want).unwrap() <= 1e-12);
    }

    #[test]
    fn saturated_score_selects_single_block() {
        let mut rng = Xoshiro256StarStar::stream(43, 1);
        let tape = Tape::new();
        let widths = [2usize, 2, 2, 2, 2];
        let n = 3;
        let d_e = 4;
        // Blocks of ones so scores are exactly the score-vector sums.
        let blocks: Vec<Var> = widths
            .iter()
            .map(|&w| tape.constant(Tensor::filled(&[n, w], 1.0)))
            .collect();
        let mut pool = random_pool(&tape, &widths, d_e, &mut rng);
        pool.scores = (0..5)
            .map(|b| {
                let v = if b == 2 { 500.0 } else { 0.0 };
                tape.constant(Tensor::filled(&[2, 1], v))
            })
            .collect();
        let (s_a, _) = scalar_attention_pool(&tape, &blocks, &pool).unwrap();
        // Expected: block 2's projection of the all-ones row.
        let pv = tape.value(pool.projections[2]);
        let got = tape.value(s_a);
        for i in 0..n {
            for o in 0..d_e {
                let want = pv.get2(0, o) + pv.get2(1, o);
                assert!((got.get2(i, o) - want).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn gamma_rows_sum_to_one_and_match_loop_oracle() {
        let mut rng = Xoshiro256StarStar::stream(43, 2);
        let tape = Tape::new();
        let widths = [3usize, 4, 2, 5, 3];
        let n = 2;
        let d_e = 6;
        let blocks = random_blocks(&tape, n, &widths, &mut rng);
        let pool = random_pool(&tape, &widths, d_e, &mut rng);
        let (s_a, gamma) = scalar_attention_pool(&tape, &blocks, &pool).unwrap();
        let gv = tape.value(gamma);
        let sv = tape.value(s_a);
        for i in 0..n {
            let sum: f64 = (0..5).map(|b| gv.get2(i, b)).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            // Loop oracle: raw scores, stable softmax, weighted projections.
            let mut scores = [0.0f64; 5];
            for b in 0..5 {
                let bv = tape.value(blocks[b]);
                let wv = tape.value(pool.scores[b]);
                scores[b] = (0..widths[b]).map(|c| bv.get2(i, c) * wv.get2(c, 0)).sum();
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut want_row = vec![0.0; d_e];
            for b in 0..5 {
                let g = exps[b] / z;
                assert!((gv.get2(i, b) - g).abs() <= 1e-12);
                let bv = tape.value(blocks[b]);
                let pv = tape.value(pool.projections[b]);
                for o in 0..d_e {
                    let mut acc = 0.0;
                    for c in 0..widths[b] {
                        acc += bv.get2(i, c) * pv.get2(c, o);
                    }
                    want_row[o] += g * acc;
                }
            }
            for o in 0..d_e {
                assert!((sv.get2(i, o) - want_row[o]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shifting_all_scores_leaves_gamma_unchanged() {
        let mut rng = Xoshiro256StarStar::stream(43, 3);
        let _tape = Tape::new();
        let widths = [3usize, 2, 4, 2, 3];
        let n = 4;
        let d_e = 5;
        let block_vals: Vec<Tensor> = widths
            .iter()
            .map(|&w| gradcheck::random_tensor(&[n, w], 1.0, &mut rng))
            .collect();
        let score_vals: Vec<Tensor> = widths
            .iter()
            .map(|&w| gradcheck::random_tensor(&[w, 1], 0.8, &mut rng))
            .collect();
        let proj_vals: Vec<Tensor> = widths
            .iter()
            .map(|&w| gradcheck::random_tensor(&[w, d_e], 0.8, &mut rng))
            .collect();

        let build = |shift: f64| -> Tensor {
            let tape = Tape::new();
            // Append a ones column to every block and `shift` to every score
            // vector: each score moves by exactly `shift`, projections see a
            // zero row so the pooled value path is untouched.
            let blocks: Vec<Var> = block_vals
                .iter()
                .map(|b| {
                    let mut wide = Tensor::zeros(&[n, b.shape()[1] + 1]);
                    for i in 0..n {
                        for c in 0..b.shape()[1] {
                            wide.set2(i, c, b.get2(i, c));
                        }
                        wide.set2(i, b.shape()[1], 1.0);
                    }
                    tape.constant(wide)
                })
                .collect();
            let pool = ScalarPoolVars {
                scores: score_vals
                    .iter()
                    .map(|s| {
                        let mut ext = Tensor::zeros(&[s.shape()[0] + 1, 1]);
                        for c in 0..s.shape()[0] {
                            ext.set2(c, 0, s.get2(c, 0));
                        }
                        ext.set2(s.shape()[0], 0, shift);
                        tape.constant(ext)
                    })
                    .collect(),
                projections: proj_vals
                    .iter()
                    .map(|p| {
                        let mut ext = Tensor::zeros(&[p.shape()[0] + 1, d_e]);
                        for r in 0..p.shape()[0] {
                            for c in 0..d_e {
                                ext.set2(r, c, p.get2(r, c));
                            }
                        }
                        tape.constant(ext)
                    })
                    .collect(),
            };
            let (_, gamma) = scalar_attention_pool(&tape, &blocks, &pool).unwrap();
            tape.value(gamma)
        };
        let g0 = build(0.0);
        for c in [-7.5, 3.0, 40.0] {
            let gc = build(c);
            assert!(g0.max_abs_diff(&gc).unwrap() <= 1e-12, "shift {c}");
        }
    }

    #[test]
    fn embed_graph_permutation_equivariance() {
        let mut rng = Xoshiro256StarStar::stream(43, 4);
        let widths = [3usize, 2, 2, 3, 2];
        let d_e: usize = widths.iter().sum();
        let n = 6;
        let d_v = 2;

        let s_val = gradcheck::random_tensor(&[n, d_e], 1.0, &mut rng);
        let v_val = gradcheck::random_tensor(&[n, 3 * d_v], 1.0, &mut rng);
        let init = Xoshiro256StarStar::stream(43, 5);

        let run = |s_in: &Tensor, v_in: &Tensor| -> (Tensor, Tensor) {
            let mut init = init.clone();
            let tape = Tape::new();
            let s = tape.constant(s_in.clone());
            let v = tape.constant(v_in.clone());
            let vars = EmbedVars {
                attn_layers: vec![random_heads(&tape, 3 * d_v, 3, 0.6, &mut init)],
                pool: random_pool(&tape, &widths, d_e, &mut init),
            };
            let out = embed_graph(&tape, s, v, &widths, &vars, None).unwrap();
            (tape.value(out.s_a), tape.value(out.v_a))
        };

        let (sa, va) = run(&s_val, &v_val);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let permute = |t: &Tensor| -> Tensor {
            let mut out = Tensor::zeros(&[n, t.shape()[1]]);
            for i in 0..n {
                for c in 0..t.shape()[1] {
                    out.set2(perm[i], c, t.get2(i, c));
                }
            }
            out
        };
        let (sa_p, va_p) = run(&permute(&s_val), &permute(&v_val));
        assert!(permute(&sa).max_abs_diff(&sa_p).unwrap() <= 1e-9);
        assert!(permute(&va).max_abs_diff(&va_p).unwrap() <= 1e-9);
    }

    #[test]
    fn zero_attention_layers_leave_vectors_untouched() {
        let mut rng = Xoshiro256StarStar::stream(43, 6);
        let widths = [2usize, 2, 2, 2, 2];
        let d_e: usize = widths.iter().sum();
        let tape = Tape::new();
        let s = tape.constant(gradcheck::random_tensor(&[3, d_e], 1.0, &mut rng));
        let v_in = gradcheck::random_tensor(&[3, 6], 1.0, &mut rng);
        let v = tape.constant(v_in.clone());
        let vars = EmbedVars {
            attn_layers: vec![],
            pool: random_pool(&tape, &widths, d_e, &mut rng),
        };
        let out = embed_graph(&tape, s, v, &widths, &vars, None).unwrap();
        assert_eq!(tape.value(out.v_a).data(), v_in.data());
    }

    #[test]
    fn embedding_gradients_pass_finite_differences() {
        let mut rng = Xoshiro256StarStar::seeded(87);
        let widths = [2usize, 3, 2, 2, 3];
        let d_e: usize = widths.iter().sum();
        let n = 3;
        let d_v = 2;
        let mut init = Xoshiro256StarStar::stream(87, 1);
        let mut inputs = vec![
            gradcheck::random_tensor(&[n, d_e], 0.8, &mut init),
            gradcheck::random_tensor(&[n, 3 * d_v], 0.8, &mut init),
        ];
        // One attention layer with two heads, then pool weights.
        let hd = 3 * d_v / 2;
        for _ in 0..2 {
            for _ in 0..3 {
                inputs.push(gradcheck::random_tensor(&[3 * d_v, hd], 0.5, &mut init));
            }
        }
        for &w in &widths {
            inputs.push(gradcheck::random_tensor(&[w, 1], 0.5, &mut init));
        }
        for &w in &widths {
            inputs.push(gradcheck::random_tensor(&[w, d_e], 0.5, &mut init));
        }
        let report = gradcheck::check_default(
            &inputs,
            |tape, vars| {
                let layer = VectorAttentionLayerVars {
                    heads: vec![
                        AttentionHeadVars {
                            w_q: vars[2],
                            w_k: vars[3],
                            w_v: vars[4],
                        },
                        AttentionHeadVars {
                            w_q: vars[5],
                            w_k: vars[6],
                            w_v: vars[7],
                        },
                    ],
                };
                let pool = ScalarPoolVars {
                    scores: vars[8..13].to_vec(),
                    projections: vars[13..18].to_vec(),
                };
                let vars_all = EmbedVars {
                    attn_layers: vec![layer],
                    pool,
                };
                let out = embed_graph(tape, vars[0], vars[1], &widths, &vars_all, None)?;
                let joined = tape.concat(Axis::Col, &[out.s_a, out.v_a])?;
                tape.sum(joined)
            },
            &mut rng,
        )
        .unwrap();
        assert!(report.within(1e-4), "embedding gradients off: {report:?}");
    }
}
