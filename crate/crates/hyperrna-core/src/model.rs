//! Model assembly: configuration, the named parameter registry, and the
//! forward pipeline (features → attention embedding → hypergraph encoder →
//! sequence decoder) run per structure on a fresh tape.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::attention::{
    self, AttentionHeadVars, EmbedVars, ScalarPoolVars, VectorAttentionLayerVars,
};
use crate::decoder::{self, DecoderError, DecoderVars, GvpLayerVars};
use crate::featurize::{FeatureConfig, FeatureError, GeometricGraph};
use crate::hypergraph::{self, ConvKind, EncoderLayerVars, HypergraphError};
use crate::mathf;
use crate::rng::Xoshiro256StarStar;
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Anything the pipeline can fail with, unified for callers that run the
/// whole stack.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Config(&'static str),
    Tensor(TensorError),
    Feature(FeatureError),
    Hypergraph(HypergraphError),
    Decoder(DecoderError),
    /// A checkpoint or registry lookup referenced an unknown parameter.
    UnknownParam(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Config(msg) => write!(f, "bad model config: {msg}"),
            ModelError::Tensor(e) => write!(f, "{e}"),
            ModelError::Feature(e) => write!(f, "{e}"),
            ModelError::Hypergraph(e) => write!(f, "{e}"),
            ModelError::Decoder(e) => write!(f, "{e}"),
            ModelError::UnknownParam(name) => write!(f, "unknown parameter {name}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        ModelError::Tensor(e)
    }
}
impl From<FeatureError> for ModelError {
    fn from(e: FeatureError) -> Self {
        ModelError::Feature(e)
    }
}
impl From<HypergraphError> for ModelError {
    fn from(e: HypergraphError) -> Self {
        ModelError::Hypergraph(e)
    }
}
impl From<DecoderError> for ModelError {
    fn from(e: DecoderError) -> Self {
        ModelError::Decoder(e)
    }
}

/// Full model hyperparameters. Scalar width `d_e` and vector width `d_v`
/// come from the featurization config so the two always agree.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub feature: FeatureConfig,
    /// Hidden vector channels inside each decoder layer.
    pub d_h: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Heads per vector-attention application.
    pub heads: usize,
    /// Stacked vector-attention applications (0 = vector identity).
    pub attn_layers: usize,
    pub dropout: f64,
    pub conv: ConvKind,
    /// Restrict attention to each node's stored neighbours (plus self).
    pub mask_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature: FeatureConfig::default(),
            d_h: 16,
            encoder_layers: 3,
            decoder_layers: 3,
            heads: 3,
            attn_layers: 1,
            dropout: 0.1,
            conv: ConvKind::RowNorm,
            mask_attention: false,
        }
    }
}

impl ModelConfig {
    pub fn d_e(&self) -> usize {
        self.feature.d_e()
    }

    pub fn d_v(&self) -> usize {
        self.feature.d_v
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.feature.validate().map_err(ModelError::Feature)?;
        if self.heads == 0 {
            return Err(ModelError::Config("heads must be >= 1"));
        }
        if (3 * self.d_v()) % self.heads != 0 {
            return Err(ModelError::Config(
                "flattened vector width must divide evenly across heads",
            ));
        }
        if self.d_h < self.d_v().max(1) {
            return Err(ModelError::Config("d_h must be >= d_v"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Ordered name → value parameter registry. The order is fixed by
/// construction, so optimizer state and checkpoints can address parameters
/// by index while humans address them by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

/// Uniform init in ±1/sqrt(fan_in) with fan_in = input rows.
fn init_weight(shape: &[usize], rng: &mut Xoshiro256StarStar) -> Tensor {
    let bound = 1.0 / mathf::sqrt(shape[0] as f64);
    let mut data = Vec::with_capacity(shape.iter().product());
    for _ in 0..shape.iter().product::<usize>() {
        data.push(rng.uniform(-bound, bound));
    }
    Tensor::from_vec(shape, data).expect("shape/data agree")
}

impl ModelParams {
    /// Seeded initialization: weights uniform ±1/sqrt(fan_in), biases zero.
    pub fn init(cfg: &ModelConfig, rng: &mut Xoshiro256StarStar) -> Result<Self, ModelError> {
        cfg.validate()?;
        let d_e = cfg.d_e();
        let d_v = cfg.d_v();
        let width = 3 * d_v;
        let head_width = width / cfg.heads;
        let mut entries: Vec<(String, Tensor)> = Vec::new();
        let mut push = |name: String, t: Tensor| entries.push((name, t));

        for l in 0..cfg.attn_layers {
            for h in 0..cfg.heads {
                for mat in ["w_q", "w_k", "w_v"] {
                    push(
                        format!("embed.attn{l}.head{h}.{mat}"),
                        init_weight(&[width, head_width], rng),
                    );
                }
            }
        }
        for (b, &w) in cfg.feature.block_widths().iter().enumerate() {
            push(format!("embed.pool.score{b}"), init_weight(&[w, 1], rng));
        }
        for (b, &w) in cfg.feature.block_widths().iter().enumerate() {
            push(format!("embed.pool.proj{b}"), init_weight(&[w, d_e], rng));
        }
        for l in 0..cfg.encoder_layers {
            push(format!("enc{l}.theta_s"), init_weight(&[d_e, d_e], rng));
            push(format!("enc{l}.theta_v"), init_weight(&[d_v, d_v], rng));
        }
        for l in 0..cfg.decoder_layers {
            push(format!("dec{l}.w_h"), init_weight(&[d_v, cfg.d_h], rng));
            push(format!("dec{l}.w_mu"), init_weight(&[cfg.d_h, d_v], rng));
            push(
                format!("dec{l}.w_m"),
                init_weight(&[d_e + cfg.d_h, d_e], rng),
            );
            push(format!("dec{l}.bias"), Tensor::zeros(&[1, d_e]));
        }
        push(String::from("dec.nbr"), init_weight(&[d_e, d_e], rng));
        push(String::from("dec.embed"), init_weight(&[5, d_e], rng));
        push(String::from("dec.readout"), init_weight(&[d_e, 4], rng));
        push(String::from("dec.readout_bias"), Tensor::zeros(&[1, 4]));
        Ok(ModelParams { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    /// Overwrite one parameter; shape must match the existing entry.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), ModelError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| ModelError::UnknownParam(String::from(name)))?;
        if entry.1.shape() != value.shape() {
            return Err(ModelError::Tensor(TensorError::ShapeMismatch {
                op: "param set",
                lhs: entry.1.shape().to_vec(),
                rhs: value.shape().to_vec(),
            }));
        }
        entry.1 = value;
        Ok(())
    }

    /// Replace every value, in registry order (optimizer write-back).
    pub fn assign_all(&mut self, values: &[Tensor]) -> Result<(), ModelError> {
        if values.len() != self.entries.len() {
            return Err(ModelError::Config("value count mismatch in assign_all"));
        }
        for ((_, slot), v) in self.entries.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(ModelError::Tensor(TensorError::ShapeMismatch {
                    op: "param assign",
                    lhs: slot.shape().to_vec(),
                    rhs: v.shape().to_vec(),
                }));
            }
            *slot = v.clone();
        }
        Ok(())
    }

    /// Rebuild from (name, value) pairs, validating against a freshly
    /// initialized registry for the config: same names, same order, same
    /// shapes. Used by checkpoint loading.
    pub fn from_entries(
        cfg: &ModelConfig,
        entries: Vec<(String, Tensor)>,
    ) -> Result<Self, ModelError> {
        let mut reference = ModelParams::init(cfg, &mut Xoshiro256StarStar::seeded(0))?;
        if entries.len() != reference.entries.len() {
            return Err(ModelError::Config("checkpoint parameter count mismatch"));
        }
        for ((name, value), (ref_name, ref_value)) in entries.iter().zip(&reference.entries) {
            if name != ref_name {
                return Err(ModelError::UnknownParam(name.clone()));
            }
            if value.shape() != ref_value.shape() {
                return Err(ModelError::Tensor(TensorError::ShapeMismatch {
                    op: "checkpoint load",
                    lhs: ref_value.shape().to_vec(),
                    rhs: value.shape().to_vec(),
                }));
            }
        }
        reference.entries = entries;
        Ok(reference)
    }

    /// Bind every parameter onto a tape as a trainable leaf and assemble the
    /// per-module weight views.
    pub fn bind(&self, cfg: &ModelConfig, tape: &Tape) -> Result<BoundModel, ModelError> {
        let mut vars = Vec::with_capacity(self.entries.len());
        for (_, value) in &self.entries {
            vars.push(tape.param(value.clone()));
        }
        let mut cursor = 0usize;
        let mut take = |n: usize| -> Result<&[Var], ModelError> {
            if cursor + n > vars.len() {
                return Err(ModelError::Config("registry too short for config"));
            }
            let slice = &vars[cursor..cursor + n];
            cursor += n;
            Ok(slice)
        };

        let mut attn_layers = Vec::with_capacity(cfg.attn_layers);
        for _ in 0..cfg.attn_layers {
            let mut heads = Vec::with_capacity(cfg.heads);
            for _ in 0..cfg.heads {
                let qkv = take(3)?;
                heads.push(AttentionHeadVars {
                    w_q: qkv[0],
                    w_k: qkv[1],
                    w_v: qkv[2],
                });
            }
            attn_layers.push(VectorAttentionLayerVars { heads });
        }
        let scores = take(5)?.to_vec();
        let projections = take(5)?.to_vec();
        let mut encoder = Vec::with_capacity(cfg.encoder_layers);
        for _ in 0..cfg.encoder_layers {
            let pair = take(2)?;
            encoder.push(EncoderLayerVars {
                theta_s: pair[0],
                theta_v: pair[1],
            });
        }
        let mut dec_layers = Vec::with_capacity(cfg.decoder_layers);
        for _ in 0..cfg.decoder_layers {
            let quad = take(4)?;
            dec_layers.push(GvpLayerVars {
                w_h: quad[0],
                w_mu: quad[1],
                w_m: quad[2],
                bias: quad[3],
            });
        }
        let tail = take(4)?;
        let decoder = DecoderVars {
            layers: dec_layers,
            nbr: tail[0],
            embed: tail[1],
            readout: tail[2],
            readout_bias: tail[3],
        };
        if cursor != vars.len() {
            return Err(ModelError::Config("registry longer than config expects"));
        }
        Ok(BoundModel {
            vars,
            embed: EmbedVars {
                attn_layers,
                pool: ScalarPoolVars {
                    scores,
                    projections,
                },
            },
            encoder,
            decoder,
        })
    }
}

/// All weights bound on one tape: the flat list (registry order, for the
/// optimizer) plus structured views per module.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub vars: Vec<Var>,
    pub embed: EmbedVars,
    pub encoder: Vec<EncoderLayerVars>,
    pub decoder: DecoderVars,
}

/// Per-node context the decoder consumes, plus the pooling weights for
/// inspection.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    pub s_ctx: Var,
    pub v_ctx: Var,
    pub gamma: Var,
}

/// Features → attention embedding → hypergraph encoder. The decoder is run
/// separately by the teacher-forcing / sampling entry points below.
pub fn model_forward(
    tape: &Tape,
    graph: &GeometricGraph,
    cfg: &ModelConfig,
    bound: &BoundModel,
    train: bool,
    rng: &mut Xoshiro256StarStar,
) -> Result<ForwardOutput, ModelError> {
    let s0 = tape.constant(graph.scalar.clone());
    let v0 = tape.constant(graph.vector.clone());
    let mask = if cfg.mask_attention {
        Some(attention::knn_attention_mask(&graph.adjacency))
    } else {
        None
    };
    let embedded = attention::embed_graph(
        tape,
        s0,
        v0,
        &cfg.feature.block_widths(),
        &bound.embed,
        mask.as_ref(),
    )?;
    let hg = hypergraph::build_hypergraph(&graph.adjacency, None)?;
    let prop = hypergraph::propagation_matrix(&hg, cfg.conv)?;
    let encoded = hypergraph::encoder_forward(
        tape,
        embedded.s_a,
        embedded.v_a,
        cfg.d_v(),
        &prop,
        &bound.encoder,
        cfg.dropout,
        train,
        rng,
    )?;
    Ok(ForwardOutput {
        s_ctx: encoded.s_p,
        v_ctx: encoded.v_p,
        gamma: embedded.gamma,
    })
}

/// Full teacher-forced pass: `[rna_len, 4]` logits for the true sequence.
pub fn forward_teacher_logits(
    tape: &Tape,
    graph: &GeometricGraph,
    sequence: &[usize],
    cfg: &ModelConfig,
    bound: &BoundModel,
    train: bool,
    rng: &mut Xoshiro256StarStar,
) -> Result<Var, ModelError> {
    let ctx = model_forward(tape, graph, cfg, bound, train, rng)?;
    let prop = tape.constant(decoder::neighbor_mean_matrix(&graph.adjacency));
    Ok(decoder::teacher_forced_logits(
        tape,
        ctx.s_ctx,
        ctx.v_ctx,
        prop,
        cfg.d_v(),
        cfg.d_h,
        graph.rna_len,
        sequence,
        &bound.decoder,
    )?)
}

/// Full sampling pass (no dropout): nucleotide indices 5'→3'.
pub fn forward_sample(
    tape: &Tape,
    graph: &GeometricGraph,
    cfg: &ModelConfig,
    bound: &BoundModel,
    temperature: f64,
    rng: &mut Xoshiro256StarStar,
) -> Result<Vec<usize>, ModelError> {
    let mut no_dropout = Xoshiro256StarStar::seeded(0);
    let ctx = model_forward(tape, graph, cfg, bound, false, &mut no_dropout)?;
    let prop = tape.constant(decoder::neighbor_mean_matrix(&graph.adjacency));
    Ok(decoder::autoregressive_sample(
        tape,
        ctx.s_ctx,
        ctx.v_ctx,
        prop,
        cfg.d_v(),
        cfg.d_h,
        graph.rna_len,
        &bound.decoder,
        temperature,
        rng,
    )?)
}
