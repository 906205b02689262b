//! Line-oriented text formats shared by the CLI commands: coarse
//! backbones, cached geometric graphs, model checkpoints, flat key=value
//! configs, dataset split files and run manifests.
//!
//! Every writer is deterministic (fixed field order, fixed float
//! formatting), so reruns over identical inputs produce byte-identical
//! artifacts. Feature floats are rounded to 6 decimal places; checkpoint
//! parameters and optimizer moments use shortest round-trip formatting and
//! reload bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use hyperrna_core::backbone::{BackboneError, ChainKind, CoarseBackbone};
use hyperrna_core::cluster::DatasetSplit;
use hyperrna_core::featurize::{FeatureConfig, GeometricGraph};
use hyperrna_core::geom::Vec3;
use hyperrna_core::hypergraph::ConvKind;
use hyperrna_core::model::{ModelConfig, ModelError, ModelParams};
use hyperrna_core::tensor::{AdamConfig, AdamState};
use hyperrna_core::{Tensor, TensorError};
use thiserror::Error;

use crate::trainer::TrainSettings;

/// Bumped when any on-disk format changes shape.
pub const ARTIFACT_VERSION: u32 = 1;

const CHECKPOINT_MAGIC: &str = "HYPERRNA-CKPT v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

/// Write via a temporary sibling then rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn parse_num<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, FormatError> {
    field
        .parse()
        .map_err(|_| bad(format!("cannot parse {what} from '{field}'")))
}

fn float_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        // Normalize negative zero so formatting is a pure function of value.
        let v = if *v == 0.0 { 0.0 } else { *v };
        let _ = write!(line, "{v:.6}");
    }
    line
}

fn parse_float_row(line: &str, want: usize, what: &str) -> Result<Vec<f64>, FormatError> {
    let values: Result<Vec<f64>, _> = line
        .split_whitespace()
        .map(|f| parse_num::<f64>(f, what))
        .collect();
    let values = values?;
    if values.len() != want {
        return Err(bad(format!(
            "{what}: expected {want} fields, got {}",
            values.len()
        )));
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// Coarse backbones
// ---------------------------------------------------------------------------

/// `#chain <id> <kind> <L>` header, then one residue per line:
/// `<residue_id> <letter> <9 coordinates>` in slot order.
pub fn write_backbones(chains: &[(String, &CoarseBackbone)]) -> String {
    let mut out = String::new();
    for (id, bb) in chains {
        let _ = writeln!(out, "#chain {id} {} {}", bb.kind().as_str(), bb.len());
        let letters: Vec<char> = bb.sequence().chars().collect();
        for i in 0..bb.len() {
            let mut coords = Vec::with_capacity(9);
            for slot in 0..3 {
                let p = bb.bead(i, slot);
                coords.extend([p.x(), p.y(), p.z()]);
            }
            let _ = writeln!(
                out,
                "{} {} {}",
                bb.residue_ids()[i],
                letters[i],
                float_row(&coords)
            );
        }
    }
    out
}

pub fn parse_backbones(text: &str) -> Result<Vec<(String, CoarseBackbone)>, FormatError> {
    let mut lines = text.lines().peekable();
    let mut chains = Vec::new();
    while let Some(header) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "#chain" {
            return Err(bad(format!("expected '#chain <id> <kind> <L>', got '{header}'")));
        }
        let id = fields[1].to_string();
        let kind = match fields[2] {
            "rna" => ChainKind::Rna,
            "protein" => ChainKind::Protein,
            other => return Err(bad(format!("unknown chain kind '{other}'"))),
        };
        let len: usize = parse_num(fields[3], "chain length")?;
        let mut atoms = Vec::with_capacity(len);
        let mut sequence = String::with_capacity(len);
        let mut ids = Vec::with_capacity(len);
        for _ in 0..len {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("chain '{id}': unexpected end of file")))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 11 {
                return Err(bad(format!(
                    "chain '{id}': expected 11 fields per residue line, got {}",
                    fields.len()
                )));
            }
            ids.push(parse_num::<i64>(fields[0], "residue id")?);
            let letter = fields[1];
            if letter.chars().count() != 1 {
                return Err(bad(format!("chain '{id}': bad letter '{letter}'")));
            }
            sequence.push(letter.chars().next().unwrap());
            let mut c = [0.0f64; 9];
            for (slot, field) in fields[2..].iter().enumerate() {
                c[slot] = parse_num(field, "coordinate")?;
            }
            atoms.push([
                Vec3::new(c[0], c[1], c[2]),
                Vec3::new(c[3], c[4], c[5]),
                Vec3::new(c[6], c[7], c[8]),
            ]);
        }
        chains.push((id, CoarseBackbone::new(kind, atoms, sequence, ids)?));
    }
    Ok(chains)
}

// ---------------------------------------------------------------------------
// Geometric graph cache
// ---------------------------------------------------------------------------

/// Sectioned cache: `#nodes` (per-node kind/letter/id), `#adjacency`,
/// `#scalar`, `#vector`, and `#edges` (distance expansion then unit
/// displacement per edge row).
pub fn write_graph(graph: &GeometricGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#nodes {} {} {} {}",
        graph.n, graph.k, graph.d_v, graph.rna_len
    );
    let letters: Vec<char> = graph.sequence.chars().collect();
    for i in 0..graph.n {
        let kind = match graph.node_kind[i] {
            ChainKind::Rna => 'R',
            ChainKind::Protein => 'P',
        };
        let _ = writeln!(out, "{kind} {} {}", letters[i], graph.residue_ids[i]);
    }
    let _ = writeln!(out, "#adjacency");
    for nbrs in &graph.adjacency {
        let joined: Vec<String> = nbrs.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(out, "{}", joined.join(" "));
    }
    let d_e = graph.scalar.shape()[1];
    let _ = writeln!(out, "#scalar {} {}", graph.n, d_e);
    for i in 0..graph.n {
        let _ = writeln!(out, "{}", float_row(graph.scalar.row(i)));
    }
    let _ = writeln!(out, "#vector {} {}", graph.n, 3 * graph.d_v);
    for i in 0..graph.n {
        let _ = writeln!(out, "{}", float_row(graph.vector.row(i)));
    }
    let bins = graph.edge_scalar.shape()[1];
    let _ = writeln!(out, "#edges {} {} 3", graph.n * graph.k, bins);
    for r in 0..graph.n * graph.k {
        let mut row = graph.edge_scalar.row(r).to_vec();
        row.extend_from_slice(graph.edge_vector.row(r));
        let _ = writeln!(out, "{}", float_row(&row));
    }
    out
}

fn expect_header<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    tag: &str,
) -> Result<Vec<String>, FormatError> {
    let line = lines
        .next()
        .ok_or_else(|| bad(format!("missing '{tag}' section")))?;
    let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
    if fields.first().map(String::as_str) != Some(tag) {
        return Err(bad(format!("expected '{tag}' section, got '{line}'")));
    }
    Ok(fields)
}

pub fn parse_graph(text: &str) -> Result<GeometricGraph, FormatError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let head = expect_header(&mut lines, "#nodes")?;
    if head.len() != 5 {
        return Err(bad("'#nodes' header needs n, k, d_v and rna_len"));
    }
    let n: usize = parse_num(&head[1], "node count")?;
    let k: usize = parse_num(&head[2], "neighbour count")?;
    let d_v: usize = parse_num(&head[3], "vector width")?;
    let rna_len: usize = parse_num(&head[4], "nucleic length")?;

    let mut node_kind = Vec::with_capacity(n);
    let mut sequence = String::with_capacity(n);
    let mut residue_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated node list"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(format!("bad node line '{line}'")));
        }
        node_kind.push(match fields[0] {
            "R" => ChainKind::Rna,
            "P" => ChainKind::Protein,
            other => return Err(bad(format!("unknown node kind '{other}'"))),
        });
        sequence.push_str(fields[1]);
        residue_ids.push(parse_num::<i64>(fields[2], "residue id")?);
    }

    expect_header(&mut lines, "#adjacency")?;
    let mut adjacency = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated adjacency"))?;
        let nbrs: Result<Vec<usize>, _> = line
            .split_whitespace()
            .map(|f| parse_num::<usize>(f, "neighbour index"))
            .collect();
        let nbrs = nbrs?;
        if nbrs.len() != k {
            return Err(bad(format!(
                "adjacency row has {} neighbours, expected {k}",
                nbrs.len()
            )));
        }
        if nbrs.iter().any(|&j| j >= n) {
            return Err(bad("neighbour index out of range"));
        }
        adjacency.push(nbrs);
    }

    let head = expect_header(&mut lines, "#scalar")?;
    let d_e: usize = parse_num(&head[2], "scalar width")?;
    let mut scalar_data = Vec::with_capacity(n * d_e);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated scalar block"))?;
        scalar_data.extend(parse_float_row(line, d_e, "scalar feature")?);
    }

    let head = expect_header(&mut lines, "#vector")?;
    let vec_width: usize = parse_num(&head[2], "vector width")?;
    if vec_width != 3 * d_v {
        return Err(bad(format!(
            "vector width {vec_width} disagrees with 3*d_v = {}",
            3 * d_v
        )));
    }
    let mut vector_data = Vec::with_capacity(n * vec_width);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated vector block"))?;
        vector_data.extend(parse_float_row(line, vec_width, "vector feature")?);
    }

    let head = expect_header(&mut lines, "#edges")?;
    if head.len() != 4 {
        return Err(bad("'#edges' header needs rows, bins and 3"));
    }
    let rows: usize = parse_num(&head[1], "edge rows")?;
    let bins: usize = parse_num(&head[2], "edge bins")?;
    if rows != n * k {
        return Err(bad(format!("edge rows {rows} disagree with n*k = {}", n * k)));
    }
    let mut edge_scalar_data = Vec::with_capacity(rows * bins);
    let mut edge_vector_data = Vec::with_capacity(rows * 3);
    for _ in 0..rows {
        let line = lines.next().ok_or_else(|| bad("truncated edge block"))?;
        let all = parse_float_row(line, bins + 3, "edge feature")?;
        edge_scalar_data.extend_from_slice(&all[..bins]);
        edge_vector_data.extend_from_slice(&all[bins..]);
    }

    Ok(GeometricGraph {
        n,
        k,
        d_v,
        adjacency,
        scalar: Tensor::from_vec(&[n, d_e], scalar_data)?,
        vector: Tensor::from_vec(&[n, 3 * d_v], vector_data)?,
        edge_scalar: Tensor::from_vec(&[n * k, bins], edge_scalar_data)?,
        edge_vector: Tensor::from_vec(&[n * k, 3], edge_vector_data)?,
        node_kind,
        sequence,
        residue_ids,
        rna_len,
    })
}

// ---------------------------------------------------------------------------
// Flat key=value configuration
// ---------------------------------------------------------------------------

fn model_config_pairs(cfg: &ModelConfig) -> Vec<(&'static str, String)> {
    vec![
        ("k", cfg.feature.k.to_string()),
        ("rbf_bins", cfg.feature.rbf_bins.to_string()),
        ("token_width", cfg.feature.token_width.to_string()),
        ("d_v", cfg.feature.d_v.to_string()),
        ("edge_rbf_bins", cfg.feature.edge_rbf_bins.to_string()),
        ("d_min", format!("{}", cfg.feature.d_min)),
        ("d_max", format!("{}", cfg.feature.d_max)),
        ("d_h", cfg.d_h.to_string()),
        ("encoder_layers", cfg.encoder_layers.to_string()),
        ("decoder_layers", cfg.decoder_layers.to_string()),
        ("heads", cfg.heads.to_string()),
        ("attn_layers", cfg.attn_layers.to_string()),
        ("dropout", format!("{}", cfg.dropout)),
        ("conv", cfg.conv.as_str().to_string()),
        ("mask_attention", cfg.mask_attention.to_string()),
    ]
}

/// Returns true when the key belongs to the model config.
fn apply_model_key(cfg: &mut ModelConfig, key: &str, value: &str) -> Result<bool, FormatError> {
    match key {
        "k" => cfg.feature.k = parse_num(value, key)?,
        "rbf_bins" => cfg.feature.rbf_bins = parse_num(value, key)?,
        "token_width" => cfg.feature.token_width = parse_num(value, key)?,
        "d_v" => cfg.feature.d_v = parse_num(value, key)?,
        "edge_rbf_bins" => cfg.feature.edge_rbf_bins = parse_num(value, key)?,
        "d_min" => cfg.feature.d_min = parse_num(value, key)?,
        "d_max" => cfg.feature.d_max = parse_num(value, key)?,
        "d_h" => cfg.d_h = parse_num(value, key)?,
        "encoder_layers" => cfg.encoder_layers = parse_num(value, key)?,
        "decoder_layers" => cfg.decoder_layers = parse_num(value, key)?,
        "heads" => cfg.heads = parse_num(value, key)?,
        "attn_layers" => cfg.attn_layers = parse_num(value, key)?,
        "dropout" => cfg.dropout = parse_num(value, key)?,
        "conv" => {
            cfg.conv = ConvKind::parse(value)
                .ok_or_else(|| bad(format!("unknown conv kind '{value}'")))?
        }
        "mask_attention" => {
            cfg.mask_attention = value
                .parse()
                .map_err(|_| bad(format!("cannot parse mask_attention from '{value}'")))?
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn key_value_lines(text: &str) -> impl Iterator<Item = Result<(&str, &str), FormatError>> {
    text.lines().filter_map(|line| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        Some(
            line.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(format!("expected key=value, got '{line}'"))),
        )
    })
}

/// Full training configuration as a flat key=value file.
pub fn write_train_config(settings: &TrainSettings) -> String {
    let mut out = String::new();
    for (k, v) in model_config_pairs(&settings.model) {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "epochs={}", settings.epochs);
    let _ = writeln!(out, "lr={}", settings.lr);
    let _ = writeln!(out, "lambda_str={}", settings.lambda_str);
    let _ = writeln!(out, "batch={}", settings.batch);
    let _ = writeln!(out, "mean_seq_loss={}", settings.mean_seq_loss);
    out
}

pub fn parse_train_config(text: &str) -> Result<TrainSettings, FormatError> {
    let mut settings = TrainSettings::default();
    for pair in key_value_lines(text) {
        let (key, value) = pair?;
        if apply_model_key(&mut settings.model, key, value)? {
            continue;
        }
        match key {
            "epochs" => settings.epochs = parse_num(value, key)?,
            "lr" => settings.lr = parse_num(value, key)?,
            "lambda_str" => settings.lambda_str = parse_num(value, key)?,
            "batch" => settings.batch = parse_num(value, key)?,
            "mean_seq_loss" => {
                settings.mean_seq_loss = value
                    .parse()
                    .map_err(|_| bad(format!("cannot parse mean_seq_loss from '{value}'")))?
            }
            _ => return Err(bad(format!("unknown config key '{key}'"))),
        }
    }
    Ok(settings)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

fn full_precision_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{v}");
    }
    line
}

/// `HYPERRNA-CKPT v1`: config section, named parameters with shapes, and
/// optionally the optimizer state (step count plus per-parameter moments in
/// parameter order).
pub fn render_checkpoint(
    cfg: &ModelConfig,
    params: &ModelParams,
    adam: Option<&AdamState>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "#config");
    for (k, v) in model_config_pairs(cfg) {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "#params {}", params.len());
    for (name, tensor) in params.entries() {
        let dims: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{name} {} {}", tensor.shape().len(), dims.join(" "));
        let _ = writeln!(out, "{}", full_precision_row(tensor.data()));
    }
    if let Some(state) = adam {
        let c = &state.config;
        let _ = writeln!(
            out,
            "#adam {} {} {} {} {}",
            state.t, c.lr, c.beta1, c.beta2, c.eps
        );
        let (m, v) = state.moments();
        for tensor in m.iter().chain(v) {
            let _ = writeln!(out, "{}", full_precision_row(tensor.data()));
        }
    }
    out
}

pub fn parse_checkpoint(
    text: &str,
) -> Result<(ModelConfig, ModelParams, Option<AdamState>), FormatError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == CHECKPOINT_MAGIC => {}
        other => {
            return Err(bad(format!(
                "bad checkpoint header: expected '{CHECKPOINT_MAGIC}', got '{}'",
                other.unwrap_or("")
            )))
        }
    }
    match lines.next() {
        Some(l) if l.trim() == "#config" => {}
        _ => return Err(bad("checkpoint missing '#config' section")),
    }
    let mut cfg = ModelConfig::default();
    let mut params_header: Option<usize> = None;
    for line in lines.by_ref() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("#params ") {
            params_header = Some(parse_num(rest.trim(), "parameter count")?);
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got '{line}'")))?;
        if !apply_model_key(&mut cfg, key.trim(), value.trim())? {
            return Err(bad(format!("unknown checkpoint config key '{key}'")));
        }
    }
    let count = params_header.ok_or_else(|| bad("checkpoint missing '#params' section"))?;

    let mut entries: Vec<(String, Tensor)> = Vec::with_capacity(count);
    for _ in 0..count {
        let head = lines
            .next()
            .ok_or_else(|| bad("truncated parameter list"))?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(bad(format!("bad parameter header '{head}'")));
        }
        let name = fields[0].to_string();
        let ndim: usize = parse_num(fields[1], "shape rank")?;
        if fields.len() != 2 + ndim {
            return Err(bad(format!("parameter '{name}': shape fields disagree")));
        }
        let shape: Result<Vec<usize>, _> = fields[2..]
            .iter()
            .map(|f| parse_num::<usize>(f, "dimension"))
            .collect();
        let shape = shape?;
        let want: usize = shape.iter().product();
        let row = lines
            .next()
            .ok_or_else(|| bad(format!("parameter '{name}': missing values")))?;
        let values: Result<Vec<f64>, _> = row
            .split_whitespace()
            .map(|f| parse_num::<f64>(f, "parameter value"))
            .collect();
        let values = values?;
        if values.len() != want {
            return Err(bad(format!(
                "parameter '{name}': {} values for shape {:?}",
                values.len(),
                shape
            )));
        }
        entries.push((name, Tensor::from_vec(&shape, values)?));
    }
    let params = ModelParams::from_entries(&cfg, entries)?;

    let adam = match lines.next() {
        None => None,
        Some(line) => {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 || fields[0] != "#adam" {
                return Err(bad(format!("bad '#adam' header '{line}'")));
            }
            let t: u64 = parse_num(fields[1], "step count")?;
            let config = AdamConfig {
                lr: parse_num(fields[2], "lr")?,
                beta1: parse_num(fields[3], "beta1")?,
                beta2: parse_num(fields[4], "beta2")?,
                eps: parse_num(fields[5], "eps")?,
            };
            let mut moments = Vec::with_capacity(2 * count);
            for (name, tensor) in params.entries().iter().cycle().take(2 * count) {
                let row = lines
                    .next()
                    .ok_or_else(|| bad(format!("moment for '{name}': missing values")))?;
                let want: usize = tensor.shape().iter().product();
                let values: Result<Vec<f64>, _> = row
                    .split_whitespace()
                    .map(|f| parse_num::<f64>(f, "moment value"))
                    .collect();
                let values = values?;
                if values.len() != want {
                    return Err(bad(format!("moment for '{name}': wrong length")));
                }
                moments.push(Tensor::from_vec(tensor.shape(), values)?);
            }
            let v = moments.split_off(count);
            Some(AdamState::from_parts(config, t, moments, v)?)
        }
    };
    Ok((cfg, params, adam))
}

pub fn save_checkpoint(
    path: &Path,
    cfg: &ModelConfig,
    params: &ModelParams,
    adam: Option<&AdamState>,
) -> Result<(), FormatError> {
    write_atomic(path, &render_checkpoint(cfg, params, adam))?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(ModelConfig, ModelParams, Option<AdamState>), FormatError> {
    parse_checkpoint(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Dataset split file
// ---------------------------------------------------------------------------

/// One `<id> <cluster> <train|val|test>` line per structure, input order.
pub fn write_split(ids: &[String], split: &DatasetSplit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# id cluster split");
    for (i, id) in ids.iter().enumerate() {
        let bucket = match split.bucket_of(i) {
            Some(0) => "train",
            Some(1) => "val",
            Some(2) => "test",
            _ => "train",
        };
        let _ = writeln!(out, "{id} {} {bucket}", split.cluster_of[i]);
    }
    out
}

/// Parsed split rows: `(id, cluster, bucket)` with bucket 0/1/2.
pub fn parse_split(text: &str) -> Result<Vec<(String, usize, usize)>, FormatError> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(format!("bad split line '{line}'")));
        }
        let bucket = match fields[2] {
            "train" => 0,
            "val" => 1,
            "test" => 2,
            other => return Err(bad(format!("unknown split bucket '{other}'"))),
        };
        rows.push((
            fields[0].to_string(),
            parse_num::<usize>(fields[1], "cluster index")?,
            bucket,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Provenance record written atomically next to every command's outputs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<String>,
    /// Flat config snapshot, written as `config.<key>=<value>`.
    pub config: Vec<(String, String)>,
    pub started_epoch_seconds: u64,
    pub finished_epoch_seconds: u64,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "version={ARTIFACT_VERSION}");
        let _ = writeln!(out, "seed={}", self.seed);
        for input in &self.inputs {
            let _ = writeln!(out, "input={input}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        let _ = writeln!(out, "started={}", self.started_epoch_seconds);
        let _ = writeln!(out, "finished={}", self.finished_epoch_seconds);
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        write_atomic(&dir.join("manifest.txt"), &self.render())
    }
}

/// Snapshot of a model config for manifests.
pub fn config_snapshot(cfg: &ModelConfig) -> Vec<(String, String)> {
    model_config_pairs(cfg)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Default feature configuration with CLI overrides applied.
pub fn feature_config_with(knn: Option<usize>, rbf_bins: Option<usize>) -> FeatureConfig {
    let mut f = FeatureConfig::default();
    if let Some(k) = knn {
        f.k = k;
    }
    if let Some(b) = rbf_bins {
        f.rbf_bins = b;
    }
    f
}
