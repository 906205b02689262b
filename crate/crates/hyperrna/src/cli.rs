//! The `hyperrna` binary: preprocess, split, train, sample and eval
//! subcommands.
//!
//! Exit codes: 0 success (per-item failures may be logged), 1 usage error,
//! 2 data error, 3 internal error. All randomness derives from the single
//! `--seed` flag; every command writes a run manifest next to its outputs
//! after the outputs are complete.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use hyperrna_core::backbone::{ChainKind, CoarseBackbone, NUCLEOTIDES};
use hyperrna_core::cluster;
use hyperrna_core::featurize::build_features;
use hyperrna_core::metrics;
use hyperrna_core::model::{self, ModelConfig, ModelParams};
use hyperrna_core::rng::Xoshiro256StarStar;
use hyperrna_core::Tape;

use crate::fasta::{self, Alphabet};
use crate::formats::{self, RunManifest};
use crate::pdb;
use crate::trainer::{self, TrainError, TrainExample};

#[derive(Parser)]
#[command(
    name = "hyperrna",
    about = "Sequence design on coarse-grained nucleic-acid backbones",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse PDB files and cache geometric graphs plus coarse backbones.
    Preprocess {
        /// Directory of fixed-column PDB files.
        #[arg(long)]
        pdb_dir: PathBuf,
        /// Output directory for `.graph` and `.backbone` files.
        #[arg(long)]
        out_dir: PathBuf,
        /// Neighbours per node.
        #[arg(long)]
        knn: Option<usize>,
        /// Bins per node-level distance expansion.
        #[arg(long)]
        rbf_bins: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cluster sequences by identity and assign whole clusters to splits.
    Split {
        /// FASTA of all chains.
        #[arg(long)]
        fasta: PathBuf,
        /// Output split file.
        #[arg(long)]
        out: PathBuf,
        /// Identity threshold for clustering.
        #[arg(long, default_value_t = cluster::DEFAULT_IDENTITY_THRESHOLD)]
        threshold: f64,
        /// train:val:test proportions.
        #[arg(long, default_value = "8:1:1")]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the epoch loop and keep the best-validation checkpoint.
    Train {
        /// Directory of cached `.graph` files.
        #[arg(long)]
        graphs: PathBuf,
        /// Split file from the split command.
        #[arg(long)]
        split: PathBuf,
        /// Flat key=value configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoint.txt and log.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Average the sequence loss over positions instead of summing.
        #[arg(long)]
        mean_seq_loss: bool,
        /// Directory of predicted-coordinate `.backbone` files; enables the
        /// constant structure term.
        #[arg(long)]
        pred_coords: Option<PathBuf>,
    },
    /// Draw sequences for one cached graph from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One cached `.graph` file.
        #[arg(long)]
        graph: PathBuf,
        /// Output FASTA path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 8)]
        num_seqs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score predictions against ground truth into a metrics CSV.
    Eval {
        #[arg(long)]
        pred_fasta: PathBuf,
        #[arg(long)]
        true_fasta: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Directory of predicted-coordinate `.backbone` files (with
        /// --true-coords, fills the rmsd and lddt columns).
        #[arg(long)]
        pred_coords: Option<PathBuf>,
        /// Directory of ground-truth `.backbone` files.
        #[arg(long)]
        true_coords: Option<PathBuf>,
        /// Checkpoint for the perplexity column (with --graphs).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory of cached `.graph` files for the perplexity column.
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Failure classified by exit code.
enum CliError {
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        match e {
            formats::FormatError::Tensor(t) => CliError::Internal(t.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Internal(e.to_string()),
            TrainError::Model(m) => CliError::Internal(m.to_string()),
            TrainError::Loss(l) => CliError::Internal(l.to_string()),
            TrainError::Tensor(t) => CliError::Internal(t.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn epoch_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string())
}

/// Manifest path: `manifest.txt` inside a directory output, or a
/// `.manifest` sibling of a file output.
fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.txt")
    } else {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".to_string());
        out.with_file_name(format!("{name}.manifest"))
    }
}

/// Entry point used by `main`; parses real process arguments.
pub fn main_entry() -> i32 {
    run(std::env::args_os())
}

/// Parse and execute; returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Both help/version display and genuine usage errors land here;
            // only the latter are failures.
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { 0 } else { 1 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Preprocess {
            pdb_dir,
            out_dir,
            knn,
            rbf_bins,
            seed,
        } => cmd_preprocess(&pdb_dir, &out_dir, knn, rbf_bins, seed),
        Command::Split {
            fasta,
            out,
            threshold,
            ratios,
            seed,
        } => cmd_split(&fasta, &out, threshold, &ratios, seed),
        Command::Train {
            graphs,
            split,
            config,
            out,
            seed,
            epochs,
            mean_seq_loss,
            pred_coords,
        } => cmd_train(
            &graphs,
            &split,
            &config,
            &out,
            seed,
            epochs,
            mean_seq_loss,
            pred_coords.as_deref(),
        ),
        Command::Sample {
            checkpoint,
            graph,
            out,
            temperature,
            num_seqs,
            seed,
        } => cmd_sample(&checkpoint, &graph, &out, temperature, num_seqs, seed),
        Command::Eval {
            pred_fasta,
            true_fasta,
            out,
            pred_coords,
            true_coords,
            checkpoint,
            graphs,
            seed,
        } => cmd_eval(EvalArgs {
            pred_fasta,
            true_fasta,
            out,
            pred_coords,
            true_coords,
            checkpoint,
            graphs,
            seed,
        }),
    }
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

fn cmd_preprocess(
    pdb_dir: &Path,
    out_dir: &Path,
    knn: Option<usize>,
    rbf_bins: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    let started = epoch_seconds();
    let feature = formats::feature_config_with(knn, rbf_bins);
    let mut entries: Vec<PathBuf> = fs::read_dir(pdb_dir)
        .map_err(|e| data_err(format!("{}: {e}", pdb_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pdb") | Some("ent")
            )
        })
        .collect();
    entries.sort();
    fs::create_dir_all(out_dir)?;

    let mut succeeded = 0usize;
    for path in &entries {
        let stem = file_stem(path);
        match preprocess_one(path, &feature) {
            Ok((graph_text, backbone_text, warnings)) => {
                for w in warnings {
                    eprintln!("{stem}: {w}");
                }
                formats::write_atomic(&out_dir.join(format!("{stem}.graph")), &graph_text)?;
                formats::write_atomic(&out_dir.join(format!("{stem}.backbone")), &backbone_text)?;
                succeeded += 1;
            }
            Err(e) => {
                eprintln!("{stem}: skipped: {}", e.message());
            }
        }
    }
    if succeeded == 0 {
        return Err(data_err(format!(
            "no structure in {} could be processed",
            pdb_dir.display()
        )));
    }
    let mut config = vec![
        ("k".to_string(), feature.k.to_string()),
        ("rbf_bins".to_string(), feature.rbf_bins.to_string()),
        ("token_width".to_string(), feature.token_width.to_string()),
        ("d_v".to_string(), feature.d_v.to_string()),
        (
            "edge_rbf_bins".to_string(),
            feature.edge_rbf_bins.to_string(),
        ),
    ];
    config.push(("structures".to_string(), succeeded.to_string()));
    RunManifest {
        command: "preprocess".to_string(),
        seed,
        inputs: vec![pdb_dir.display().to_string()],
        config,
        started_epoch_seconds: started,
        finished_epoch_seconds: epoch_seconds(),
    }
    .write(out_dir)?;
    Ok(())
}

/// Parse one PDB file into serialized graph + backbone text.
fn preprocess_one(
    path: &Path,
    feature: &hyperrna_core::featurize::FeatureConfig,
) -> Result<(String, String, Vec<String>), CliError> {
    let text = read_file(path)?;
    let chains = pdb::parse_pdb(&text).map_err(|e| data_err(e.to_string()))?;
    let mut warnings = Vec::new();
    let mut rna: Option<(String, CoarseBackbone)> = None;
    let mut protein: Option<(String, CoarseBackbone)> = None;
    for (chain_id, records) in &chains {
        let kind = match pdb::detect_chain_kind(records) {
            Some(k) => k,
            None => {
                warnings.push(format!("chain '{chain_id}': no recognizable residues"));
                continue;
            }
        };
        match pdb::coarse_grain(records, kind) {
            Ok((bb, mut w)) => {
                warnings.append(&mut w);
                let slot = match kind {
                    ChainKind::Rna => &mut rna,
                    ChainKind::Protein => &mut protein,
                };
                if slot.is_none() {
                    *slot = Some((chain_id.clone(), bb));
                } else {
                    warnings.push(format!(
                        "chain '{chain_id}': extra {} chain ignored",
                        kind.as_str()
                    ));
                }
            }
            Err(e) => warnings.push(format!("chain '{chain_id}': {e}")),
        }
    }
    let (_, rna_bb) = rna.ok_or_else(|| data_err("no usable nucleic-acid chain"))?;
    let graph = build_features(&rna_bb, protein.as_ref().map(|(_, bb)| bb), feature)
        .map_err(|e| data_err(e.to_string()))?;
    let mut named: Vec<(String, &CoarseBackbone)> = vec![("rna".to_string(), &rna_bb)];
    if let Some((_, bb)) = &protein {
        named.push(("protein".to_string(), bb));
    }
    Ok((
        formats::write_graph(&graph),
        formats::write_backbones(&named),
        warnings,
    ))
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

fn parse_ratios(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(data_err(format!(
            "ratios must be train:val:test, got '{text}'"
        )));
    }
    let mut values = [0.0; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .map_err(|_| data_err(format!("bad ratio component '{part}'")))?;
        if !(slot.is_finite() && *slot >= 0.0) {
            return Err(data_err(format!("bad ratio component '{part}'")));
        }
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(data_err("ratios sum to zero"));
    }
    Ok([values[0] / total, values[1] / total, values[2] / total])
}

fn cmd_split(
    fasta_path: &Path,
    out: &Path,
    threshold: f64,
    ratios: &str,
    seed: u64,
) -> Result<(), CliError> {
    let started = epoch_seconds();
    let records = fasta::parse_fasta(&read_file(fasta_path)?, Alphabet::Rna)
        .map_err(|e| data_err(e.to_string()))?;
    if records.is_empty() {
        return Err(data_err("no sequences in input"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (id, _) in &records {
        if !seen.insert(id.clone()) {
            return Err(data_err(format!("duplicate id '{id}'")));
        }
    }
    let ratio_values = parse_ratios(ratios)?;
    let sequences: Vec<&str> = records.iter().map(|(_, s)| s.as_str()).collect();
    let mut rng = Xoshiro256StarStar::seeded(seed);
    let split = cluster::cluster_split(&sequences, threshold, ratio_values, &mut rng)
        .map_err(|e| data_err(format!("{e:?}")))?;
    let ids: Vec<String> = records.iter().map(|(id, _)| id.clone()).collect();
    formats::write_atomic(out, &formats::write_split(&ids, &split))?;
    write_file_manifest(
        out,
        RunManifest {
            command: "split".to_string(),
            seed,
            inputs: vec![fasta_path.display().to_string()],
            config: vec![
                ("threshold".to_string(), format!("{threshold}")),
                ("ratios".to_string(), ratios.to_string()),
            ],
            started_epoch_seconds: started,
            finished_epoch_seconds: epoch_seconds(),
        },
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    graphs_dir: &Path,
    split_path: &Path,
    config_path: &Path,
    out_dir: &Path,
    seed: u64,
    epochs_override: Option<usize>,
    mean_seq_loss: bool,
    pred_coords: Option<&Path>,
) -> Result<(), CliError> {
    let started = epoch_seconds();
    let mut settings = formats::parse_train_config(&read_file(config_path)?)?;
    if let Some(epochs) = epochs_override {
        settings.epochs = epochs;
    }
    if mean_seq_loss {
        settings.mean_seq_loss = true;
    }
    let rows = formats::parse_split(&read_file(split_path)?)?;
    if rows.is_empty() {
        return Err(data_err(format!(
            "split file {} lists no structures",
            split_path.display()
        )));
    }

    let mut examples = Vec::with_capacity(rows.len());
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    for (index, (id, _cluster, bucket)) in rows.iter().enumerate() {
        let graph_path = graphs_dir.join(format!("{id}.graph"));
        let graph = formats::parse_graph(&read_file(&graph_path)?)?;
        let structure_mse = match pred_coords {
            Some(dir) => structure_term(id, dir, graphs_dir)?,
            None => None,
        };
        examples.push(TrainExample {
            id: id.clone(),
            graph,
            structure_mse,
        });
        match bucket {
            0 => train_ids.push(index),
            1 => val_ids.push(index),
            _ => {}
        }
    }

    fs::create_dir_all(out_dir)?;
    let artifacts = trainer::train(
        &examples,
        &train_ids,
        &val_ids,
        &settings,
        seed,
        |row| {
            eprintln!(
                "epoch {} train_ce {:.4} val_ce {:.4} val_recovery {:.4}",
                row.epoch, row.train_ce, row.val_ce, row.val_recovery
            );
        },
    )?;
    formats::save_checkpoint(
        &out_dir.join("checkpoint.txt"),
        &settings.model,
        &artifacts.params,
        Some(&artifacts.adam),
    )?;
    formats::write_atomic(&out_dir.join("log.csv"), &trainer::render_log(&artifacts.log))?;

    let mut config = formats::config_snapshot(&settings.model);
    config.push(("epochs".to_string(), settings.epochs.to_string()));
    config.push(("lr".to_string(), format!("{}", settings.lr)));
    config.push(("lambda_str".to_string(), format!("{}", settings.lambda_str)));
    config.push(("batch".to_string(), settings.batch.to_string()));
    config.push((
        "mean_seq_loss".to_string(),
        settings.mean_seq_loss.to_string(),
    ));
    if let Some(best) = artifacts.best_epoch {
        config.push(("best_epoch".to_string(), best.to_string()));
    }
    RunManifest {
        command: "train".to_string(),
        seed,
        inputs: vec![
            graphs_dir.display().to_string(),
            split_path.display().to_string(),
            config_path.display().to_string(),
        ],
        config,
        started_epoch_seconds: started,
        finished_epoch_seconds: epoch_seconds(),
    }
    .write(out_dir)?;
    Ok(())
}

/// Constant structure term: coordinate MSE between the true backbone
/// (written by preprocess next to the graph) and an externally predicted
/// backbone of the same name.
fn structure_term(
    id: &str,
    pred_dir: &Path,
    graphs_dir: &Path,
) -> Result<Option<f64>, CliError> {
    let pred_path = pred_dir.join(format!("{id}.backbone"));
    if !pred_path.exists() {
        eprintln!("{id}: no predicted coordinates, structure term skipped");
        return Ok(None);
    }
    let truth_path = graphs_dir.join(format!("{id}.backbone"));
    let truth = formats::parse_backbones(&read_file(&truth_path)?)?;
    let pred = formats::parse_backbones(&read_file(&pred_path)?)?;
    let flat_truth = flatten_beads(&truth);
    let flat_pred = flatten_beads(&pred);
    if flat_truth.shape() != flat_pred.shape() {
        return Err(data_err(format!(
            "{id}: predicted coordinates disagree in shape with ground truth"
        )));
    }
    hyperrna_core::loss::structure_loss(&flat_truth, &flat_pred)
        .map(Some)
        .map_err(|e| data_err(format!("{id}: {e}")))
}

fn flatten_beads(chains: &[(String, CoarseBackbone)]) -> hyperrna_core::Tensor {
    let total: usize = chains.iter().map(|(_, bb)| bb.len() * 3).sum();
    let mut data = Vec::with_capacity(total * 3);
    for (_, bb) in chains {
        for i in 0..bb.len() {
            for slot in 0..3 {
                let p = bb.bead(i, slot);
                data.extend([p.x(), p.y(), p.z()]);
            }
        }
    }
    hyperrna_core::Tensor::from_vec(&[total, 3], data).expect("bead count matches data")
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

fn cmd_sample(
    checkpoint: &Path,
    graph_path: &Path,
    out: &Path,
    temperature: f64,
    num_seqs: usize,
    seed: u64,
) -> Result<(), CliError> {
    let started = epoch_seconds();
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(data_err("temperature must be positive"));
    }
    let (cfg, params, _) = formats::load_checkpoint(checkpoint)?;
    let graph = formats::parse_graph(&read_file(graph_path)?)?;
    if graph.d_e() != cfg.d_e() || graph.d_v != cfg.d_v() {
        return Err(data_err(format!(
            "graph features [{}, {}] do not match checkpoint dimensions [{}, {}]",
            graph.d_e(),
            graph.d_v,
            cfg.d_e(),
            cfg.d_v()
        )));
    }
    let structure = file_stem(graph_path);
    let mut records = Vec::with_capacity(num_seqs);
    for s in 0..num_seqs {
        let tape = Tape::new();
        let bound = params.bind(&cfg, &tape)?;
        let mut rng = Xoshiro256StarStar::stream(seed, s as u64);
        let indices =
            model::forward_sample(&tape, &graph, &cfg, &bound, temperature, &mut rng)?;
        let sequence: String = indices.iter().map(|&i| NUCLEOTIDES[i]).collect();
        records.push((format!("{structure}_s{s}"), sequence));
    }
    formats::write_atomic(out, &fasta::write_fasta(&records))?;
    write_file_manifest(
        out,
        RunManifest {
            command: "sample".to_string(),
            seed,
            inputs: vec![
                checkpoint.display().to_string(),
                graph_path.display().to_string(),
            ],
            config: vec![
                ("temperature".to_string(), format!("{temperature}")),
                ("num_seqs".to_string(), num_seqs.to_string()),
            ],
            started_epoch_seconds: started,
            finished_epoch_seconds: epoch_seconds(),
        },
    )?;
    Ok(())
}

fn write_file_manifest(out: &Path, manifest: RunManifest) -> Result<(), CliError> {
    formats::write_atomic(&manifest_path(out, false), &manifest.render())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    pred_fasta: PathBuf,
    true_fasta: PathBuf,
    out: PathBuf,
    pred_coords: Option<PathBuf>,
    true_coords: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    graphs: Option<PathBuf>,
    seed: u64,
}

/// Strip a trailing `_s<digits>` sample suffix.
fn base_structure_id(id: &str) -> &str {
    if let Some(pos) = id.rfind("_s") {
        if id[pos + 2..].chars().all(|c| c.is_ascii_digit()) && !id[pos + 2..].is_empty() {
            return &id[..pos];
        }
    }
    id
}

fn format_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

fn summary_cell(values: &[f64]) -> String {
    if values.is_empty() {
        return String::new();
    }
    let (mean, sem) = metrics::mean_and_sem(values);
    format!("{mean:.6}±{sem:.6}")
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let started = epoch_seconds();
    let pred = fasta::parse_fasta(&read_file(&args.pred_fasta)?, Alphabet::Rna)
        .map_err(|e| data_err(e.to_string()))?;
    let truth = fasta::parse_fasta(&read_file(&args.true_fasta)?, Alphabet::Rna)
        .map_err(|e| data_err(e.to_string()))?;
    if pred.is_empty() {
        return Err(data_err("prediction FASTA is empty"));
    }
    let truth_map: BTreeMap<&str, &str> = truth
        .iter()
        .map(|(id, seq)| (id.as_str(), seq.as_str()))
        .collect();

    // Resolve each prediction to its ground-truth record up front so a
    // mismatch reports every missing id at once.
    let mut missing = Vec::new();
    let mut resolved: Vec<(&str, &str, &str)> = Vec::new();
    for (id, seq) in &pred {
        let true_id = if truth_map.contains_key(id.as_str()) {
            id.as_str()
        } else {
            base_structure_id(id)
        };
        match truth_map.get(true_id) {
            Some(true_seq) => resolved.push((id.as_str(), seq.as_str(), true_seq)),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(data_err(format!(
            "prediction ids missing from ground truth: {}",
            missing.join(", ")
        )));
    }

    let scorer = match (&args.checkpoint, &args.graphs) {
        (Some(ckpt), Some(graphs)) => Some((formats::load_checkpoint(ckpt)?, graphs.clone())),
        (None, None) => None,
        _ => {
            return Err(data_err(
                "--checkpoint and --graphs must be supplied together",
            ))
        }
    };
    let coords = match (&args.pred_coords, &args.true_coords) {
        (Some(p), Some(t)) => Some((p.clone(), t.clone())),
        (None, None) => None,
        _ => {
            return Err(data_err(
                "--pred-coords and --true-coords must be supplied together",
            ))
        }
    };

    let mut perplexity_cache: BTreeMap<String, f64> = BTreeMap::new();
    let mut rows = Vec::with_capacity(resolved.len());
    let mut recoveries = Vec::new();
    let mut perplexities = Vec::new();
    let mut rmsds = Vec::new();
    let mut lddts = Vec::new();
    for (pred_id, pred_seq, true_seq) in &resolved {
        let recovery = metrics::recovery(true_seq, pred_seq)
            .map_err(|e| data_err(format!("{pred_id}: {e}")))?;
        recoveries.push(recovery);

        let structure = base_structure_id(pred_id).to_string();
        let perplexity = match &scorer {
            Some(((cfg, params, _), graphs_dir)) => {
                let value = match perplexity_cache.get(&structure) {
                    Some(v) => *v,
                    None => {
                        let v = structure_perplexity(
                            &structure, true_seq, cfg, params, graphs_dir,
                        )?;
                        perplexity_cache.insert(structure.clone(), v);
                        v
                    }
                };
                perplexities.push(value);
                Some(value)
            }
            None => None,
        };

        let (rmsd, lddt) = match &coords {
            Some((pred_dir, true_dir)) => {
                let (r, l) = coordinate_scores(pred_id, &structure, pred_dir, true_dir)?;
                rmsds.push(r);
                lddts.push(l);
                (Some(r), Some(l))
            }
            None => (None, None),
        };

        rows.push(format!(
            "{pred_id},{:.6},{},{},{}",
            recovery,
            format_cell(perplexity),
            format_cell(rmsd),
            format_cell(lddt)
        ));
    }

    let mut csv = String::from("id,recovery,perplexity,rmsd,lddt\n");
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    csv.push_str(&format!(
        "summary,{},{},{},{}\n",
        summary_cell(&recoveries),
        summary_cell(&perplexities),
        summary_cell(&rmsds),
        summary_cell(&lddts)
    ));
    formats::write_atomic(&args.out, &csv)?;

    let mut inputs = vec![
        args.pred_fasta.display().to_string(),
        args.true_fasta.display().to_string(),
    ];
    for extra in [
        &args.pred_coords,
        &args.true_coords,
        &args.checkpoint,
        &args.graphs,
    ]
    .into_iter()
    .flatten()
    {
        inputs.push(extra.display().to_string());
    }
    write_file_manifest(
        &args.out,
        RunManifest {
            command: "eval".to_string(),
            seed: args.seed,
            inputs,
            config: vec![(
                "structures".to_string(),
                resolved.len().to_string(),
            )],
            started_epoch_seconds: started,
            finished_epoch_seconds: epoch_seconds(),
        },
    )?;
    Ok(())
}

/// Teacher-forced perplexity of the true sequence under the checkpoint.
fn structure_perplexity(
    structure: &str,
    true_seq: &str,
    cfg: &ModelConfig,
    params: &ModelParams,
    graphs_dir: &Path,
) -> Result<f64, CliError> {
    let graph = formats::parse_graph(&read_file(
        &graphs_dir.join(format!("{structure}.graph")),
    )?)?;
    let targets: Vec<usize> = true_seq
        .chars()
        .filter_map(hyperrna_core::backbone::nucleotide_index)
        .collect();
    if targets.len() != graph.rna_len {
        return Err(data_err(format!(
            "{structure}: true sequence length {} disagrees with graph nucleic length {}",
            targets.len(),
            graph.rna_len
        )));
    }
    let tape = Tape::new();
    let bound = params.bind(cfg, &tape)?;
    let mut no_dropout = Xoshiro256StarStar::seeded(0);
    let logits = model::forward_teacher_logits(
        &tape, &graph, &targets, cfg, &bound, false, &mut no_dropout,
    )?;
    metrics::perplexity(&tape.value(logits), &targets)
        .map_err(|e| data_err(format!("{structure}: {e}")))
}

/// RMSD over all beads and distance-difference score over center beads.
fn coordinate_scores(
    pred_id: &str,
    structure: &str,
    pred_dir: &Path,
    true_dir: &Path,
) -> Result<(f64, f64), CliError> {
    let pred_path = pred_dir.join(format!("{pred_id}.backbone"));
    let pred = if pred_path.exists() {
        formats::parse_backbones(&read_file(&pred_path)?)?
    } else {
        formats::parse_backbones(&read_file(
            &pred_dir.join(format!("{structure}.backbone")),
        )?)?
    };
    let truth = formats::parse_backbones(&read_file(
        &true_dir.join(format!("{structure}.backbone")),
    )?)?;
    let mut pred_beads = Vec::new();
    let mut true_beads = Vec::new();
    let mut pred_centers = Vec::new();
    let mut true_centers = Vec::new();
    for (_, bb) in &pred {
        for i in 0..bb.len() {
            for slot in 0..3 {
                pred_beads.push(bb.bead(i, slot));
            }
            pred_centers.push(bb.center(i));
        }
    }
    for (_, bb) in &truth {
        for i in 0..bb.len() {
            for slot in 0..3 {
                true_beads.push(bb.bead(i, slot));
            }
            true_centers.push(bb.center(i));
        }
    }
    let alignment = metrics::kabsch_align(&pred_beads, &true_beads)
        .map_err(|e| data_err(format!("{pred_id}: {e}")))?;
    let lddt = metrics::lddt(
        &true_centers,
        &pred_centers,
        metrics::LDDT_RADIUS,
        &metrics::LDDT_THRESHOLDS,
    )
    .map_err(|e| data_err(format!("{pred_id}: {e}")))?;
    Ok((alignment.rmsd, lddt))
}
