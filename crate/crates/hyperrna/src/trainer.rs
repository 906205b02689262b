//! The epoch loop: teacher-forced loss, Adam updates, per-epoch validation
//! and best-validation parameter tracking.

use std::time::Instant;

use hyperrna_core::featurize::GeometricGraph;
use hyperrna_core::loss::{self, LossError};
use hyperrna_core::model::{self, ModelConfig, ModelError, ModelParams};
use hyperrna_core::rng::Xoshiro256StarStar;
use hyperrna_core::tensor::{AdamConfig, AdamState};
use hyperrna_core::{Tape, Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became non-finite on structure '{structure}'")]
    NonFiniteLoss { structure: String },
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("invalid training setting: {0}")]
    BadSetting(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Everything the epoch loop needs to know, normally read from the flat
/// key=value config file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr: f64,
    /// Weight on the (constant) structure term.
    pub lambda_str: f64,
    /// Structures per optimizer step; gradients are averaged.
    pub batch: usize,
    /// Average the sequence loss over positions instead of summing.
    pub mean_seq_loss: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            model: ModelConfig::default(),
            epochs: 100,
            lr: 1e-4,
            lambda_str: 1.0,
            batch: 1,
            mean_seq_loss: false,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TrainError::BadSetting("lr must be finite and >= 0"));
        }
        if self.batch == 0 {
            return Err(TrainError::BadSetting("batch must be >= 1"));
        }
        if !(self.lambda_str.is_finite() && self.lambda_str >= 0.0) {
            return Err(TrainError::BadSetting("lambda_str must be finite and >= 0"));
        }
        Ok(())
    }
}

/// One structure ready for optimization. The structure term, when present,
/// is the precomputed coordinate MSE against externally supplied predicted
/// coordinates — constant with respect to the parameters, so it shifts the
/// reported loss without touching gradients.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub id: String,
    pub graph: GeometricGraph,
    pub structure_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean per-position teacher-forced cross-entropy over the epoch's
    /// training passes (measured before each step, natural log).
    pub train_ce: f64,
    pub val_ce: f64,
    pub val_recovery: f64,
    pub wall_seconds: f64,
}

pub struct TrainArtifacts {
    /// Parameters at the best validation epoch (final epoch when no
    /// validation structures exist).
    pub params: ModelParams,
    pub adam: AdamState,
    pub log: Vec<EpochRow>,
    pub best_epoch: Option<usize>,
}

/// Render the epoch log as the CSV the train command writes.
pub fn render_log(rows: &[EpochRow]) -> String {
    let mut out = String::from("epoch,train_ce,val_ce,val_recovery,wall_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.3}\n",
            r.epoch, r.train_ce, r.val_ce, r.val_recovery, r.wall_seconds
        ));
    }
    out
}

fn stable_row_ce(logits: &Tensor, row: usize, target: usize) -> f64 {
    let cols = logits.shape()[1];
    let vals: Vec<f64> = (0..cols).map(|c| logits.get2(row, c)).collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = vals.iter().map(|v| (v - max).exp()).sum();
    -(vals[target] - max - z.ln())
}

fn argmax_row(logits: &Tensor, row: usize) -> usize {
    let cols = logits.shape()[1];
    let mut best = 0;
    for c in 1..cols {
        if logits.get2(row, c) > logits.get2(row, best) {
            best = c;
        }
    }
    best
}

/// Teacher-forced evaluation without dropout: total CE, positions, and
/// argmax matches over the given examples.
pub fn evaluate(
    examples: &[TrainExample],
    ids: &[usize],
    cfg: &ModelConfig,
    params: &ModelParams,
) -> Result<(f64, usize, usize), TrainError> {
    let mut total_ce = 0.0;
    let mut positions = 0usize;
    let mut matches = 0usize;
    for &i in ids {
        let example = &examples[i];
        let targets = example.graph.rna_indices();
        let tape = Tape::new();
        let bound = params.bind(cfg, &tape)?;
        let mut no_dropout = Xoshiro256StarStar::seeded(0);
        let logits_var = model::forward_teacher_logits(
            &tape,
            &example.graph,
            &targets,
            cfg,
            &bound,
            false,
            &mut no_dropout,
        )?;
        let logits = tape.value(logits_var);
        for (row, &t) in targets.iter().enumerate() {
            total_ce += stable_row_ce(&logits, row, t);
            if argmax_row(&logits, row) == t {
                matches += 1;
            }
        }
        positions += targets.len();
    }
    Ok((total_ce, positions, matches))
}

/// Run the full loop. Randomness (initialization, shuffling, dropout) is
/// derived entirely from `seed`; `on_epoch` observes each logged row as it
/// is produced.
pub fn train(
    examples: &[TrainExample],
    train_ids: &[usize],
    val_ids: &[usize],
    settings: &TrainSettings,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRow),
) -> Result<TrainArtifacts, TrainError> {
    settings.validate()?;
    if train_ids.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    let cfg = &settings.model;
    let mut init_rng = Xoshiro256StarStar::stream(seed, 0);
    let mut params = ModelParams::init(cfg, &mut init_rng)?;
    let mut values: Vec<Tensor> = params.values().cloned().collect();
    let mut adam = AdamState::new(
        &values,
        AdamConfig {
            lr: settings.lr,
            ..AdamConfig::default()
        },
    );

    let start = Instant::now();
    let mut log = Vec::with_capacity(settings.epochs);
    let mut best: Option<(usize, f64, ModelParams, AdamState)> = None;

    for epoch in 1..=settings.epochs {
        let mut order: Vec<usize> = train_ids.to_vec();
        let mut shuffle_rng = Xoshiro256StarStar::stream(seed, 1 + epoch as u64);
        shuffle_rng.shuffle(&mut order);
        let mut dropout_rng = Xoshiro256StarStar::stream(seed, 1_000_000 + epoch as u64);

        let mut epoch_ce = 0.0;
        let mut epoch_positions = 0usize;
        for chunk in order.chunks(settings.batch) {
            let mut grad_sum: Vec<Tensor> =
                values.iter().map(|t| Tensor::zeros(t.shape())).collect();
            for &i in chunk {
                let example = &examples[i];
                let targets = example.graph.rna_indices();
                let tape = Tape::new();
                let bound = params.bind(cfg, &tape)?;
                let logits = model::forward_teacher_logits(
                    &tape,
                    &example.graph,
                    &targets,
                    cfg,
                    &bound,
                    true,
                    &mut dropout_rng,
                )?;
                let seq = loss::sequence_loss(&tape, logits, &targets, settings.mean_seq_loss)?;
                let seq_value = tape.value(seq).data()[0];
                let total =
                    loss::total_loss(&tape, seq, example.structure_mse, settings.lambda_str)?;
                let total_value = tape.value(total.value).data()[0];
                if !total_value.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        structure: example.id.clone(),
                    });
                }
                tape.backward(total.value)?;
                for (acc, &var) in grad_sum.iter_mut().zip(&bound.vars) {
                    let g = tape.grad_or_zeros(var);
                    for (slot, add) in acc.data_mut().iter_mut().zip(g.data()) {
                        *slot += add;
                    }
                }
                let ce_sum = if settings.mean_seq_loss {
                    seq_value * targets.len() as f64
                } else {
                    seq_value
                };
                epoch_ce += ce_sum;
                epoch_positions += targets.len();
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut grad_sum {
                for slot in g.data_mut() {
                    *slot *= scale;
                }
            }
            adam.step(&mut values, &grad_sum)?;
            params.assign_all(&values)?;
        }

        let (val_ce, val_recovery) = if val_ids.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (ce, positions, matches) = evaluate(examples, val_ids, cfg, &params)?;
            (
                ce / positions.max(1) as f64,
                matches as f64 / positions.max(1) as f64,
            )
        };
        let row = EpochRow {
            epoch,
            train_ce: epoch_ce / epoch_positions.max(1) as f64,
            val_ce,
            val_recovery,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let improved = match &best {
            _ if val_ids.is_empty() => true,
            None => true,
            Some((_, best_ce, _, _)) => val_ce < *best_ce,
        };
        if improved {
            best = Some((epoch, val_ce, params.clone(), adam.clone()));
        }
        on_epoch(&row);
        log.push(row);
    }

    let (best_epoch, final_params, final_adam) = match best {
        Some((e, _, p, a)) => (Some(e), p, a),
        None => (None, params, adam),
    };
    Ok(TrainArtifacts {
        params: final_params,
        adam: final_adam,
        log,
        best_epoch,
    })
}
