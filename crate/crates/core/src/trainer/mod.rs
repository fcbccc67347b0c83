//! Seeded mini-batch training with dev-set model selection, and prediction.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, EmbeddingTable, Instance};
use crate::models::{ForwardTrace, InstanceGrads, Model, ModelConfig, ModelError, ParamKind};
use crate::numcore::{AdamConfig, AdamState, NumError, Tensor};
use crate::robeval::{evaluate, EvalError, Metrics};

/// Gradients of a batch are accumulated in this many interleaved lanes, then
/// summed lane by lane, so the result does not depend on the thread count.
const LANES: usize = 16;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("training log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            l2: 1e-5,
            max_epochs: 20,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config("batch_size and max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.l2 >= 0.0) {
            return Err(TrainError::Config("learning_rate and l2 must be non-negative".into()));
        }
        self.model.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_acc: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    /// Parameters from the best dev epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub trace: ForwardTrace,
}

/// Trains `config.model` on `train_set`, keeping the epoch with the best dev
/// accuracy (earliest on ties).
pub fn train(
    train_set: &Dataset,
    dev_set: &Dataset,
    config: &TrainConfig,
    table: &EmbeddingTable,
) -> Result<TrainResult, TrainError> {
    train_with_log(train_set, dev_set, config, table, None)
}

/// [`train`], writing one JSON object per epoch to `log`.
pub fn train_with_log(
    train_set: &Dataset,
    dev_set: &Dataset,
    config: &TrainConfig,
    table: &EmbeddingTable,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if dev_set.is_empty() {
        return Err(TrainError::EmptyDataset("development"));
    }
    let mut model = Model::new(config.model.clone(), table, config.seed)?;
    // separate stream from parameter initialization
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5851_F42D_4C95_7F2D));
    let trainable = model.trainable();
    let decay: Vec<f64> = model
        .store()
        .iter()
        .map(|p| if p.kind == ParamKind::Weight { config.l2 } else { 0.0 })
        .collect();
    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, model.store().len());

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(usize, f64, Model)> = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let items: Vec<(&Instance, u64)> = batch
                .iter()
                .map(|&i| (&train_set.instances[i], rng.gen::<u64>()))
                .collect();
            let (loss, grads) = batch_gradient(&model, &items, &trainable)?;
            loss_sum += loss;
            let mut params = model.store_mut().values_mut();
            adam.update(&mut params, &grads, &decay)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let dev = evaluate_model(&model, dev_set)?;
        let stats = EpochStats {
            epoch,
            train_loss,
            dev_acc: dev.accuracy,
            dev_f1: dev.macro_f1,
        };
        log::debug!(
            "epoch {epoch}: loss {train_loss:.4}, dev acc {:.4}, dev f1 {:.4}",
            dev.accuracy,
            dev.macro_f1
        );
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &stats).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        history.push(stats);
        if best.as_ref().is_none_or(|(_, acc, _)| dev.accuracy > *acc) {
            best = Some((epoch, dev.accuracy, model.clone()));
        }
    }
    let (best_epoch, best_dev_accuracy, model) = best.expect("at least one epoch");
    Ok(TrainResult {
        model,
        best_epoch,
        best_dev_accuracy,
        history,
    })
}

fn add_into(acc: &mut Option<Tensor>, g: Tensor) {
    match acc {
        Some(a) => a.add_assign(&g),
        None => *acc = Some(g),
    }
}

/// Summed loss and mean gradient over a batch. Item `k` goes to lane
/// `k % LANES`; lanes are summed in index order.
fn batch_gradient(
    model: &Model,
    items: &[(&Instance, u64)],
    trainable: &[bool],
) -> Result<(f64, Vec<Option<Tensor>>), TrainError> {
    let lanes: Vec<Result<(f64, Vec<Option<Tensor>>, Vec<InstanceGrads>), ModelError>> = (0..LANES)
        .into_par_iter()
        .map(|lane| {
            let mut loss = 0.0;
            let mut dense: Vec<Option<Tensor>> = vec![None; trainable.len()];
            let mut sparse = Vec::new();
            for (inst, seed) in items.iter().skip(lane).step_by(LANES) {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut g = model.instance_grads(inst, &mut rng)?;
                loss += g.loss;
                for (acc, t) in dense.iter_mut().zip(g.dense.iter_mut()) {
                    if let Some(t) = t.take() {
                        add_into(acc, t);
                    }
                }
                if !g.rows.is_empty() {
                    sparse.push(g);
                }
            }
            Ok((loss, dense, sparse))
        })
        .collect();

    let scale = 1.0 / items.len() as f64;
    let mut total_loss = 0.0;
    let mut grads: Vec<Option<Tensor>> = vec![None; trainable.len()];
    let embedding_slot = model
        .store()
        .iter()
        .position(|p| p.kind == ParamKind::Embedding);
    for lane in lanes {
        let (loss, dense, sparse) = lane?;
        total_loss += loss;
        for (acc, g) in grads.iter_mut().zip(dense) {
            if let Some(g) = g {
                add_into(acc, g);
            }
        }
        if let (Some(slot), false) = (embedding_slot, sparse.is_empty()) {
            let table = &model.store().params()[slot].value;
            let acc = grads[slot].get_or_insert_with(|| Tensor::zeros(table.rows(), table.cols()));
            for g in sparse {
                for (row, values) in g.rows {
                    for (a, v) in acc.row_slice_mut(row).iter_mut().zip(values) {
                        *a += v;
                    }
                }
            }
        }
    }
    for (g, &t) in grads.iter_mut().zip(trainable) {
        if !t {
            *g = None;
        } else if let Some(g) = g {
            g.scale_assign(scale);
        }
    }
    Ok((total_loss, grads))
}

/// Evaluation-mode predictions; exact logit ties resolve to the lowest class.
pub fn predict(model: &Model, instances: &[Instance]) -> Result<Vec<Prediction>, TrainError> {
    let out: Result<Vec<Prediction>, ModelError> = instances
        .par_iter()
        .map(|inst| {
            let trace = model.forward_instance(inst)?;
            Ok(Prediction {
                class: trace.predicted(),
                trace,
            })
        })
        .collect();
    Ok(out?)
}

/// Loads `checkpoint`, checks it was trained with `expected`, and predicts.
pub fn predict_checkpoint(
    checkpoint: &Path,
    expected: &ModelConfig,
    instances: &[Instance],
) -> Result<Vec<Prediction>, TrainError> {
    let (model, _) = Model::load_expecting(checkpoint, expected)?;
    predict(&model, instances)
}

pub fn evaluate_model(model: &Model, dataset: &Dataset) -> Result<Metrics, TrainError> {
    let preds = predict(model, &dataset.instances)?;
    let pred: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let gold: Vec<usize> = dataset.instances.iter().map(|i| i.label.index()).collect();
    Ok(evaluate(&pred, &gold)?)
}
