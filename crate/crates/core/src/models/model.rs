use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{forward_arch, Bound};
use super::params::{init_store, store_from_tensors, EMBEDDING};
use super::{AttentionRecord, ForwardTrace, ModelConfig, ModelError, ParamKind, ParamStore};
use crate::corpus::{EmbeddingTable, Instance};
use crate::numcore::{read_checkpoint, write_checkpoint, Tape, Tensor};
use crate::posbias::{
    apply_dropout, apply_weights, position_weights, sample_dropout_mask, BiasMode, BiasedSentence,
    EmbeddedSentence, PositionWeights,
};

const INIT_BOUND: f64 = 0.1;

/// Per-token factors applied to `V` before the encoder.
#[derive(Clone, Debug, PartialEq)]
pub enum Refinement {
    Identity,
    Scale(Vec<f64>),
}

fn weights_for(config: &ModelConfig, n: usize, aspect: &Range<usize>) -> Result<PositionWeights, ModelError> {
    let p = position_weights(n, aspect.len(), aspect.start)?;
    Ok(if config.keep_aspect { p.keep_aspect() } else { p })
}

impl Refinement {
    /// Factors for one sentence. Under `pos-dp` a training pass draws a fresh
    /// mask from `rng`; evaluation uses the weights themselves.
    pub fn for_sentence<R: Rng + ?Sized>(
        config: &ModelConfig,
        n: usize,
        aspect: Range<usize>,
        training: bool,
        rng: Option<&mut R>,
    ) -> Result<Self, ModelError> {
        Ok(match config.bias_mode {
            BiasMode::None => Refinement::Identity,
            BiasMode::Weight => Refinement::Scale(weights_for(config, n, &aspect)?.values),
            BiasMode::Dropout => {
                let p = weights_for(config, n, &aspect)?;
                if training {
                    let rng = rng.ok_or_else(|| {
                        ModelError::Config("pos-dp training needs a random source".into())
                    })?;
                    Refinement::Scale(sample_dropout_mask(&p, rng).factors())
                } else {
                    Refinement::Scale(p.values)
                }
            }
        })
    }
}

/// `E` for one instance: table lookups, then the configured bias.
pub fn embed_and_bias<R: Rng + ?Sized>(
    instance: &Instance,
    table: &EmbeddingTable,
    config: &ModelConfig,
    rng: &mut R,
    training: bool,
) -> Result<BiasedSentence, ModelError> {
    let rows: Vec<&[f64]> = instance.surfaces().map(|s| table.lookup(s)).collect();
    let v = EmbeddedSentence::new(Tensor::from_rows(&rows)?);
    let aspect = instance.aspect_range();
    Ok(match config.bias_mode {
        BiasMode::None => BiasedSentence {
            vectors: v.vectors,
            mode: BiasMode::None,
        },
        BiasMode::Weight => apply_weights(&v, &weights_for(config, v.len(), &aspect)?)?,
        BiasMode::Dropout => {
            let p = weights_for(config, v.len(), &aspect)?;
            if training {
                apply_dropout(&v, &sample_dropout_mask(&p, rng))?
            } else {
                let mut out = apply_weights(&v, &p)?;
                out.mode = BiasMode::Dropout;
                out
            }
        }
    })
}

/// Token vectors for one sentence. Rows past `length` are padding and are
/// never read.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub vectors: Tensor,
    pub length: usize,
    pub aspect: Range<usize>,
}

/// Embedding-row gradients as `(row index, gradient)` pairs.
pub type SparseRows = Vec<(usize, Vec<f64>)>;

/// Loss and gradients from one training instance. `dense` follows store
/// order; the embedding slot is always `None` and its gradient, when the
/// embedding is trainable, is in `rows`.
#[derive(Clone, Debug)]
pub struct InstanceGrads {
    pub loss: f64,
    pub dense: Vec<Option<Tensor>>,
    pub rows: SparseRows,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    seed: u64,
    vocabulary: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    words: Vec<String>,
    index: HashMap<String, usize>,
}

enum Target {
    Loss(usize),
    Logit(usize),
    None,
}

struct Pass {
    trace: ForwardTrace,
    loss: f64,
    dense: Vec<Option<Tensor>>,
    input_grad: Option<Tensor>,
}

impl Model {
    /// Fresh parameters drawn from `seed`; the embedding is copied from
    /// `table` (OOV row last).
    pub fn new(config: ModelConfig, table: &EmbeddingTable, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let store = init_store(&config, table.matrix(), INIT_BOUND, &mut rng)?;
        Ok(Self::from_parts(config, table.words().to_vec(), store))
    }

    fn from_parts(config: ModelConfig, words: Vec<String>, store: ParamStore) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self {
            config,
            store,
            words,
            index,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Parameter slots the optimizer may touch.
    pub fn trainable(&self) -> Vec<bool> {
        self.store
            .iter()
            .map(|p| p.kind != ParamKind::Embedding || self.config.train_embeddings)
            .collect()
    }

    pub fn token_ids(&self, instance: &Instance) -> Vec<usize> {
        instance
            .surfaces()
            .map(|s| self.index.get(s).copied().unwrap_or(self.words.len()))
            .collect()
    }

    /// `V` for an instance, read from the current embedding parameter.
    pub fn input(&self, instance: &Instance) -> ModelInput {
        let table = self.store.get(EMBEDDING).expect("embedding present");
        let ids = self.token_ids(instance);
        let mut vectors = Tensor::zeros(ids.len(), table.cols());
        for (r, &i) in ids.iter().enumerate() {
            vectors.row_slice_mut(r).copy_from_slice(table.row_slice(i));
        }
        ModelInput {
            vectors,
            length: ids.len(),
            aspect: instance.aspect_range(),
        }
    }

    pub fn refinement<R: Rng + ?Sized>(
        &self,
        input: &ModelInput,
        training: bool,
        rng: Option<&mut R>,
    ) -> Result<Refinement, ModelError> {
        Refinement::for_sentence(&self.config, input.length, input.aspect.clone(), training, rng)
    }

    fn pass(
        &self,
        input: &ModelInput,
        refinement: &Refinement,
        target: Target,
        input_grad: bool,
    ) -> Result<Pass, ModelError> {
        if input.length == 0 || input.length > input.vectors.rows() {
            return Err(ModelError::Config(format!(
                "length {} with {} input rows",
                input.length,
                input.vectors.rows()
            )));
        }
        let param_grad = matches!(target, Target::Loss(_));
        let tape = Tape::new();
        let bound = Bound::bind(&tape, &self.store, param_grad);
        let full = tape.leaf(&input.vectors, input_grad);
        let v = if input.length == input.vectors.rows() {
            full
        } else {
            tape.rows(full, 0, input.length)?
        };
        let e = match refinement {
            Refinement::Identity => v,
            Refinement::Scale(f) => tape.scale_rows(v, f)?,
        };
        let out = forward_arch(&tape, &self.config, &bound, v, e, input.aspect.clone())?;
        let trace = ForwardTrace {
            logits: tape.value(out.logits).data().to_vec(),
            attention: out
                .records
                .iter()
                .map(|(name, w)| AttentionRecord {
                    name: name.clone(),
                    weights: tape.value(*w).data().to_vec(),
                })
                .collect(),
        };
        let root = match target {
            Target::Loss(gold) => Some(tape.cross_entropy(out.logits, gold)?),
            Target::Logit(c) => Some(tape.pick(out.logits, 0, c)?),
            Target::None => None,
        };
        let Some(root) = root else {
            return Ok(Pass {
                trace,
                loss: 0.0,
                dense: Vec::new(),
                input_grad: None,
            });
        };
        let loss = tape.value(root).data()[0];
        let mut grads = tape.backward(root)?;
        let dense = if param_grad {
            bound
                .vars()
                .iter()
                .zip(self.store.iter())
                .map(|(&var, p)| {
                    if p.kind == ParamKind::Embedding {
                        None
                    } else {
                        Some(grads.take(var).unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols())))
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let input_grad = if input_grad {
            Some(
                grads
                    .take(full)
                    .unwrap_or_else(|| Tensor::zeros(input.vectors.rows(), input.vectors.cols())),
            )
        } else {
            None
        };
        Ok(Pass {
            trace,
            loss,
            dense,
            input_grad,
        })
    }

    pub fn forward(&self, input: &ModelInput, refinement: &Refinement) -> Result<ForwardTrace, ModelError> {
        Ok(self.pass(input, refinement, Target::None, false)?.trace)
    }

    /// Evaluation-mode forward pass.
    pub fn forward_instance(&self, instance: &Instance) -> Result<ForwardTrace, ModelError> {
        let input = self.input(instance);
        let r = self.refinement::<ChaCha8Rng>(&input, false, None)?;
        self.forward(&input, &r)
    }

    /// Cross-entropy against `gold` and gradients for every parameter.
    pub fn loss_and_grads(
        &self,
        input: &ModelInput,
        refinement: &Refinement,
        gold: usize,
    ) -> Result<(ForwardTrace, f64, Vec<Option<Tensor>>), ModelError> {
        let p = self.pass(input, refinement, Target::Loss(gold), false)?;
        Ok((p.trace, p.loss, p.dense))
    }

    /// One training step's worth of gradient for `instance`, with pos-dp
    /// masks drawn from `rng`.
    pub fn instance_grads<R: Rng + ?Sized>(&self, instance: &Instance, rng: &mut R) -> Result<InstanceGrads, ModelError> {
        let input = self.input(instance);
        let r = self.refinement(&input, true, Some(rng))?;
        let gold = instance.label.index();
        let want_rows = self.config.train_embeddings;
        let p = self.pass(&input, &r, Target::Loss(gold), want_rows)?;
        let rows = match p.input_grad {
            Some(g) => self
                .token_ids(instance)
                .into_iter()
                .enumerate()
                .map(|(r, id)| (id, g.row_slice(r).to_vec()))
                .collect(),
            None => Vec::new(),
        };
        Ok(InstanceGrads {
            loss: p.loss,
            dense: p.dense,
            rows,
        })
    }

    /// Gradient of logit `class` with respect to the input rows.
    pub fn logit_input_gradient(
        &self,
        input: &ModelInput,
        refinement: &Refinement,
        class: usize,
    ) -> Result<(ForwardTrace, Tensor), ModelError> {
        let p = self.pass(input, refinement, Target::Logit(class), true)?;
        Ok((p.trace, p.input_grad.expect("requested")))
    }

    /// Sidecar path holding configuration, seed and vocabulary.
    pub fn metadata_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn save(&self, path: &Path, seed: u64) -> Result<(), ModelError> {
        write_checkpoint(BufWriter::new(File::create(path)?), &self.store.named_tensors())?;
        let meta = Metadata {
            config: self.config.clone(),
            seed,
            vocabulary: self.words.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(Self::metadata_path(path))?), &meta)?;
        Ok(())
    }

    /// Loads a checkpoint and its sidecar; returns the model and its seed.
    pub fn load(path: &Path) -> Result<(Self, u64), ModelError> {
        let meta: Metadata =
            serde_json::from_reader(BufReader::new(File::open(Self::metadata_path(path))?))?;
        meta.config.validate()?;
        let tensors = read_checkpoint(BufReader::new(File::open(path)?))?;
        let store = store_from_tensors(&meta.config, meta.vocabulary.len() + 1, tensors)?;
        Ok((Self::from_parts(meta.config, meta.vocabulary, store), meta.seed))
    }

    /// Like [`Model::load`], but fails unless the stored configuration is
    /// `expected`.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<(Self, u64), ModelError> {
        let (m, seed) = Self::load(path)?;
        if &m.config != expected {
            return Err(ModelError::Mismatch(format!(
                "checkpoint holds {:?}, expected {:?}",
                m.config, expected
            )));
        }
        Ok((m, seed))
    }
}
