use std::collections::HashMap;

use rand::Rng;

use super::{Arch, ModelConfig, ModelError};
use crate::numcore::Tensor;

pub const EMBEDDING: &str = "embedding.word.weight";

/// What a tensor is, which fixes its initialization and whether L2 applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    /// LSTM bias; the forget-gate block starts at 1.
    GateBias,
    Embedding,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
}

impl Param {
    pub fn decays(&self) -> bool {
        self.kind == ParamKind::Weight
    }
}

/// Named tensors in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor) {
        let name = name.into();
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, kind, value });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.params[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.position(name).map(|i| &mut self.params[i].value)
    }

    /// Values in store order, for the optimizer.
    pub fn values_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().map(|p| &mut p.value).collect()
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }
}

pub(crate) struct Spec {
    pub name: String,
    pub kind: ParamKind,
    pub rows: usize,
    pub cols: usize,
}

fn spec(out: &mut Vec<Spec>, name: String, kind: ParamKind, rows: usize, cols: usize) {
    out.push(Spec { name, kind, rows, cols });
}

fn lstm_specs(out: &mut Vec<Spec>, module: &str, layer: &str, input: usize, hidden: usize) {
    for dir in ["fw", "bw"] {
        let p = format!("{module}.{layer}_{dir}");
        spec(out, format!("{p}.w_ih"), ParamKind::Weight, input, 4 * hidden);
        spec(out, format!("{p}.w_hh"), ParamKind::Weight, hidden, 4 * hidden);
        spec(out, format!("{p}.bias"), ParamKind::GateBias, 1, 4 * hidden);
    }
}

pub(crate) fn module_name(arch: Arch) -> &'static str {
    match arch {
        Arch::Lstm => "lstm",
        Arch::LstmAttn => "lstm_attn",
        Arch::Ian => "ian",
        Arch::MemNet => "memnet",
        Arch::Aoa => "aoa",
    }
}

/// Every tensor the architecture needs, embedding first.
pub(crate) fn layout(config: &ModelConfig, vocab_rows: usize) -> Vec<Spec> {
    let d = config.embed_dim;
    let h = config.hidden;
    let k = 2 * h;
    let m = module_name(config.arch);
    let mut out = Vec::new();
    spec(&mut out, EMBEDDING.to_string(), ParamKind::Embedding, vocab_rows, d);
    let classifier_in = match config.arch {
        Arch::Lstm => {
            lstm_specs(&mut out, m, "encoder", d, h);
            k
        }
        Arch::LstmAttn => {
            lstm_specs(&mut out, m, "encoder", 2 * d, h);
            spec(&mut out, format!("{m}.query.weight"), ParamKind::Weight, d, k);
            k
        }
        Arch::Ian => {
            lstm_specs(&mut out, m, "context", d, h);
            lstm_specs(&mut out, m, "aspect", d, h);
            spec(&mut out, format!("{m}.context_query.weight"), ParamKind::Weight, k, k);
            spec(&mut out, format!("{m}.aspect_query.weight"), ParamKind::Weight, k, k);
            2 * k
        }
        Arch::MemNet => {
            lstm_specs(&mut out, m, "memory", d, h);
            spec(&mut out, format!("{m}.query.weight"), ParamKind::Weight, d, k);
            spec(&mut out, format!("{m}.hop.weight"), ParamKind::Weight, k, k);
            spec(&mut out, format!("{m}.hop.bias"), ParamKind::Bias, 1, k);
            k
        }
        Arch::Aoa => {
            lstm_specs(&mut out, m, "context", d, h);
            lstm_specs(&mut out, m, "aspect", d, h);
            k
        }
    };
    spec(&mut out, format!("{m}.classifier.weight"), ParamKind::Weight, classifier_in, 3);
    spec(&mut out, format!("{m}.classifier.bias"), ParamKind::Bias, 1, 3);
    out
}

/// Uniform `[-bound, bound]` weights, zero biases, forget-gate bias 1; the
/// embedding is copied from `embedding`.
pub(crate) fn init_store<R: Rng + ?Sized>(
    config: &ModelConfig,
    embedding: &Tensor,
    bound: f64,
    rng: &mut R,
) -> Result<ParamStore, ModelError> {
    if embedding.cols() != config.embed_dim {
        return Err(ModelError::Config(format!(
            "embedding table has dimension {}, config says {}",
            embedding.cols(),
            config.embed_dim
        )));
    }
    let mut store = ParamStore::default();
    for s in layout(config, embedding.rows()) {
        let value = match s.kind {
            ParamKind::Embedding => embedding.clone(),
            ParamKind::Weight => {
                let data = (0..s.rows * s.cols).map(|_| rng.gen_range(-bound..=bound)).collect();
                Tensor::from_vec(s.rows, s.cols, data)?
            }
            ParamKind::Bias => Tensor::zeros(s.rows, s.cols),
            ParamKind::GateBias => {
                let mut t = Tensor::zeros(s.rows, s.cols);
                let h = s.cols / 4;
                for x in &mut t.data_mut()[h..2 * h] {
                    *x = 1.0;
                }
                t
            }
        };
        store.push(s.name, s.kind, value);
    }
    Ok(store)
}

/// Rebuilds a store from checkpoint tensors, insisting on exactly the
/// expected names and shapes.
pub(crate) fn store_from_tensors(
    config: &ModelConfig,
    vocab_rows: usize,
    tensors: Vec<(String, Tensor)>,
) -> Result<ParamStore, ModelError> {
    let expected = layout(config, vocab_rows);
    if expected.len() != tensors.len() {
        return Err(ModelError::Mismatch(format!(
            "{} tensors stored, {} expected for {}",
            tensors.len(),
            expected.len(),
            config.arch
        )));
    }
    let mut by_name: HashMap<String, Tensor> = tensors.into_iter().collect();
    let mut store = ParamStore::default();
    for s in expected {
        let t = by_name
            .remove(&s.name)
            .ok_or_else(|| ModelError::Mismatch(format!("missing tensor `{}`", s.name)))?;
        if t.rows() != s.rows || t.cols() != s.cols {
            return Err(ModelError::Mismatch(format!(
                "`{}` is {}x{}, expected {}x{}",
                s.name,
                t.rows(),
                t.cols(),
                s.rows,
                s.cols
            )));
        }
        store.push(s.name, s.kind, t);
    }
    Ok(store)
}
