//! The five encoders, each fed the position-biased sentence `E` while the
//! aspect-side input is read from the raw embeddings `V`.

mod arch;
mod model;
mod params;

pub use model::{embed_and_bias, InstanceGrads, Model, ModelInput, Refinement, SparseRows};
pub use params::{Param, ParamKind, ParamStore};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::NumError;
use crate::posbias::{BiasMode, PosBiasError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    PosBias(#[from] PosBiasError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("checkpoint does not match the model: {0}")]
    Mismatch(String),
    #[error("checkpoint metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "lstm-attn")]
    LstmAttn,
    #[serde(rename = "ian")]
    Ian,
    #[serde(rename = "memnet")]
    MemNet,
    #[serde(rename = "aoa")]
    Aoa,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Lstm, Arch::LstmAttn, Arch::Ian, Arch::MemNet, Arch::Aoa];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Lstm => "lstm",
            Arch::LstmAttn => "lstm-attn",
            Arch::Ian => "ian",
            Arch::MemNet => "memnet",
            Arch::Aoa => "aoa",
        }
    }

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Arch::Lstm => "LSTM",
            Arch::LstmAttn => "LSTM-Attn",
            Arch::Ian => "IAN",
            Arch::MemNet => "MemNet",
            Arch::Aoa => "AOA",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "lstm" => Ok(Arch::Lstm),
            "lstm-attn" | "atae" | "atae-lstm" => Ok(Arch::LstmAttn),
            "ian" => Ok(Arch::Ian),
            "memnet" => Ok(Arch::MemNet),
            "aoa" => Ok(Arch::Aoa),
            other => Err(format!(
                "unknown architecture `{other}` (lstm, lstm-attn, ian, memnet, aoa)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub bias_mode: BiasMode,
    pub hidden: usize,
    pub embed_dim: usize,
    pub memnet_hops: usize,
    pub keep_aspect: bool,
    pub train_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Lstm,
            bias_mode: BiasMode::None,
            hidden: 300,
            embed_dim: 300,
            memnet_hops: 3,
            keep_aspect: false,
            train_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn new(arch: Arch, bias_mode: BiasMode) -> Self {
        Self {
            arch,
            bias_mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.embed_dim == 0 {
            return Err(ModelError::Config("hidden and embed_dim must be positive".into()));
        }
        if self.memnet_hops == 0 {
            return Err(ModelError::Config("memnet_hops must be at least 1".into()));
        }
        Ok(())
    }
}

/// Attention weights captured during a forward pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub name: String,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub logits: Vec<f64>,
    pub attention: Vec<AttentionRecord>,
}

impl ForwardTrace {
    /// Index of the largest logit; exact ties go to the lowest index.
    pub fn predicted(&self) -> usize {
        argmax(&self.logits)
    }

    pub fn record(&self, name: &str) -> Option<&AttentionRecord> {
        self.attention.iter().find(|r| r.name == name)
    }
}

/// Lowest index among the maximal entries.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
