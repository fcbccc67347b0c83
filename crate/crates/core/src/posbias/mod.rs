//! Position bias: per-token weights that decay with distance from the aspect,
//! Bernoulli token dropout driven by the same weights, and the
//! aspect–opinion proximity statistic with its kernel density estimate.

mod dropout;
mod kde;
mod proximity;
mod weights;

pub use dropout::{apply_dropout, sample_dropout_mask, DropoutMask};
pub use kde::{kde, silverman_bandwidth, uniform_grid, Bandwidth};
pub use proximity::{aspect_proximity, read_proximity_tsv, ProximityRecord, ProximitySample};
pub use weights::{apply_weights, position_weights, PositionWeights};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::Tensor;

#[derive(Debug, Error)]
pub enum PosBiasError {
    #[error("invalid span: {0}")]
    Span(String),
    #[error("{what} has {got} entries but the sentence has {expected} tokens")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("kernel density estimate needs at least one sample")]
    NoSamples,
    #[error("kernel density estimate needs at least one grid point")]
    EmptyGrid,
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("proximity file line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How sentence embeddings are refined before the encoder sees them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BiasMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "pos-wt")]
    Weight,
    #[serde(rename = "pos-dp")]
    Dropout,
}

impl BiasMode {
    pub const ALL: [BiasMode; 3] = [BiasMode::None, BiasMode::Weight, BiasMode::Dropout];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasMode::None => "none",
            BiasMode::Weight => "pos-wt",
            BiasMode::Dropout => "pos-dp",
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(BiasMode::None),
            "pos-wt" | "poswt" | "weight" => Ok(BiasMode::Weight),
            "pos-dp" | "posdp" | "dropout" => Ok(BiasMode::Dropout),
            other => Err(format!("unknown bias mode `{other}` (none, pos-wt, pos-dp)")),
        }
    }
}

/// Token vectors `e_0 … e_{n−1}` of one sentence, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedSentence {
    pub vectors: Tensor,
}

impl EmbeddedSentence {
    pub fn new(vectors: Tensor) -> Self {
        Self { vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }
}

/// Refined vectors `h_0 … h_{n−1}`, same shape as the source sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasedSentence {
    pub vectors: Tensor,
    pub mode: BiasMode,
}

/// Scales row `i` of `v` by `factors[i]`.
pub(crate) fn scale_rows(
    v: &EmbeddedSentence,
    factors: &[f64],
    what: &'static str,
    mode: BiasMode,
) -> Result<BiasedSentence, PosBiasError> {
    if factors.len() != v.len() {
        return Err(PosBiasError::Length {
            what,
            got: factors.len(),
            expected: v.len(),
        });
    }
    let mut out = v.vectors.clone();
    for (r, &k) in factors.iter().enumerate() {
        for x in out.row_slice_mut(r) {
            *x *= k;
        }
    }
    Ok(BiasedSentence { vectors: out, mode })
}
