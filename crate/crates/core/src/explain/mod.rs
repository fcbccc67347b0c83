//! Token-level explanations: gradient saliency, recorded attention weights,
//! and static SVG/HTML renderings of both plus proximity density curves.

mod render;

pub use render::{heatmap_html, heatmap_svg, kde_svg, render_heatmap, render_kde, KdeSeries};

use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::corpus::Instance;
use crate::models::{ForwardTrace, Model, ModelConfig, ModelError};
use crate::numcore::Tensor;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("cannot explain an empty sentence")]
    Empty,
    #[error("no attention record `{name}` (available: {available})")]
    UnknownRecord { name: String, available: String },
    #[error("{what}: expected {expected} values, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid score {0}")]
    Score(f64),
    #[error("invalid curve: {0}")]
    Curve(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreKind {
    Saliency,
    Attention,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Saliency => "saliency",
            ScoreKind::Attention => "attention",
        }
    }
}

/// One score in `[0, 1]` per token, normalized so the largest is 1 (or all
/// zero). `aspect` marks the tokens to underline.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenScores {
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    pub kind: ScoreKind,
    pub aspect: Range<usize>,
}

impl TokenScores {
    /// Max-normalizes `raw`, which must be finite and nonnegative.
    pub fn new(tokens: Vec<String>, raw: &[f64], kind: ScoreKind, aspect: Range<usize>) -> Result<Self, ExplainError> {
        if tokens.is_empty() {
            return Err(ExplainError::Empty);
        }
        if raw.len() != tokens.len() {
            return Err(ExplainError::Length {
                what: "scores",
                expected: tokens.len(),
                got: raw.len(),
            });
        }
        if let Some(&bad) = raw.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(ExplainError::Score(bad));
        }
        let aspect = aspect.start.min(tokens.len())..aspect.end.min(tokens.len());
        Ok(Self {
            tokens,
            scores: normalize_max(raw),
            kind,
            aspect,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Divides by the maximum; an all-zero vector stays all zero.
///
/// ```
/// use posasc::explain::normalize_max;
/// assert_eq!(normalize_max(&[0.5, 2.0, 1.0]), vec![0.25, 1.0, 0.5]);
/// assert_eq!(normalize_max(&[0.0, 0.0]), vec![0.0, 0.0]);
/// ```
pub fn normalize_max(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// Anything that exposes class logits and their gradient with respect to the
/// input token vectors of an instance.
pub trait LogitGradient {
    fn logits(&self, instance: &Instance) -> Result<Vec<f64>, ExplainError>;

    /// `n × d` gradient of logit `class` with respect to each token vector.
    fn logit_gradient(&self, instance: &Instance, class: usize) -> Result<Tensor, ExplainError>;
}

impl LogitGradient for Model {
    fn logits(&self, instance: &Instance) -> Result<Vec<f64>, ExplainError> {
        Ok(self.forward_instance(instance)?.logits)
    }

    // pos-dp is scored with its expected weights, never a sampled mask
    fn logit_gradient(&self, instance: &Instance, class: usize) -> Result<Tensor, ExplainError> {
        let input = self.input(instance);
        let r = self.refinement::<rand_chacha::ChaCha8Rng>(&input, false, None)?;
        Ok(self.logit_input_gradient(&input, &r, class)?.1)
    }
}

/// Predicted class and the unnormalized per-token gradient norms of its logit.
pub fn gradient_norms<M: LogitGradient + ?Sized>(model: &M, instance: &Instance) -> Result<(usize, Vec<f64>), ExplainError> {
    if instance.tokens.is_empty() {
        return Err(ExplainError::Empty);
    }
    let class = crate::models::argmax(&model.logits(instance)?);
    let g = model.logit_gradient(instance, class)?;
    if g.rows() != instance.tokens.len() {
        return Err(ExplainError::Length {
            what: "gradient rows",
            expected: instance.tokens.len(),
            got: g.rows(),
        });
    }
    let norms = (0..g.rows())
        .map(|r| g.row_slice(r).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    Ok((class, norms))
}

/// Gradient saliency of the predicted-class logit: the Euclidean norm of each
/// token's embedding gradient, max-normalized.
pub fn saliency<M: LogitGradient + ?Sized>(model: &M, instance: &Instance) -> Result<TokenScores, ExplainError> {
    let (_, norms) = gradient_norms(model, instance)?;
    TokenScores::new(
        instance.surfaces().map(str::to_string).collect(),
        &norms,
        ScoreKind::Saliency,
        instance.aspect_range(),
    )
}

/// [`saliency`] for a saved checkpoint whose configuration must match `expected`.
pub fn saliency_from_checkpoint(path: &Path, expected: &ModelConfig, instance: &Instance) -> Result<TokenScores, ExplainError> {
    let (model, _) = Model::load_expecting(path, expected)?;
    saliency(&model, instance)
}

/// The attention record `name` of `trace`, max-normalized. Records over the
/// aspect alone (IAN's `aspect`) are labeled with the aspect tokens.
pub fn attention_scores(trace: &ForwardTrace, name: &str, instance: &Instance) -> Result<TokenScores, ExplainError> {
    let record = trace.record(name).ok_or_else(|| ExplainError::UnknownRecord {
        name: name.to_string(),
        available: trace
            .attention
            .iter()
            .map(|r| r.name.as_str())
            .collect::<Vec<_>>()
            .join(", "),
    })?;
    let n = instance.tokens.len();
    let (tokens, aspect): (Vec<String>, Range<usize>) = if record.weights.len() == n {
        (instance.surfaces().map(str::to_string).collect(), instance.aspect_range())
    } else if record.weights.len() == instance.aspect_len {
        (
            instance.aspect_surfaces().into_iter().map(str::to_string).collect(),
            0..instance.aspect_len,
        )
    } else {
        return Err(ExplainError::Length {
            what: "attention weights",
            expected: n,
            got: record.weights.len(),
        });
    };
    TokenScores::new(tokens, &record.weights, ScoreKind::Attention, aspect)
}
