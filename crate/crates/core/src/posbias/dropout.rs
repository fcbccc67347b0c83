use rand::Rng;

use super::{scale_rows, BiasMode, BiasedSentence, EmbeddedSentence, PosBiasError, PositionWeights};

/// Keep (`true`) / drop (`false`) decision per token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropoutMask {
    pub values: Vec<bool>,
}

impl DropoutMask {
    pub fn factors(&self) -> Vec<f64> {
        self.values.iter().map(|&z| if z { 1.0 } else { 0.0 }).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `z_i ~ Bernoulli(p_i)`, drawn independently in token order.
pub fn sample_dropout_mask<R: Rng + ?Sized>(p: &PositionWeights, rng: &mut R) -> DropoutMask {
    DropoutMask {
        values: p.values.iter().map(|&pi| rng.gen_bool(pi.clamp(0.0, 1.0))).collect(),
    }
}

/// `h_i = z_i · e_i`.
pub fn apply_dropout(v: &EmbeddedSentence, z: &DropoutMask) -> Result<BiasedSentence, PosBiasError> {
    scale_rows(v, &z.factors(), "dropout mask", BiasMode::Dropout)
}
