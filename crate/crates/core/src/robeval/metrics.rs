use serde::{Deserialize, Serialize};

use super::EvalError;

pub const CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

fn check(pred: &[usize], gold: &[usize]) -> Result<(), EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::Length {
            predictions: pred.len(),
            golds: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&c) = pred.iter().chain(gold).find(|&&c| c >= CLASSES) {
        return Err(EvalError::Class(c));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64, EvalError> {
    check(pred, gold)?;
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1, always over all three classes. A class
/// with zero precision and recall contributes 0.
///
/// ```
/// use posasc::robeval::macro_f1;
/// // golds pos, neu, neg; everything predicted pos
/// let f = macro_f1(&[2, 2, 2], &[2, 1, 0]).unwrap();
/// assert!((f - 1.0 / 6.0).abs() < 1e-12);
/// ```
pub fn macro_f1(pred: &[usize], gold: &[usize]) -> Result<f64, EvalError> {
    check(pred, gold)?;
    let mut tp = [0usize; CLASSES];
    let mut fp = [0usize; CLASSES];
    let mut fn_ = [0usize; CLASSES];
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let f1 = |c: usize| {
        let precision = if tp[c] + fp[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fp[c]) as f64 };
        let recall = if tp[c] + fn_[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fn_[c]) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    Ok((0..CLASSES).map(f1).sum::<f64>() / CLASSES as f64)
}

pub fn evaluate(pred: &[usize], gold: &[usize]) -> Result<Metrics, EvalError> {
    Ok(Metrics {
        accuracy: accuracy(pred, gold)?,
        macro_f1: macro_f1(pred, gold)?,
    })
}
