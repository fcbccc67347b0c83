use super::{scale_rows, BiasMode, BiasedSentence, EmbeddedSentence, PosBiasError};

/// Per-token position weights for a sentence of `n` tokens with an aspect of
/// `m` tokens starting at `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionWeights {
    pub values: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub gamma: usize,
}

impl PositionWeights {
    /// Forces weight 1 on the aspect tokens themselves.
    pub fn keep_aspect(mut self) -> Self {
        for v in &mut self.values[self.gamma..self.gamma + self.m] {
            *v = 1.0;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Linear decay with token distance from the aspect span:
///
/// * `1 − (γ − i)/(n − m)` left of the aspect,
/// * `1/(n − m)` on the aspect,
/// * `1 − (i − γ − m + 1)/(n − m)` right of it.
///
/// A sentence that is all aspect (`n == m`) has nothing to down-weight and
/// gets all ones.
///
/// ```
/// use posasc::posbias::position_weights;
/// let p = position_weights(8, 1, 4).unwrap();
/// assert!((p.values[4] - 1.0 / 7.0).abs() < 1e-12);
/// assert!((p.values[0] - 3.0 / 7.0).abs() < 1e-12);
/// ```
pub fn position_weights(n: usize, m: usize, gamma: usize) -> Result<PositionWeights, PosBiasError> {
    if n == 0 || m == 0 || gamma + m > n {
        return Err(PosBiasError::Span(format!(
            "aspect [{gamma}, {}) in a sentence of {n} tokens",
            gamma + m
        )));
    }
    let values = if n == m {
        vec![1.0; n]
    } else {
        let ctx = (n - m) as f64;
        (0..n)
            .map(|i| {
                if i < gamma {
                    1.0 - (gamma - i) as f64 / ctx
                } else if i < gamma + m {
                    1.0 / ctx
                } else {
                    1.0 - (i - gamma - m + 1) as f64 / ctx
                }
            })
            .collect()
    };
    Ok(PositionWeights { values, n, m, gamma })
}

/// `h_i = p_i · e_i`.
pub fn apply_weights(v: &EmbeddedSentence, p: &PositionWeights) -> Result<BiasedSentence, PosBiasError> {
    scale_rows(v, &p.values, "position weights", BiasMode::Weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;
    use proptest::prelude::*;

    #[test]
    fn exact_values_n8_m1_g4() {
        let p = position_weights(8, 1, 4).unwrap();
        let expect = [3.0, 4.0, 5.0, 6.0, 1.0, 6.0, 5.0, 4.0].map(|x| x / 7.0);
        for (a, b) in p.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_and_boundary() {
        assert_eq!(position_weights(3, 3, 0).unwrap().values, vec![1.0; 3]);
        assert_eq!(position_weights(5, 1, 0).unwrap().values[4], 0.0);
        assert!(position_weights(4, 2, 3).is_err());
        assert!(position_weights(0, 1, 0).is_err());
    }

    #[test]
    fn keep_aspect_sets_span_to_one() {
        let p = position_weights(6, 2, 1).unwrap().keep_aspect();
        assert_eq!(&p.values[1..3], &[1.0, 1.0]);
        assert_eq!(p.values[0], 1.0 - 1.0 / 4.0);
    }

    #[test]
    fn apply_examples() {
        let v = EmbeddedSentence::new(Tensor::filled(8, 3, 1.0));
        let p = position_weights(8, 1, 4).unwrap();
        let h = apply_weights(&v, &p).unwrap();
        assert!(h.vectors.row_slice(4).iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-15));

        let ones = PositionWeights { values: vec![1.0; 8], n: 8, m: 1, gamma: 4 };
        assert_eq!(apply_weights(&v, &ones).unwrap().vectors, v.vectors);

        let p0 = position_weights(5, 1, 0).unwrap();
        let v5 = EmbeddedSentence::new(Tensor::filled(5, 2, 3.0));
        assert_eq!(apply_weights(&v5, &p0).unwrap().vectors.row_slice(4), &[0.0, 0.0]);

        assert!(apply_weights(&v5, &p).is_err());
    }

    fn configs() -> impl Strategy<Value = (usize, usize, usize)> {
        (2usize..=12)
            .prop_flat_map(|n| (Just(n), 1..n))
            .prop_flat_map(|(n, m)| (Just(n), Just(m), 0..=n - m))
    }

    proptest! {
        #[test]
        fn reflection_symmetry((n, m, g) in configs()) {
            let p = position_weights(n, m, g).unwrap();
            let q = position_weights(n, m, n - g - m).unwrap();
            for i in 0..n {
                prop_assert_eq!(p.values[i], q.values[n - 1 - i]);
            }
        }

        #[test]
        fn decays_away_from_aspect((n, m, g) in configs()) {
            let p = position_weights(n, m, g).unwrap().values;
            for i in 1..g {
                prop_assert!(p[i - 1] <= p[i]);
            }
            for i in g + m + 1..n {
                prop_assert!(p[i] <= p[i - 1]);
            }
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let adjacent = 1.0 - 1.0 / (n - m) as f64;
            let ctx_max = (0..n).filter(|i| !(g..g + m).contains(i)).map(|i| p[i]).fold(0.0, f64::max);
            if g > 0 { prop_assert_eq!(p[g - 1], adjacent); }
            if g + m < n { prop_assert_eq!(p[g + m], adjacent); }
            prop_assert_eq!(ctx_max, adjacent);
            for i in g..g + m {
                prop_assert_eq!(p[i], 1.0 / (n - m) as f64);
            }
        }
    }
}
