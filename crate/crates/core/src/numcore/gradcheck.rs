/// Central-difference gradient estimate of `f` at `x`.
///
/// ```
/// use posasc::numcore::finite_diff_grad;
/// let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], 1e-5);
/// assert!((g[0] - 6.0).abs() < 1e-9);
/// ```
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`; two all-zero vectors
/// compare as 0.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Tape, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -3.0, 0.5], 1e-5);
        assert_eq!(g, vec![0.0; 3]);
    }

    /// loss = sum(tanh(x·W1 + b1)·W2), checked in both directions: backward
    /// against differences in W1, and differences in W2 against backward.
    #[test]
    fn agrees_with_backward_on_two_layer_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_t = |r, c| {
            let d = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Tensor::from_vec(r, c, d).unwrap()
        };
        let x = rand_t(3, 4);
        let w1 = rand_t(4, 5);
        let b1 = rand_t(1, 5);
        let w2 = rand_t(5, 2);

        let loss = |w1: &Tensor, w2: &Tensor| {
            let tape = Tape::new();
            let xv = tape.leaf(&x, false);
            let a = tape.leaf(w1, true);
            let b = tape.leaf(&b1, true);
            let c = tape.leaf(w2, true);
            let h = tape.tanh(tape.add_row(tape.matmul(xv, a).unwrap(), b).unwrap());
            let y = tape.sum(tape.matmul(h, c).unwrap());
            let grads = tape.backward(y).unwrap();
            let val = tape.value(y).data()[0];
            (val, grads.get(a).unwrap().clone(), grads.get(c).unwrap().clone())
        };
        let (_, g1, g2) = loss(&w1, &w2);

        let fd1 = finite_diff_grad(
            |v| loss(&Tensor::from_vec(4, 5, v.to_vec()).unwrap(), &w2).0,
            w1.data(),
            1e-5,
        );
        let fd2 = finite_diff_grad(
            |v| loss(&w1, &Tensor::from_vec(5, 2, v.to_vec()).unwrap()).0,
            w2.data(),
            1e-5,
        );
        assert!(relative_error(g1.data(), &fd1) < 1e-5);
        assert!(relative_error(&fd2, g2.data()) < 1e-5);
    }
}
