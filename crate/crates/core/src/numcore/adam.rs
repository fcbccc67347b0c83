use serde::{Deserialize, Serialize};

use super::{NumError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates for a list of parameter tensors.
///
/// Moments are allocated the first time a parameter receives a gradient, so
/// frozen tensors cost nothing.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Option<Tensor>>,
    second: Vec<Option<Tensor>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            step: 0,
            first: vec![None; n_params],
            second: vec![None; n_params],
        }
    }

    /// One update. `grads[i] == None` leaves `params[i]` untouched;
    /// `weight_decay[i]` is the L2 coefficient folded into that gradient.
    pub fn update<P: AsMut<Tensor>>(
        &mut self,
        params: &mut [P],
        grads: &[Option<Tensor>],
        weight_decay: &[f64],
    ) -> Result<(), NumError> {
        if params.len() != self.first.len()
            || grads.len() != params.len()
            || weight_decay.len() != params.len()
        {
            return Err(NumError::Shape(format!(
                "adam over {} slots given {} params, {} grads, {} decays",
                self.first.len(),
                params.len(),
                grads.len(),
                weight_decay.len()
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);

        for (i, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            let Some(grad) = grad else { continue };
            let param = param.as_mut();
            if grad.shape() != param.shape() {
                return Err(NumError::Shape(format!(
                    "gradient {:?} for parameter {:?}",
                    grad.shape(),
                    param.shape()
                )));
            }
            let (r, c) = (param.rows(), param.cols());
            let m = self.first[i].get_or_insert_with(|| Tensor::zeros(r, c));
            let v = self.second[i].get_or_insert_with(|| Tensor::zeros(r, c));
            let wd = weight_decay[i];
            for (((p, &g), m), v) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g + wd * *p;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Single Adam step applying the same L2 coefficient to every tensor.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    weight_decay: f64,
) -> Result<(), NumError> {
    let grads: Vec<Option<Tensor>> = grads.iter().cloned().map(Some).collect();
    let decay = vec![weight_decay; params.len()];
    state.update(params, &grads, &decay)
}
