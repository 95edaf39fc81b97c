use super::{EstimatorParams, Gradients, TrainConfig};
use crate::error::{Error, Result};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut EstimatorParams, grads: &Gradients, t: &TrainConfig) -> Result<()> {
    if grads.config().layer_shapes() != params.config().layer_shapes() {
        return Err(Error::invalid("gradients belong to a different network"));
    }
    if let Some(i) = grads.values().iter().position(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged(format!(
            "non-finite gradient at parameter {i}"
        )));
    }
    let mut state = std::mem::replace(&mut params.adam, AdamState::new(0));
    state.step += 1;
    let correct1 = 1.0 - t.beta1.powf(state.step as f64);
    let correct2 = 1.0 - t.beta2.powf(state.step as f64);
    for (((p, &g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads.values())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = t.beta1 * *m + (1.0 - t.beta1) * g;
        *v = t.beta2 * *v + (1.0 - t.beta2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *p -= t.learning_rate * m_hat / (v_hat.sqrt() + t.eps);
    }
    params.adam = state;
    Ok(())
}
