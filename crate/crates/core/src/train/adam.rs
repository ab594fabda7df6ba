use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ModelParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter array at step `t` (1-based).
pub fn update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    h: &AdamHyper,
) {
    let c1 = 1.0 - h.beta1.powi(t as i32);
    let c2 = 1.0 - h.beta2.powi(t as i32);
    for (((p, &g), mi), vi) in theta
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = h.beta1 * *mi + (1.0 - h.beta1) * g;
        *vi = h.beta2 * *vi + (1.0 - h.beta2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        let zeros: Vec<Tensor> = params.named().iter().map(|(_, t)| t.zeros_like()).collect();
        AdamState {
            hyper,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// Applies one update. A non-finite gradient aborts before any parameter changes.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        let grads = grads.named();
        if grads.len() != self.m.len() {
            return Err(Error::InvalidArgument(
                "gradient set does not match optimizer state".into(),
            ));
        }
        for (name, g) in &grads {
            if !g.data().iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        self.t += 1;
        for (((_, p), (_, g)), (m, v)) in params
            .named_mut()
            .into_iter()
            .zip(&grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            update(
                p.data_mut(),
                g.data(),
                m.data_mut(),
                v.data_mut(),
                self.t,
                &self.hyper,
            );
        }
        Ok(())
    }
}
