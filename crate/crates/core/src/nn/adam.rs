use serde::{Deserialize, Serialize};

use crate::error::{MonasError, Result};

/// ADAM moments and hyperparameters for a list of flat parameter tensors.
///
/// The update is an ascent step: callers pass gradients of the quantity to
/// maximise and `step` adds `lr · m̂ / (√v̂ + ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for tensors of the given lengths, β1=0.9, β2=0.999, ε=1e-8.
    pub fn new(lr: f64, shapes: &[usize]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn check_shapes(&self, lens: impl ExactSizeIterator<Item = usize>) -> Result<()> {
        if lens.len() != self.m.len() {
            return Err(MonasError::contract(format!(
                "adam: {} tensors, state has {}",
                lens.len(),
                self.m.len()
            )));
        }
        for (k, (n, m)) in lens.zip(&self.m).enumerate() {
            if n != m.len() {
                return Err(MonasError::contract(format!(
                    "adam: tensor {k} has {n} entries, moment has {}",
                    m.len()
                )));
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        self.check_shapes(params.iter().map(|p| p.len()))?;
        self.check_shapes(grads.iter().map(|g| g.len()))?;
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(MonasError::contract("adam betas must lie in [0, 1)"));
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] += self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
