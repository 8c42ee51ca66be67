use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Matrix};
use crate::error::{MonasError, Result};

/// Gate block order inside the stacked weight matrices.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Single-layer LSTM cell.
///
/// The four gates are stacked row-wise in the order of [`GATES`]: rows
/// `k*H..(k+1)*H` of `w`, `u` and `b` belong to gate `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    input_dim: usize,
    hidden_dim: usize,
    /// Input weights, `4H × I`.
    pub w: Matrix,
    /// Recurrent weights, `4H × H`.
    pub u: Matrix,
    /// Biases, `4H`.
    pub b: Vec<f64>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
    /// Gradient with respect to each step's input vector.
    pub inputs: Vec<Vec<f64>>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCell {
            input_dim,
            hidden_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim),
            u: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    pub fn uniform<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let w = Matrix::uniform(4 * hidden_dim, input_dim, scale, rng);
        let u = Matrix::uniform(4 * hidden_dim, hidden_dim, scale, rng);
        let b = (0..4 * hidden_dim)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        LstmCell {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn from_parts(w: Matrix, u: Matrix, b: Vec<f64>) -> Result<Self> {
        let hidden_dim = u.cols();
        let input_dim = w.cols();
        if w.rows() != 4 * hidden_dim || u.rows() != 4 * hidden_dim || b.len() != 4 * hidden_dim {
            return Err(MonasError::contract(format!(
                "inconsistent LSTM shapes: w {}x{}, u {}x{}, b {}",
                w.rows(),
                w.cols(),
                u.rows(),
                u.cols(),
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(MonasError::contract("LSTM biases must be finite"));
        }
        Ok(LstmCell {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn zero_grads(&self) -> LstmGrads {
        LstmGrads {
            w: Matrix::zeros(4 * self.hidden_dim, self.input_dim),
            u: Matrix::zeros(4 * self.hidden_dim, self.hidden_dim),
            b: vec![0.0; 4 * self.hidden_dim],
            inputs: Vec::new(),
        }
    }

    /// One forward step. Returns `(h_t, c_t, cache)`.
    pub fn forward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
        let hd = self.hidden_dim;
        if x.len() != self.input_dim || h_prev.len() != hd || c_prev.len() != hd {
            return Err(MonasError::contract(format!(
                "lstm_forward: got x={}, h={}, c={} for input_dim={}, hidden_dim={hd}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input_dim
            )));
        }
        let wx = self.w.matvec(x)?;
        let uh = self.u.matvec(h_prev)?;
        let pre: Vec<f64> = wx
            .iter()
            .zip(&uh)
            .zip(&self.b)
            .map(|((a, b), c)| a + b + c)
            .collect();

        let i: Vec<f64> = pre[0..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = pre[2 * hd..3 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = pre[3 * hd..4 * hd].iter().map(|v| v.tanh()).collect();

        let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();

        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            c: c.clone(),
            tanh_c,
            h: h.clone(),
        };
        Ok((h, c, cache))
    }

    /// Full backpropagation through time over `caches`, given the gradient of
    /// the loss with respect to every step's hidden output.
    pub fn backward(
        &self,
        caches: &[LstmStepCache],
        output_grads: &[Vec<f64>],
    ) -> Result<LstmGrads> {
        let hd = self.hidden_dim;
        if caches.len() != output_grads.len() {
            return Err(MonasError::contract(format!(
                "lstm_backward: {} caches but {} output gradients",
                caches.len(),
                output_grads.len()
            )));
        }
        for (cache, dh) in caches.iter().zip(output_grads) {
            if cache.x.len() != self.input_dim || cache.h.len() != hd || dh.len() != hd {
                return Err(MonasError::contract(
                    "lstm_backward: cache does not match cell dimensions",
                ));
            }
        }

        let mut grads = self.zero_grads();
        grads.inputs = vec![Vec::new(); caches.len()];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut da = vec![0.0; 4 * hd];

        for (t, cache) in caches.iter().enumerate().rev() {
            for k in 0..hd {
                let dh = output_grads[t][k] + dh_next[k];
                let (i, f, o, g) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k]);
                let tc = cache.tanh_c[k];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                let di = dc * g;
                let dg = dc * i;
                let df = dc * cache.c_prev[k];
                dc_next[k] = dc * f;

                da[k] = di * i * (1.0 - i);
                da[hd + k] = df * f * (1.0 - f);
                da[2 * hd + k] = d_o * o * (1.0 - o);
                da[3 * hd + k] = dg * (1.0 - g * g);
            }
            grads.w.add_outer(&da, &cache.x, 1.0);
            grads.u.add_outer(&da, &cache.h_prev, 1.0);
            for (gb, d) in grads.b.iter_mut().zip(&da) {
                *gb += d;
            }
            grads.inputs[t] = self.w.matvec_t(&da)?;
            dh_next = self.u.matvec_t(&da)?;
        }
        Ok(grads)
    }
}
