//! Numeric kernel for the controller: dense matrices, a single LSTM cell with
//! exact backpropagation through time, softmax sampling and the ADAM rule.
//!
//! Everything is `f64` so finite-difference gradient checks stay reliable.

mod adam;
mod lstm;
mod matrix;
mod softmax;

pub use adam::AdamState;
pub use lstm::{LstmCell, LstmGrads, LstmStepCache, GATES};
pub use matrix::Matrix;
pub use softmax::{log_softmax, softmax, softmax_sample, Sample};

/// Default half-width of the uniform parameter initialisation.
pub const INIT_SCALE: f64 = 0.08;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
