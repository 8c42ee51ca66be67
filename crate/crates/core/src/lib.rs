//! Multi-objective neural architecture search.
//!
//! An LSTM controller samples architectures slot by slot, an [`evaluator`]
//! scores them on accuracy and resource cost, a multi-objective [`reward`]
//! drives REINFORCE updates, and the [`engine`] tracks the best architecture,
//! the accuracy/energy Pareto front and search statistics.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod controller;
pub mod cost;
pub mod engine;
pub mod error;
pub mod evaluator;
pub mod kv;
pub mod nn;
pub mod pareto;
pub mod report;
pub mod reward;
pub mod space;

pub use error::{MonasError, Result};
