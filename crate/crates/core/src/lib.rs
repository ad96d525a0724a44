//! Gated recurrent networks with hand-derived backpropagation through time.
//!
//! Provides the base LSTM, five parameter-reduced variants (LSTM4, LSTM5,
//! LSTM4a, LSTM5a, LSTM6) and a simple RNN, all behind the
//! [`cells::RecurrentCell`] trait and selectable by name through
//! [`cells::CellRegistry`]. Training uses RMSprop on row-wise MNIST sequences.

pub mod bptt;
pub mod cells;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
mod init;
pub mod linalg;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
