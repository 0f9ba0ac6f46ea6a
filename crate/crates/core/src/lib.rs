//! Hybrid GAN laboratory.
//!
//! A generator is trained against a single discriminator that treats both
//! real data and the teacher-forced output of a masked autoregressive model
//! as real. Around that sit the synthetic multi-mode datasets, the
//! mode-collapse metrics, white-box attacks with latent-projection
//! purification, and the experiment runner.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod defense;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod tensor;
pub mod training;

pub use error::{Error, Result, TensorError};
pub use tensor::{Tape, Tensor, Var};
