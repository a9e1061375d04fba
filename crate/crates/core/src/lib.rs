//! Neuro-symbolic representation learning over joint-embedding predictive
//! architectures: a deterministic differentiable-computation core, FP-Growth
//! association-rule mining, rule-informed energy objectives, and
//! gradient-guided Langevin rule discovery.
//!
//! The crate is `no_std` + `alloc`; all float math goes through `libm` so
//! seeded runs reproduce bit-for-bit across platforms. IO, file formats, and
//! the CLI live in the companion `rijepa-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod math;
pub mod rng;
pub mod tensor;
pub mod tape;
pub mod nn;
pub mod opt;
pub mod rulemine;
pub mod model;
pub mod objectives;
pub mod discover;
pub mod experiments;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::Tensor;
