//! Diffusion-based samplers for unnormalized densities.
//!
//! Everything needed to sample a Boltzmann density `pi(x) ∝ exp(-E(x))` given
//! only the energy `E` and its gradient: benchmark energies, a variance-exploding
//! noise schedule, Monte Carlo score/weight estimators, a from-scratch MLP score
//! network with exact reverse-mode gradients, reverse-SDE samplers (trained
//! network or direct estimated-score), a replay-buffer training loop with
//! self-normalized importance weights, and optimal-transport/TVD evaluation
//! metrics.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! adds checkpoint file IO, and `parallel` (also default) enables rayon-backed
//! batch evaluation. All floating-point transcendentals go through `libm`, so
//! results are bit-reproducible across platforms for a fixed seed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod numerics;
pub mod sampler;
pub mod scorenet;
pub mod sde;
pub mod trainer;

pub use error::{Error, Result};
