//! Side-information-aided approximate message passing for grant-free random
//! access with temporally correlated device activity.
//!
//! A base station with `M` antennas receives pilots from `N` devices, a small
//! random subset of which is active in each coherence block. Activity follows
//! a two-state Markov chain, so a device that was active in the previous block
//! is likely to still be active. This crate runs MMV-AMP on each block and
//! feeds the previous block's converged pseudo-observations back as side
//! information into both the MMSE denoiser and the likelihood-ratio detector.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: scenario generation (activity chains, channels, pilots, `Y = SX + Z`)
//! - [`denoiser`]: closed-form MMSE shrinkage with and without side information
//! - [`oracle`]: brute-force four-case posterior and likelihood ratio used to check it
//! - [`amp`]: the AMP iteration and block-to-block chaining
//! - [`state_evolution`]: Monte Carlo state evolution of the pseudo-noise level
//! - [`detector`]: LLR / energy-threshold activity test, metrics, ROC sweeps
//! - [`harness`]: config files, presets, parallel Monte Carlo experiments, CSV output

pub mod amp;
pub mod denoiser;
pub mod detector;
pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod state_evolution;

pub use error::{Error, Result};
