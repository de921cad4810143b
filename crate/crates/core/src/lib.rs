//! Content-concealing visual descriptors: encoder, inversion adversaries,
//! losses, training loops, and the privacy/utility evaluation bench.
//!
//! This crate is the algorithmic core and is `no_std`-compatible (with
//! `alloc`). Everything here is deterministic given an explicit seed: the
//! same configuration and seed reproduce training runs bit-for-bit on one
//! platform. File formats, image I/O, and the command-line surface live in
//! the companion `ninja-lab` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attack;
pub mod basedesc;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fmap;
pub mod gradcheck;
pub mod imaging;
pub mod inversion;
pub mod losses;
pub mod metrics;
pub mod ninjanet;
pub mod nn;
pub mod num;
pub mod optim;
pub mod perceptual;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod types;

pub use error::Error;
pub use num::Real;
