//! Core algorithms for desk-scale SAR anomaly detection.
//!
//! The crate covers the full processing chain on synthetic polarimetric
//! scenes: speckle simulation with known ground truth, self-supervised
//! despeckling, adversarial-autoencoder reconstruction, and covariance
//! change detection with a Reed-Xiaoli baseline and ROC/AUC scoring.
//!
//! Everything here is pure computation over owned buffers; file formats,
//! checkpoints and the command line live in the companion `sarad` crate.
//! The crate is `no_std`-compatible (with `alloc`) when built without the
//! default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod aae;
pub mod despeckler;
pub mod detect;
mod error;
pub mod eval;
pub mod image;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod speckle;

pub use error::{Error, Result};
pub use image::{ComplexSlcImage, Domain, Patch, SarImage};
pub use rng::CounterRng;
