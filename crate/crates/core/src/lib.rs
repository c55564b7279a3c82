//! Core algorithms for viseme-guided word classification over feature sequences.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. Everything here is pure computation over in-memory values; file
//! formats, checkpoints and the command line live in the `lipgen` crate.
//!
//! Module map:
//!
//! * [`lexicon`]: pronouncing-dictionary parsing, stress stripping, the
//!   18-group phoneme-to-viseme table and multi-hot viseme labels.
//! * [`array`], [`ops`], [`optim`], [`gradcheck`]: dense `f64` arrays, the
//!   differentiable primitives, Adam with cosine annealing, and a central
//!   finite-difference checker.
//! * [`tafm`]: temporal attention fusion over class prototypes.
//! * [`corpus`]: deterministic synthetic feature-sequence corpus.
//! * [`model`], [`train`]: the two-headed classifier, its losses, mixup,
//!   the training loop and evaluation.
//! * [`diagnostics`]: the gradient-check suite run by `lipgen gradcheck`.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod array;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod lexicon;
pub(crate) mod math;
pub mod model;
pub mod ops;
pub mod optim;
pub mod rng;
pub mod tafm;
pub mod train;

pub use array::{NumericArray, Parameter};
pub use error::{Error, Result};

/// Number of viseme groups used by the auxiliary head.
pub const VISEME_COUNT: usize = 18;
