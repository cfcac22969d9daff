//! Attention-based encoder-decoder for generating regulated Song iambics.
//!
//! The crate is `no_std` (it needs `alloc`); file IO, checkpoints and the
//! command line live in the companion `cipai` crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod generation;
pub mod seq2seq;
pub mod training;
