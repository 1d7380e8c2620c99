//! Learned, hallucination-robust scoring of image captions.
//!
//! A candidate caption is compared with its image and with every reference
//! caption through elementwise products and absolute differences of frozen
//! encoder embeddings ([`simvec`]). The resulting similarity tokens are read
//! jointly by a small transformer whose CLS output is mapped to a score in
//! `(0, 1)` ([`model`]). The crate also covers regression training against
//! human judgments ([`train`]) and the standard evaluation protocols
//! ([`eval`]): Kendall τ correlation, FOIL-style pairwise hallucination
//! accuracy, PASCAL-50S pairwise accuracy and inference timing.
//!
//! Encoders are not part of this crate. Embeddings arrive through a binary
//! cache ([`io::EmbeddingCache`]) or are stubbed deterministically
//! ([`io::stub_embed`]); [`synth`] builds complete synthetic suites from stubs.

pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod nn;
pub mod simvec;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
