// `!(x > 0.0)`-style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Formality-labeled corpus mining and formality-aware n-best reranking.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`corpus`] loads bitext and labeled corpora and extracts vocabularies.
//! * [`prep`] cleans raw web bitext.
//! * [`lm`] trains add-k n-gram models and ranks a pool by perplexity difference.
//! * [`select`] turns formal/informal rankings into labeled corpora.
//! * [`pivot`] propagates labels to zero-shot pairs through a shared source side.
//! * [`rerank`] builds the relative-frequency lexicon and reorders n-best lists.
//! * [`scorer`] judges hypotheses against phrase-annotated references.
//! * [`pipeline`] wires the stages together and selects checkpoint windows.

pub mod corpus;
pub mod error;
pub mod lm;
pub mod pipeline;
pub mod pivot;
pub mod prep;
pub mod rerank;
pub mod scorer;
pub mod select;
pub mod synth;
pub mod textio;

pub use error::{Error, Result};
