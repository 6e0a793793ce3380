//! Local context aware sentiment classification.
//!
//! A multi-head self-attention classifier that decides the polarity of a
//! target term, helped by three local-context mechanisms: tag embeddings
//! (LCE), an auxiliary tag-prediction loss (LCP) and feature masking of
//! distant tokens (CDM). Everything, down to the tensors and the
//! differentiation tape, is implemented in this crate.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod local_context;
pub mod model;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
