//! Active learning for multi-label review classification.
//!
//! A two-layer LSTM with a sigmoid head classifies reviews into aspect and
//! sentiment labels. The [`active_loop`] module repeatedly trains it, picks
//! the unlabeled reviews it is least sure about and asks for their labels.

pub mod active_loop;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod seqmodel;
pub mod taxonomy;

pub use error::{Error, Result};
