//! Fluency-aware training criteria and edit mechanics for text-based speech
//! editing: word-level masking, hierarchical boundary-smoothness and
//! contrastive prosody losses, edit splicing, and objective evaluation.

pub mod alignment;
pub mod criteria;
pub mod editing;
pub mod error;
pub mod harness;
pub mod masking;
pub mod spectral;

pub use error::{Error, Result};
