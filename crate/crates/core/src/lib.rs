//! Zero-pronoun-specific neural network (ZPSNN) for resolving anaphoric
//! zero pronouns in pro-drop text.
//!
//! The pipeline reads CoNLL-2012 style documents ([`corpus`]), extracts
//! candidate antecedents for every anaphoric zero pronoun ([`candidates`]),
//! scores them with a context-based zero pronoun encoder plus a local and a
//! global candidate encoder ([`model`]), and trains/evaluates the resolver
//! with a softmax cross-entropy objective ([`train`]).

pub mod error;
pub mod nn;

pub use error::{Error, Result};
pub mod candidates;
pub mod config;
pub mod corpus;
pub mod model;
pub mod train;
