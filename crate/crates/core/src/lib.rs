//! Predicting whether a social-media post will be deleted, and why.
//!
//! The pipeline is: load a [`corpus::Corpus`], normalize and tokenize text
//! with [`textprep`], build TF-IDF vectors with [`features`], train a
//! classifier from [`models`] for one of the three [`setting::Setting`]s,
//! score it with [`eval`], and combine three trained bundles into a
//! [`cascade::CascadeBundle`] that checks drafts before they are posted.

pub mod analysis;
pub mod cascade;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod setting;
pub mod textprep;

pub use error::{Error, Result};
