//! Identity resolution for git author IDs (`Name <email>` strings).
//!
//! The pipeline runs in stages that hand off through files:
//!
//! 1. [`corpus`] ingests author-ID lines and parses them into name/email parts.
//! 2. [`filters`] decides which emails and names carry identity evidence.
//! 3. [`blocking`] links IDs sharing a valid email, an uncommon exact name, or a
//!    GitHub handle, and takes the transitive closure into blocks.
//! 4. [`similarity`] and [`classifier`] score every pair inside a block with
//!    Jaro-Winkler features and a random forest.
//! 5. [`resolution`] closes predicted links into alias groups and writes the
//!    alias map.
//! 6. [`evaluation`] scores alias groups against ground truth; [`synthgen`]
//!    produces synthetic corpora that come with that ground truth.

pub mod blocking;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod filters;
pub mod io;
pub mod resolution;
pub mod similarity;
pub mod synthgen;
pub mod union_find;

pub use error::{Error, Result};
