//! Level blending with variational autoencoders over tile embeddings.

pub mod blend;
mod charset;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod explorer;
pub mod fixtures;
pub mod manifest;
pub mod metrics;
pub mod playability;
pub mod render;
pub mod seed;
pub mod tiles;
pub mod vae;

pub use error::{Error, Result};
