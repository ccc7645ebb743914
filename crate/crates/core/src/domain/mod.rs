//! Shared domain types: categorical context spaces, embeddings, interaction
//! histories and seeded random streams.

mod context;
mod history;
mod rng;

pub use context::{Context, ContextSpace, Factor};
pub use history::{Embedding, History, Interaction};
pub use rng::{RngStream, StreamPurpose};
