//! Closed-form conjugate posteriors.
//!
//! All records are plain values: `update` returns a new posterior and
//! `observe` is the in-place single-observation form used by agents.

mod blr;
mod nig;
mod niw;

pub use blr::BlrPosterior;
pub use nig::NigPosterior;
pub use niw::{GaussianDraw, NiwPosterior};
