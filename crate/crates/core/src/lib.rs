//! Local-Global cross-sectional return models.
//!
//! The crate is organised bottom-up:
//!
//! - [`panel`]: trading calendars, feature/return panels, CSV I/O, preprocessing and a
//!   seeded synthetic market with planted Local-Global structure.
//! - [`embeddings`]: per-day language-model output vectors with strict timing semantics.
//! - [`lgmodel`]: the alpha/beta heads, the attention aggregator, the embedding map, masks
//!   and the four prediction variants, with hand-written backpropagation.
//! - [`training`]: supervised critic training, the Bernoulli mask policy, KL-penalised
//!   rewards and PPO alignment.
//! - [`backtest`]: decile portfolio simulation with proportional costs and evaluation metrics.

pub mod backtest;
pub mod embeddings;
pub mod error;
pub mod lgmodel;
pub mod panel;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
