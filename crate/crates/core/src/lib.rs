//! Reinforcement-learning explorer for web GUIs.
//!
//! Pages are abstracted into fixed-dimension embeddings, a value network
//! predicts one value per cell of an `N x N` page grid, and each actionable
//! element is valued by summing the cells inside a circle around its centre.
//! Exploration is driven by an episodic-times-global curiosity reward.

pub mod actions;
pub mod bench;
pub mod dom;
pub mod env;
pub mod error;
pub mod explorer;
pub mod geom;
pub mod grid;
pub mod hashing;
pub mod nn;
pub mod reward;
pub mod rng;

pub use error::{EnvError, Error, Result};
