//! Terrain-aware navigation for legged robots: semantic and proprioceptive
//! cost maps, camera reliability scoring, gait-aware planning, and a
//! closed-loop simulator for comparing policies.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod config;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod metrics;
pub mod planner;
pub mod proprio;
pub mod reliability;
pub mod sim;

pub use error::{Error, Result};
