//! Stochastic patching process.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod mcmc;
pub mod prior;
pub mod relmodel;
pub mod projection;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Result, SppError};
pub use grid::{ArrayShape, Partition, Patch, Rect};
pub use prior::HyperParams;
