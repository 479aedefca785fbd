//! Numerical core of `polarscope`: time-resolved embedding of retweet
//! networks, density clustering of users, cluster-level divergence and
//! toxicity series, and the statistics used to relate them.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! event ingestion and the command line live in the `polarscope` crate.

#![no_std]

extern crate alloc;

pub mod clustering;
pub mod dynamics;
pub mod error;
pub mod linalg;
mod math;
pub mod sparse;
pub mod spectral;
pub mod stats;
pub mod window;

pub use error::{Error, Result};
