//! Ingestion, pipeline orchestration and file formats around
//! [`polarscope_core`].

pub mod cache;
pub mod config;
pub mod embed;
pub mod error;
pub mod export;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod stages;
pub mod synth;

pub use error::{Error, Result};
