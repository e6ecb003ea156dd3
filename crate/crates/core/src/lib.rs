//! Day-level multi-label prediction from multimodal lifelog streams.
//!
//! The pipeline turns raw timestamped sensor readings into per-day feature
//! grids, renders continuous channels as N-hour block images, encodes both
//! modalities with dedicated CNN branches, fuses them with CBAM and a
//! two-layer LSTM, trains with focal loss, and combines trained models with
//! soft voting, hard voting, or the confidence-gated UALRE ensemble.

pub mod autograd;
pub mod cli;
pub mod encoders;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod report;
pub mod synthgen;
pub mod training;
pub mod types;

pub use error::{Error, Result};
