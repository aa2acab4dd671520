//! Denoising of event-camera binary images with a non-overlap median filter
//! (NOMF) and a behavioral model of the SRAM in-memory-computing array that
//! executes it.
//!
//! The crate is organized around the processing pipeline:
//!
//! * [`event_io`] — AER event parsing, serialization, and a synthetic scene
//!   generator with ground-truth annotations.
//! * [`framer`] — accumulation of event streams into binary frames (EBBI),
//!   plus PBM serialization.
//! * [`filters`] — software reference filters: overlapping binary median,
//!   NOMF, and the nearest-neighbour event filter.
//! * [`imc_sim`] — bitline discharge-race model of the SRAM array running
//!   NOMF in filter mode, with Monte-Carlo device mismatch.
//! * [`cost_model`] — closed-form read/write/op counting, energy, latency,
//!   and throughput accounting for each method.
//! * [`tracker_eval`] — region proposal, overlap tracking, and IoU-based
//!   precision/recall evaluation.

pub mod cli;
pub mod cost_model;
pub mod event_io;
pub mod filters;
pub mod framer;
pub mod geom;
pub mod imc_sim;
pub mod pbm;
pub mod tracker_eval;

pub use event_io::{Event, Polarity};
pub use framer::EbbiFrame;
pub use geom::{BoundingBox, SensorGeometry};
