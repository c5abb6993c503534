//! Quantum-jump thermodynamics of a pulsed two-level emitter coupled to a
//! low-excitation photon bath: exact and sampled trajectory ensembles with
//! per-trajectory work/heat bookkeeping, heat distributions and the
//! per-round exponential average ⟨e^{-β(ΔU-Q)}⟩, free-energy differences
//! under level shifts with absolute-shift inference, and a TCSPC layer
//! that synthesizes, parses and fits photon arrival-time histograms.
//!
//! Samplers are seeded and block-deterministic: a fixed seed gives
//! bit-identical results regardless of the worker count, and the
//! `parallel` feature (on by default) only changes how fast you get them.

// validation uses `!(x > 0.0)` deliberately so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod ensemble_io;
pub mod error;
pub mod exec;
pub mod model;
pub mod numeric;
pub mod report;
pub mod tcspc;
pub mod thermo;
pub mod trajectory;

pub use error::{Error, Result};
