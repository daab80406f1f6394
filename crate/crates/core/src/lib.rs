//! Cycle-level simulator of a superscalar out-of-order RV32IM processor.

pub mod asm;
pub mod config;
pub mod isa;
pub mod memsys;
pub mod predictor;
pub mod stats;
pub mod pipeline;
