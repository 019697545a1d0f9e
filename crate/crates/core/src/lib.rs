//! Bit-accurate simulator of a fixed-point LIF spiking network accelerator
//! for MNIST, with a full-precision STDP reference model and design-space
//! analysis tools.

pub mod analysis;
pub mod encoding;
pub mod engine;
pub mod error;
pub mod fixedpoint;
pub mod io;
pub mod reference;

pub use error::{Error, Result};
