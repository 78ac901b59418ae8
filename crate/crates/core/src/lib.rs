pub mod ar;
pub mod culture;
pub mod dsp;
pub mod grid;
pub mod harness;
pub mod patterns;
pub mod readout;
pub mod rng;
