pub mod band;
pub mod classical;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod montgomery;
pub mod oscillator;
pub mod quad;
pub mod roots;
pub mod selftest;
pub mod semiclassical;
pub mod spectrum;
pub mod table;

pub use error::{Error, Result};
