//! Cycle-consistent adversarial training for unpaired image-to-image
//! translation, on a small CPU tensor engine.

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod interface;
pub mod networks;
pub mod objectives;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
