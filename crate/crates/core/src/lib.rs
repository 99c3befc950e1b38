pub mod analysis;
pub mod catalog;
pub mod category;
pub mod enumerator;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod realizer;
pub mod rng;
pub mod sample;
pub mod sampler;
pub mod taxonomy;

pub use error::{Error, Result};
