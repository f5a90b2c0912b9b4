pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod fourier;
pub mod image;
pub mod model;
pub mod rng;
pub mod scm;
pub mod stain;

pub use error::{Error, Result};
