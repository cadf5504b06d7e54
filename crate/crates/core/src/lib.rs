pub mod cli;
pub mod data;
pub mod dequant;
pub mod error;
pub mod likelihood;
pub mod objectives;
pub mod oracles;
pub mod rng;
pub mod score;
pub mod sde;
pub mod solvers;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
