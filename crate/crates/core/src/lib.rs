pub mod balance;
pub mod costvolume;
pub mod distill;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod optimizer;
pub mod photometric;
pub mod scenesim;
pub mod temporal;

pub use error::{Error, Result};
