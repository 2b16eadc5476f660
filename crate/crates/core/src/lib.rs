pub mod error;
pub mod linalg;
pub mod measures;
pub mod prng;
pub mod selftest;
pub mod protocols;
pub mod sim;
pub mod spa;
pub mod states;

pub use error::{Error, Result};
