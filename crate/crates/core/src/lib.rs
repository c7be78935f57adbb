pub mod analysis;
pub mod cluster;
pub mod css;
pub mod decoder;
pub mod det;
pub mod ec_round;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod microcluster;
pub mod pauli;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};
