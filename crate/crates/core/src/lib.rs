//! Joint detection and decoding of LDPC codes on partial-response channels.

pub mod baseline;
pub mod channel;
pub mod cli;
pub mod error;
pub mod gf2;
pub mod ldpc;
pub mod numerics;
pub mod oracle;
pub mod prbp;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
