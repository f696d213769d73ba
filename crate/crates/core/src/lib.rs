//! Privacy-preserving settlement for peer-to-peer energy markets: additive
//! secret sharing, Pedersen commitments, a distributed pricing loop and a
//! simulator that accounts for every bit exchanged.

pub mod error;
pub mod harness;
pub mod market;
pub mod numtheory;
pub mod pedersen;
pub mod protocol;
pub mod sharing;

pub use error::{Error, Result};
