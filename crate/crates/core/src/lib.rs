//! MIMO wiretap-channel simulation with friendly jamming.

pub mod aefj;
pub mod channel;
pub mod conventional;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mine;
pub mod neuralnet;

pub use error::{Error, Result};
