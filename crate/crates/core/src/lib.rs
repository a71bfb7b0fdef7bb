//! Sequential sparse recovery with SISTA, its exact unfolding into a stacked
//! recurrent network, and supervised training of the unfolded network.

pub mod cli;
pub mod datagen;
pub mod error;
pub(crate) mod fsutil;
pub mod linops;
pub mod rng;
pub mod sparse_recovery;
pub mod training;
pub mod unfolded_net;

pub use error::{Error, Result};
