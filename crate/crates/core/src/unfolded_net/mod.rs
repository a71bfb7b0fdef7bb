//! The stacked-RNN view of SISTA: forward and reverse-mode passes for the
//! generic, untied-SISTA and tied-SISTA parameterizations, the exact
//! SISTA-to-RNN weight mapping, and checks that tie the two views together.

pub mod checkpoint;
mod equivalence;
pub mod gradcheck;
pub mod instances;
mod mapping;
mod model;
mod rnn;

pub use equivalence::{compare_with_sista, equivalence_check, EquivalenceReport};
pub use mapping::{map_layers, map_sista_to_rnn, pull_back_layers, SistaLayer};
pub use model::{forward_tied, Network, Parameterization, TiedSistaNet, UntiedSistaParams};
pub use rnn::{Connectivity, ForwardTape, StackedRnnParams};
