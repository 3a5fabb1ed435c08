//! Dual-key stealth addresses and a hash-chained variant for constrained
//! senders, with operation counting, a toy ledger and cost benchmarks.

pub mod error;
pub mod group;
pub mod par;

pub mod bench;
pub(crate) mod codec;
pub mod dksap;
pub mod iot;
pub mod ledger;
pub mod tx;

pub use error::{Error, Result};
