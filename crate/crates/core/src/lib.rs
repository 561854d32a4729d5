//! Executable attention-layer constructions and the machinery to check them.
//!
//! The crate builds explicit transformer weights for sparse averaging, pair and
//! triple matching, and graph cycle detection; evaluates them with plain,
//! higher-order and graph attention engines; compares the results with
//! brute-force oracles; and replays models as round-synchronous message
//! passing on a fixed tree network with bit accounting.

pub mod certificates;
pub mod congest;
pub mod constructions;
mod error;
pub mod harness;
pub mod numerics;
pub mod tasks;
pub mod transformer;

pub use error::{Error, Result};
