//! The communication graph that simulates a transformer, the protocol that
//! runs on it, and the two-party cut used for bandwidth accounting.

mod graph;
mod partition;
mod simulate;
mod trace;

pub use graph::{build_congest_graph, tree_leaf_order, CongestGraph, NodeKind, Tree};
pub use partition::{alice_bob_partition, check_partition_order, cut_edges, cut_size, Partition, Side};
pub use simulate::{
    round_bound, simulate_transformer, simulate_transformer_with, Message, SimOptions, Simulation,
    ROUND_BOUND_CONSTANT,
};
pub use trace::{summaries_to_csv, CutReport, LayerRounds, ProtocolTrace, RoundBound, TraceSummary};
