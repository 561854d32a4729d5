//! Attention engines and model composition.

mod higher_order;
pub mod identity;
mod mlp;
mod model;
mod unit;

pub use higher_order::{
    attend_graph, attend_higher_order, check_adjacency, edge_bit_position, edge_bits,
    GraphAttentionUnit, HigherOrderUnit, Kappa, MAX_SCORE_CELLS,
};
pub use mlp::{ElementMap, FnMap, IdentityMap, MapDescriptor, MlpLayer};
pub use model::{
    run_transformer, Head, Layer, LayerDocument, ModelDocument, ModelTrace, MultiHeadLayer,
    Provenance, TransformerModel, MODEL_SCHEMA_VERSION,
};
pub use unit::{attend, AttentionUnit};
