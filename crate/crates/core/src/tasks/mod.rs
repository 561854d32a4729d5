//! Task definitions, brute-force oracles and instance generators.

mod disj;
mod files;
mod generators;
mod instances;
mod oracles;

pub use disj::{
    check_match3_restricted, embed_disj_causal_qsa, embed_disj_graph, embed_disj_match3,
    embed_disj_qsa, restricted_to_disj,
};
pub use files::{Instance, InstanceFile};
pub use generators::{
    gen_causal_qsa, gen_planted_local, gen_planted_match3, random_disj, random_graph, random_qsa,
    random_sequence, random_subset, rng, to_domain, unit_ball_point, PlantedDraw, PlantedLabel,
};
pub use instances::{DisjInstance, GraphInstance, QsaInstance, SequenceInstance};
pub use oracles::{
    cycle_oracle, cycle_oracle_brute, match_oracle, match_oracle_with, qsa_oracle, CycleKind,
    IndexRule, MatchVariant,
};
