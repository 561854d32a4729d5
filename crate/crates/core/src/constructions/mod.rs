//! Weight builders for every positive construction, each emitting a model
//! whose parameter formulas and constants are recorded in its provenance.

mod common;
mod cycles;
mod local;
mod matching;
mod multilayer;
mod qsa;
mod registry;

pub use common::{output_bits, Threshold, TrigFeatures};
pub use cycles::{build_cycle_detector, cycle_scale, CycleFeatures};
pub use local::{build_match3_local, local_window, LocalDecode, LocalFeatures};
pub use matching::{
    build_match2, build_match3_bigram, build_match3_restricted_twolayer,
    build_match3_third_order, build_match3_third_order_with, eval_match3_restricted,
    match_scale, shift_scale, third_order_scores, BigramFeatures, FirstHalfFlags,
    PositionedTrig, ShiftFeatures,
};
pub use multilayer::{
    build_match3_multilayer, endpoint_scale, multilayer_found_trace, round_robin,
    PairSchedule, ScheduleEntry, ScheduleStep, SingleElement,
};
pub use qsa::{
    build_qsa_fixed, build_qsa_inf, certificate_frac_bits, qsa_alpha, qsa_attention_weights,
    worst_face_gap, CertificateTable, QsaBuildSpec, QsaFixedFeatures, QsaInfFeatures,
};
pub use registry::{load_model, resolve_map, MAP_NAMES};
