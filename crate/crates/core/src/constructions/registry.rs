//! Rebuilds element maps from their serialized descriptors so that saved
//! models can be reloaded and evaluated.

use std::sync::Arc;

use serde::de::DeserializeOwned;

use super::common::{Threshold, TrigFeatures};
use super::cycles::CycleFeatures;
use super::local::{LocalDecode, LocalFeatures};
use super::matching::{BigramFeatures, FirstHalfFlags, PositionedTrig, ShiftFeatures};
use super::multilayer::{ScheduleEntry, ScheduleStep, SingleElement};
use super::qsa::{QsaFixedFeatures, QsaInfFeatures};
use crate::error::{invalid, Result};
use crate::transformer::{ElementMap, IdentityMap, MapDescriptor, TransformerModel};

fn params<T: DeserializeOwned>(d: &MapDescriptor) -> Result<T> {
    serde_json::from_value(d.params.clone())
        .map_err(|e| invalid(format!("bad parameters for map '{}': {e}", d.name)))
}

fn nonzero_modulus(m: u64) -> Result<()> {
    if m == 0 {
        return Err(invalid("modulus M must be positive"));
    }
    Ok(())
}

fn pairs_fit(ell: usize, pairs: &[(usize, usize)]) -> Result<()> {
    if pairs.len() > ell {
        return Err(invalid(format!("{} pairs do not fit ℓ = {ell} slots", pairs.len())));
    }
    Ok(())
}

/// Every map name a builder in this crate can emit.
pub const MAP_NAMES: &[&str] = &[
    "identity",
    "trig_features",
    "threshold",
    "shift_features",
    "bigram_features",
    "positioned_trig",
    "first_half_flags",
    "qsa_fixed_features",
    "qsa_inf_features",
    "local_features",
    "local_decode",
    "schedule_entry",
    "schedule_step",
    "single_element",
    "cycle_features",
];

pub fn resolve_map(d: &MapDescriptor) -> Result<Arc<dyn ElementMap>> {
    Ok(match d.name.as_str() {
        "identity" => {
            let dim = d
                .params
                .get("dim")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| invalid("identity map needs an integer 'dim'"))?;
            Arc::new(IdentityMap { dim: dim as usize })
        }
        "trig_features" => {
            let m: TrigFeatures = params(d)?;
            nonzero_modulus(m.m)?;
            Arc::new(m)
        }
        "threshold" => {
            let m: Threshold = params(d)?;
            if !(m.lo < m.hi) {
                return Err(invalid(format!("threshold needs lo < hi, got {} and {}", m.lo, m.hi)));
            }
            Arc::new(m)
        }
        "shift_features" => Arc::new(params::<ShiftFeatures>(d)?),
        "bigram_features" => {
            let m: BigramFeatures = params(d)?;
            nonzero_modulus(m.m)?;
            Arc::new(m)
        }
        "positioned_trig" => {
            let m: PositionedTrig = params(d)?;
            nonzero_modulus(m.m)?;
            Arc::new(m)
        }
        "first_half_flags" => Arc::new(params::<FirstHalfFlags>(d)?),
        "qsa_fixed_features" => {
            let m: QsaFixedFeatures = params(d)?;
            m.check()?;
            Arc::new(m)
        }
        "qsa_inf_features" => {
            let m: QsaInfFeatures = params(d)?;
            m.check()?;
            Arc::new(m)
        }
        "local_features" => {
            let m: LocalFeatures = params(d)?;
            nonzero_modulus(m.m)?;
            m.check()?;
            Arc::new(m)
        }
        "local_decode" => {
            let m: LocalDecode = params(d)?;
            nonzero_modulus(m.m)?;
            Arc::new(m)
        }
        "schedule_entry" => {
            let m: ScheduleEntry = params(d)?;
            nonzero_modulus(m.m)?;
            pairs_fit(m.ell, &m.next)?;
            Arc::new(m)
        }
        "schedule_step" => {
            let m: ScheduleStep = params(d)?;
            nonzero_modulus(m.m)?;
            pairs_fit(m.ell, &m.prev)?;
            pairs_fit(m.ell, m.next.as_deref().unwrap_or(&[]))?;
            Arc::new(m)
        }
        "single_element" => {
            let m: SingleElement = params(d)?;
            nonzero_modulus(m.m)?;
            Arc::new(m)
        }
        "cycle_features" => Arc::new(params::<CycleFeatures>(d)?),
        other => return Err(invalid(format!("unknown element map '{other}'"))),
    })
}

/// Parses a model document, resolving every element map by name.
pub fn load_model(json: &str) -> Result<TransformerModel> {
    TransformerModel::from_json(json, &resolve_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::MapDescriptor;

    #[test]
    fn every_builder_reloads_bit_exactly() {
        use crate::constructions::*;
        use crate::tasks::{random_graph, random_qsa, random_sequence, CycleKind};
        let seq = |n, m| random_sequence(n, m, 3).unwrap().to_matrix();
        let cases = vec![
            (build_match2(5, 7).unwrap(), seq(5, 7)),
            (build_match3_bigram(5, 7).unwrap(), seq(5, 7)),
            (build_match3_third_order(4, 7).unwrap(), seq(4, 7)),
            (build_match3_restricted_twolayer(5, 7).unwrap(), seq(5, 7)),
            (build_match3_multilayer(6, 11, 6).unwrap(), seq(6, 11)),
            (build_match3_local(6, 11, 1, 2).unwrap(), seq(6, 11)),
            (build_qsa_fixed(&QsaBuildSpec::new(8, 2, 2, 0.1, 5).unwrap()).unwrap(), random_qsa(8, 2, 2, 1).unwrap().to_matrix()),
            (build_qsa_inf(8, 2, 2, 0.1).unwrap(), random_qsa(8, 2, 2, 1).unwrap().to_matrix()),
            (build_cycle_detector(CycleKind::Dcycle3, 5).unwrap(), random_graph(5, 0.4, false, 2).unwrap().to_matrix()),
        ];
        for (model, x) in cases {
            let reloaded = load_model(&model.to_json().unwrap()).unwrap();
            let a = crate::transformer::run_transformer(&model, &x).unwrap();
            let b = crate::transformer::run_transformer(&reloaded, &x).unwrap();
            assert_eq!(a.data(), b.data(), "{}", model.provenance().builder);
        }
    }

    #[test]
    fn unknown_name_rejected() {
        let d = MapDescriptor::new("nope", serde_json::json!({}));
        assert!(resolve_map(&d).is_err());
    }

    #[test]
    fn bad_threshold_rejected() {
        let d = MapDescriptor::new("threshold", serde_json::json!({"lo": 0.5, "hi": 0.1}));
        assert!(resolve_map(&d).is_err());
    }
}
