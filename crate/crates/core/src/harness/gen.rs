use std::path::Path;

use serde_json::json;

use super::params::parse_cycle_kind;
use crate::error::{invalid, Result};
use crate::tasks::{
    embed_disj_graph, embed_disj_match3, embed_disj_qsa, gen_causal_qsa, gen_planted_match3,
    random_disj, CycleKind, DisjInstance, Instance, InstanceFile,
};

pub const GEN_TASKS: [&str; 5] = ["planted-match3", "causal-qsa", "disj-qsa", "disj-match3", "disj-graph"];

/// What to generate. `a` and `b` are hex strings whose bit `k` (least
/// significant first) is coordinate `k` of the DISJ pair; without them the
/// pair is drawn from `seed`.
#[derive(Debug, Clone, Default)]
pub struct GenRequest {
    pub task: String,
    pub n: Option<usize>,
    pub m: Option<u64>,
    pub kind: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub seed: u64,
}

fn parse_hex_bits(s: &str, len: usize) -> Result<Vec<bool>> {
    let digits = s.trim().trim_start_matches("0x");
    let bad = || invalid(format!("'{s}' is not a hex bit string"));
    let mut bits = Vec::with_capacity(4 * digits.len());
    for c in digits.chars().rev() {
        let v = c.to_digit(16).ok_or_else(bad)?;
        bits.extend((0..4).map(|k| (v >> k) & 1 == 1));
    }
    if bits.iter().skip(len).any(|&b| b) {
        return Err(invalid(format!("'{s}' sets bits beyond the {len} coordinates")));
    }
    bits.resize(len, false);
    Ok(bits)
}

fn disj_pair(req: &GenRequest, len: usize) -> Result<DisjInstance> {
    match (&req.a, &req.b) {
        (Some(a), Some(b)) => DisjInstance::new(parse_hex_bits(a, len)?, parse_hex_bits(b, len)?),
        (None, None) => Ok(random_disj(len, req.seed)),
        _ => Err(invalid("give both a and b, or neither")),
    }
}

/// Builds the instance file for `req`. Same request, same bytes.
pub fn generate(req: &GenRequest) -> Result<InstanceFile> {
    let n_or = |d: usize| req.n.unwrap_or(d);
    let (n, params, label, instance, source) = match req.task.as_str() {
        "planted-match3" => {
            let n = n_or(64);
            let m = req.m.unwrap_or(257);
            let draw = gen_planted_match3(n, m, req.seed)?;
            let label = json!({ "distribution": draw.label, "triple": draw.triple });
            (n, json!({ "N": n, "M": m }), Some(label), Instance::Sequence(draw.instance), None)
        }
        "causal-qsa" => {
            let n = n_or(9);
            (n, json!({ "N": n }), None, Instance::Qsa(gen_causal_qsa(n, req.seed)?), None)
        }
        "disj-qsa" | "disj-match3" => {
            let n = n_or(13);
            if n < 3 || n % 2 == 0 {
                return Err(invalid(format!("{} needs odd N >= 3, got {n}", req.task)));
            }
            let d = disj_pair(req, (n - 1) / 2)?;
            let label = json!({ "intersect": d.disj() });
            if req.task == "disj-qsa" {
                (n, json!({ "N": n }), Some(label), Instance::Qsa(embed_disj_qsa(&d)?), Some(Instance::Disj(d)))
            } else {
                let m = req.m.unwrap_or(n as u64 + 1);
                let inst = embed_disj_match3(&d, m)?;
                (n, json!({ "N": n, "M": m }), Some(label), Instance::Sequence(inst), Some(Instance::Disj(d)))
            }
        }
        "disj-graph" => {
            let kind_s = req.kind.clone().unwrap_or_else(|| "cycle5".into());
            let kind = parse_cycle_kind(&kind_s)?;
            let divisor = if kind == CycleKind::Cycle5 { 5 } else { 4 };
            let n = n_or(4 * divisor);
            if n == 0 || n % divisor != 0 {
                return Err(invalid(format!("{kind_s} embedding needs N divisible by {divisor}, got {n}")));
            }
            let side = n / divisor;
            let d = disj_pair(req, side * side)?;
            let label = json!({ "intersect": d.disj() });
            let g = embed_disj_graph(&d, kind)?;
            (n, json!({ "N": n, "kind": kind_s }), Some(label), Instance::Graph(g), Some(Instance::Disj(d)))
        }
        other => {
            return Err(invalid(format!(
                "unknown generator '{other}', expected one of {}",
                GEN_TASKS.join(", ")
            )))
        }
    };
    Ok(InstanceFile {
        task: req.task.clone(),
        n,
        params,
        seed: Some(req.seed),
        label,
        instance,
        source,
    })
}

/// Generates and writes the instance to `out`.
pub fn cmd_gen(req: &GenRequest, out: &Path) -> Result<InstanceFile> {
    let f = generate(req)?;
    f.write(out)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_bits_are_little_endian() {
        assert_eq!(parse_hex_bits("5", 4).unwrap(), vec![true, false, true, false]);
        assert!(parse_hex_bits("10", 4).is_err());
        assert!(parse_hex_bits("g", 4).is_err());
    }

    #[test]
    fn same_request_same_bytes() {
        let req = GenRequest {
            task: "planted-match3".into(),
            seed: 1,
            ..Default::default()
        };
        assert_eq!(generate(&req).unwrap().to_json().unwrap(), generate(&req).unwrap().to_json().unwrap());
    }
}
