//! Seeded instance generators. Every generator is a pure function of its
//! arguments: the same seed always yields the same instance.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::instances::{DisjInstance, GraphInstance, QsaInstance, SequenceInstance};
use crate::error::{invalid, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the closed unit ball of `R^d`.
pub fn unit_ball_point<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let radius = rng.gen::<f64>().powf(1.0 / d as f64);
    for x in &mut v {
        *x *= radius / len;
    }
    v
}

/// Random `q`-subset of `[n]`, 1-based, in sampling order.
pub fn random_subset<R: Rng>(n: usize, q: usize, rng: &mut R) -> Vec<usize> {
    sample(rng, n, q).into_iter().map(|j| j + 1).collect()
}

pub fn random_qsa(n: usize, q: usize, d_prime: usize, seed: u64) -> Result<QsaInstance> {
    if q == 0 || q > n || d_prime == 0 {
        return Err(invalid(format!("need 1 <= q <= N and d' >= 1 (N = {n}, q = {q}, d' = {d_prime})")));
    }
    let mut r = rng(seed);
    let z = (0..n).map(|_| unit_ball_point(d_prime, &mut r)).collect();
    let y = (0..n).map(|_| random_subset(n, q, &mut r)).collect();
    QsaInstance::new(z, y, q)
}

pub fn random_sequence(n: usize, m: u64, seed: u64) -> Result<SequenceInstance> {
    let mut r = rng(seed);
    SequenceInstance::new(m, (0..n).map(|_| r.gen_range(1..=m)).collect())
}

/// Residue of `v` mod `m` written in `[1, m]`.
pub fn to_domain(v: i64, m: u64) -> u64 {
    let r = v.rem_euclid(m as i64) as u64;
    if r == 0 {
        m
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantedLabel {
    /// Uniform sequence, nothing planted.
    E1,
    /// Uniform sequence with one zero-sum triple forced.
    E2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedDraw {
    pub instance: SequenceInstance,
    pub label: PlantedLabel,
    /// 0-based positions `(j1, j2, j3)` with `x_{j3} = -x_{j1} - x_{j2}`.
    pub triple: Option<[usize; 3]>,
}

pub fn gen_planted_match3(n: usize, m: u64, seed: u64) -> Result<PlantedDraw> {
    if n < 3 {
        return Err(invalid(format!("planting a triple needs N >= 3, got {n}")));
    }
    if m < n as u64 + 1 {
        return Err(invalid(format!("planted distribution needs M >= N + 1 (N = {n}, M = {m})")));
    }
    let mut r = rng(seed);
    let mut x: Vec<u64> = (0..n).map(|_| r.gen_range(1..=m)).collect();
    if r.gen_bool(0.5) {
        return Ok(PlantedDraw {
            instance: SequenceInstance::new(m, x)?,
            label: PlantedLabel::E1,
            triple: None,
        });
    }
    let idx = sample(&mut r, n, 3).into_vec();
    let (j1, j2, j3) = (idx[0], idx[1], idx[2]);
    x[j3] = to_domain(-(x[j1] as i64) - (x[j2] as i64), m);
    Ok(PlantedDraw {
        instance: SequenceInstance::new(m, x)?,
        label: PlantedLabel::E2,
        triple: Some([j1, j2, j3]),
    })
}

/// Uniform sequence with a zero-sum triple planted inside the window of
/// radius `k` around a random centre. Returns the centre (0-based).
pub fn gen_planted_local(n: usize, m: u64, k: usize, seed: u64) -> Result<(SequenceInstance, usize)> {
    if k == 0 || 2 * k + 1 > n {
        return Err(invalid(format!("need 1 <= K and 2K + 1 <= N (N = {n}, K = {k})")));
    }
    let mut r = rng(seed);
    let mut x: Vec<u64> = (0..n).map(|_| r.gen_range(1..=m)).collect();
    let centre = r.gen_range(0..n);
    let lo = centre.saturating_sub(k);
    let hi = (centre + k).min(n - 1);
    let others: Vec<usize> = (lo..=hi).filter(|&j| j != centre).collect();
    let pick = sample(&mut r, others.len(), 2).into_vec();
    let (j1, j2) = (others[pick[0]], others[pick[1]]);
    x[j2] = to_domain(-(x[centre] as i64) - (x[j1] as i64), m);
    Ok((SequenceInstance::new(m, x)?, centre))
}

/// Random graph without self-loops; each (unordered, if symmetric) pair is
/// an edge with probability `density`.
pub fn random_graph(n: usize, density: f64, symmetric: bool, seed: u64) -> Result<GraphInstance> {
    if !(0.0..=1.0).contains(&density) {
        return Err(invalid(format!("edge density {density} outside [0, 1]")));
    }
    let mut r = rng(seed);
    let mut g = GraphInstance::empty(n, symmetric);
    for i in 0..n {
        for j in 0..n {
            if i == j || (symmetric && j < i) {
                continue;
            }
            let bit = r.gen_bool(density);
            g.set_edge(i, j, bit);
            if symmetric {
                g.set_edge(j, i, bit);
            }
        }
    }
    Ok(g)
}

/// Random DISJ pair: disjoint with probability 1/2, otherwise intersecting
/// in at least one forced coordinate.
pub fn random_disj(n: usize, seed: u64) -> DisjInstance {
    let mut r = rng(seed);
    let mut a = vec![false; n];
    let mut b = vec![false; n];
    for k in 0..n {
        match r.gen_range(0..3) {
            0 => {}
            1 => a[k] = true,
            _ => b[k] = true,
        }
    }
    if n > 0 && r.gen_bool(0.5) {
        let k = r.gen_range(0..n);
        a[k] = true;
        b[k] = true;
    }
    DisjInstance { a, b }
}

/// Causal sparse-averaging family with `q = d' = 1` and `N = 2n + 1`: the
/// first `n + 1` elements carry `±1` data and no index set, the last `n`
/// point at one of the first `n + 1`.
pub fn gen_causal_qsa(n_total: usize, seed: u64) -> Result<QsaInstance> {
    if n_total < 3 || n_total % 2 == 0 {
        return Err(invalid(format!("causal family needs odd N >= 3, got {n_total}")));
    }
    let n = (n_total - 1) / 2;
    let mut r = rng(seed);
    let mut z = Vec::with_capacity(n_total);
    let mut y = Vec::with_capacity(n_total);
    let mut active = Vec::with_capacity(n_total);
    for i in 0..=n {
        z.push(vec![if r.gen_bool(0.5) { 1.0 } else { -1.0 }]);
        y.push(vec![i + 1]);
        active.push(false);
    }
    for _ in 0..n {
        z.push(vec![0.0]);
        y.push(vec![r.gen_range(1..=n + 1)]);
        active.push(true);
    }
    let inst = QsaInstance {
        n: n_total,
        q: 1,
        d_prime: 1,
        z,
        y,
        active,
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm2;
    use crate::tasks::{match_oracle, qsa_oracle, MatchVariant};

    #[test]
    fn unit_ball_points_are_inside() {
        let mut r = rng(3);
        for d in 1..6 {
            for _ in 0..100 {
                assert!(norm2(&unit_ball_point(d, &mut r)) <= 1.0);
            }
        }
    }

    #[test]
    fn planted_is_deterministic_and_detected() {
        for seed in 0..200 {
            let a = gen_planted_match3(12, 13, seed).unwrap();
            assert_eq!(a, gen_planted_match3(12, 13, seed).unwrap());
            if a.label == PlantedLabel::E2 {
                let bits = match_oracle(&a.instance, MatchVariant::Match3).unwrap();
                for j in a.triple.unwrap() {
                    assert!(bits[j]);
                }
            }
        }
        assert!(gen_planted_match3(12, 12, 0).is_err());
    }

    #[test]
    fn planted_branch_is_balanced() {
        let e1 = (0..10_000)
            .filter(|&s| gen_planted_match3(8, 11, s).unwrap().label == PlantedLabel::E1)
            .count();
        let frac = e1 as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn causal_family_shape() {
        let inst = gen_causal_qsa(9, 4).unwrap();
        assert_eq!(inst, gen_causal_qsa(9, 4).unwrap());
        assert!(inst.active[5..].iter().all(|&a| a));
        assert!(inst.active[..5].iter().all(|&a| !a));
        assert!(inst.y[5..].iter().all(|y| y[0] <= 5));

        let mut pointing = inst.clone();
        pointing.z[4] = vec![1.0];
        for i in 5..9 {
            pointing.y[i] = vec![5];
        }
        let out = qsa_oracle(&pointing);
        assert!((5..9).all(|i| out[(i, 0)] == 1.0));
    }

    #[test]
    fn graphs_have_no_self_loops() {
        let g = random_graph(10, 0.9, true, 1).unwrap();
        assert!((0..10).all(|i| !g.edge(i, i)));
        assert!(g.is_symmetric());
    }
}
