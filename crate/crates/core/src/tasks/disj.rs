//! Embeddings of set-disjointness pairs into task instances, so that the
//! task answer at a designated place decides whether `a` and `b` intersect.

use super::generators::to_domain;
use super::instances::{DisjInstance, GraphInstance, QsaInstance, SequenceInstance};
use super::oracles::CycleKind;
use crate::error::{invalid, Error, Result};

/// `q = n`, `N = 2q + 1`, `d' = 1`. Element `2q + 1` averages, for each `i`,
/// element `2i - 1` when `a_i = 1` and element `2i` otherwise; element
/// `2i - 1` holds `+1` exactly when `b_i = 1` and every other element holds
/// `-1`. The average is `-1` exactly when the sets are disjoint.
pub fn embed_disj_qsa(d: &DisjInstance) -> Result<QsaInstance> {
    d.validate()?;
    let q = d.n();
    if q == 0 {
        return Err(invalid("DISJ instance must be non-empty"));
    }
    let n = 2 * q + 1;
    let mut z = vec![vec![-1.0]; n];
    for i in 1..=q {
        if d.b[i - 1] {
            z[2 * i - 2] = vec![1.0];
        }
    }
    let filler: Vec<usize> = (1..=q).collect();
    let mut y = vec![filler; n];
    y[n - 1] = (1..=q).map(|i| if d.a[i - 1] { 2 * i - 1 } else { 2 * i }).collect();
    QsaInstance::new(z, y, q)
}

/// Causal family instance whose last `n` outputs are `-1` exactly where
/// `a_i b_i = 1`.
pub fn embed_disj_causal_qsa(d: &DisjInstance) -> Result<QsaInstance> {
    d.validate()?;
    let n = d.n();
    if n == 0 {
        return Err(invalid("DISJ instance must be non-empty"));
    }
    let total = 2 * n + 1;
    let mut z = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let mut active = Vec::with_capacity(total);
    for i in 0..n {
        z.push(vec![if d.a[i] { -1.0 } else { 1.0 }]);
        y.push(vec![i + 1]);
        active.push(false);
    }
    z.push(vec![1.0]);
    y.push(vec![n + 1]);
    active.push(false);
    for i in 0..n {
        z.push(vec![0.0]);
        y.push(vec![if d.b[i] { i + 1 } else { n + 1 }]);
        active.push(true);
    }
    let inst = QsaInstance {
        n: total,
        q: 1,
        d_prime: 1,
        z,
        y,
        active,
    };
    inst.validate()?;
    Ok(inst)
}

/// Sequence of length `N = 2n + 1` over `[M]`: `x_1 = M` (zero),
/// `x_{i+1} = i + 1` when `a_i = 1` else `1`, and
/// `x_{i+n+1} = M - i - 1` when `b_i = 1` else `1`.
pub fn embed_disj_match3(d: &DisjInstance, m: u64) -> Result<SequenceInstance> {
    d.validate()?;
    let n = d.n();
    if n == 0 {
        return Err(invalid("DISJ instance must be non-empty"));
    }
    let total = 2 * n + 1;
    if m < total as u64 + 1 {
        return Err(invalid(format!("embedding needs M >= N + 1 (N = {total}, M = {m})")));
    }
    let mut x = vec![1u64; total];
    x[0] = m;
    for i in 1..=n {
        if d.a[i - 1] {
            x[i] = i as u64 + 1;
        }
        if d.b[i - 1] {
            x[i + n] = to_domain(m as i64 - i as i64 - 1, m);
        }
    }
    SequenceInstance::new(m, x)
}

/// Checks membership in the restricted domain of the two-layer Match3 model:
/// odd `N`, `x_1 = M`, `x_i ∈ {1, i}` for `2 <= i <= (N+1)/2`, and
/// `x_i ∈ {1, M - i + (N-1)/2}` for the rest.
pub fn check_match3_restricted(inst: &SequenceInstance) -> Result<()> {
    inst.validate()?;
    let n = inst.n;
    let m = inst.m;
    let fail = |msg: String| Err(Error::DomainViolation(msg));
    if n < 3 || n % 2 == 0 {
        return fail(format!("N = {n} must be odd and at least 3"));
    }
    if m < n as u64 + 1 {
        return fail(format!("M = {m} must be at least N + 1 = {}", n + 1));
    }
    if inst.x[0] != m {
        return fail(format!("x_1 = {} must be M = {m}", inst.x[0]));
    }
    let half = (n - 1) / 2;
    for pos in 2..=n {
        let v = inst.x[pos - 1];
        let alt = if pos <= half + 1 {
            pos as u64
        } else {
            m - pos as u64 + half as u64
        };
        if v != 1 && v != alt {
            return fail(format!("x_{pos} = {v} must be 1 or {alt}"));
        }
    }
    Ok(())
}

/// Recovers `(a, b)` from a restricted-domain sequence.
pub fn restricted_to_disj(inst: &SequenceInstance) -> Result<DisjInstance> {
    check_match3_restricted(inst)?;
    let n = (inst.n - 1) / 2;
    DisjInstance::new(
        (1..=n).map(|i| inst.x[i] != 1).collect(),
        (1..=n).map(|i| inst.x[i + n] != 1).collect(),
    )
}

fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Graph on `N` vertices built from `a, b ∈ {0,1}^n` with `n = (N/5)^2`
/// (cycle5) or `n = (N/4)^2` (dcycle3); `a` and `b` are read row-major as
/// square arrays. A cycle exists iff the sets intersect.
pub fn embed_disj_graph(d: &DisjInstance, kind: CycleKind) -> Result<GraphInstance> {
    d.validate()?;
    let side = exact_sqrt(d.n())
        .filter(|&s| s > 0)
        .ok_or_else(|| invalid(format!("n = {} is not a positive square", d.n())))?;
    let at = |v: &[bool], r: usize, c: usize| v[(r - 1) * side + (c - 1)];
    match kind {
        CycleKind::Cycle5 => {
            let n = 5 * side;
            let blk = side;
            let mut g = GraphInstance::empty(n, true);
            let mut link = |i: usize, j: usize, bit: bool| {
                if bit {
                    g.set_edge(i - 1, j - 1, true);
                    g.set_edge(j - 1, i - 1, true);
                }
            };
            for r in 1..=blk {
                for s in 1..=blk {
                    // block 1 -> block 2 carries a
                    link(r, blk + s, at(&d.a, r, s));
                    // block 4 -> block 5 carries b transposed
                    link(3 * blk + r, 4 * blk + s, at(&d.b, s, r));
                }
                // identity matchings 2 -> 3 -> 4 and 5 -> 1
                link(blk + r, 2 * blk + r, true);
                link(2 * blk + r, 3 * blk + r, true);
                link(4 * blk + r, r, true);
            }
            Ok(g)
        }
        CycleKind::Dcycle3 => {
            let n = 4 * side;
            let blk = side;
            let mut g = GraphInstance::empty(n, false);
            for r in 1..=blk {
                for s in 1..=blk {
                    // quarter 1 -> quarter 3 carries a
                    if at(&d.a, r, s) {
                        g.set_edge(r - 1, 2 * blk + s - 1, true);
                    }
                    // quarter 3 -> quarter 4 carries b transposed
                    if at(&d.b, s, r) {
                        g.set_edge(2 * blk + r - 1, 3 * blk + s - 1, true);
                    }
                }
                // quarter 4 -> quarter 1 identity
                g.set_edge(3 * blk + r - 1, r - 1, true);
            }
            Ok(g)
        }
    }
}
