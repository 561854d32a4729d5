use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{cholesky_solve, dot, norm2, FixedFormat, Matrix};

/// Default constant in `m' = ceil(C0 * q * ln N)`.
pub const DEFAULT_C0: f64 = 16.0;
/// Restricted-isometry level the certificate bounds are stated for.
pub const DELTA: f64 = 0.25;
/// Off-support bound `δ / (1 - 2δ)` at `δ = 1/4`.
pub const OFF_SUPPORT_BOUND: f64 = 0.5;
pub const ON_SUPPORT_TOLERANCE: f64 = 1e-9;
pub const MAX_RESAMPLES: usize = 10;
/// Exhaustive validation below this many subsets, sampling above it.
pub const EXHAUSTIVE_PROBE_LIMIT: u128 = 5000;
pub const SAMPLED_PROBES: usize = 200;

/// Columns `u_1, ..., u_N` of an `m' x N` sign matrix scaled by `1/sqrt(m')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankDocument", into = "BankDocument")]
pub struct KeyBank {
    n: usize,
    q: usize,
    m_prime: usize,
    seed: Option<u64>,
    /// Column-major: `columns[j]` is `u_{j+1}`.
    columns: Vec<Vec<f64>>,
    attempts: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
enum BankDocument {
    Rademacher {
        #[serde(rename = "N")]
        n: usize,
        q: usize,
        m_prime: usize,
        seed: u64,
        #[serde(default = "one")]
        attempts: usize,
    },
    Explicit {
        q: usize,
        columns: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

impl TryFrom<BankDocument> for KeyBank {
    type Error = Error;
    fn try_from(doc: BankDocument) -> Result<Self> {
        match doc {
            BankDocument::Rademacher {
                n,
                q,
                m_prime,
                seed,
                attempts,
            } => {
                let mut bank = KeyBank::rademacher(n, q, m_prime, seed)?;
                bank.attempts = attempts;
                Ok(bank)
            }
            BankDocument::Explicit { q, columns } => KeyBank::from_columns(columns, q),
        }
    }
}

impl From<KeyBank> for BankDocument {
    fn from(b: KeyBank) -> Self {
        match b.seed {
            Some(seed) => BankDocument::Rademacher {
                n: b.n,
                q: b.q,
                m_prime: b.m_prime,
                seed,
                attempts: b.attempts,
            },
            None => BankDocument::Explicit {
                q: b.q,
                columns: b.columns,
            },
        }
    }
}

/// `ceil(c0 * q * ln N)`, at least 1.
pub fn bank_rows(n: usize, q: usize, c0: f64) -> usize {
    ((c0 * q as f64 * (n as f64).ln()).ceil() as usize).max(1)
}

impl KeyBank {
    /// Unvalidated bank drawn from `seed`.
    pub fn rademacher(n: usize, q: usize, m_prime: usize, seed: u64) -> Result<Self> {
        if n == 0 || q == 0 || q > n || m_prime == 0 {
            return Err(invalid(format!(
                "key bank needs N >= q >= 1 and m' >= 1 (N = {n}, q = {q}, m' = {m_prime})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (m_prime as f64).sqrt();
        let columns = (0..n)
            .map(|_| (0..m_prime).map(|_| if rng.gen::<bool>() { s } else { -s }).collect())
            .collect();
        Ok(Self {
            n,
            q,
            m_prime,
            seed: Some(seed),
            columns,
            attempts: 1,
        })
    }

    /// Bank with caller-supplied columns.
    pub fn from_columns(columns: Vec<Vec<f64>>, q: usize) -> Result<Self> {
        let n = columns.len();
        let m_prime = columns.first().map_or(0, Vec::len);
        if n == 0 || m_prime == 0 || columns.iter().any(|c| c.len() != m_prime) {
            return Err(invalid("explicit bank needs equal-length non-empty columns"));
        }
        if q == 0 || q > n {
            return Err(invalid(format!("q = {q} outside [1, {n}]")));
        }
        Ok(Self {
            n,
            q,
            m_prime,
            seed: None,
            columns,
            attempts: 1,
        })
    }

    /// Orthonormal bank from the Sylvester Hadamard matrix, `N` a power of two.
    pub fn hadamard(n: usize, q: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!("Hadamard bank needs N a power of two, got {n}")));
        }
        let s = 1.0 / (n as f64).sqrt();
        let columns = (0..n)
            .map(|j| {
                (0..n)
                    .map(|r| if (r & j).count_ones() % 2 == 0 { s } else { -s })
                    .collect()
            })
            .collect();
        Self::from_columns(columns, q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime
    }

    /// Seed the entries were drawn from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Draws needed before validation succeeded.
    pub fn attempts(&self) -> usize {
        self.attempts
    }

    /// `u_j` for 1-based `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j - 1]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.m_prime, self.n, |r, c| self.columns[c][r])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// 1-based support.
    pub y: Vec<usize>,
    pub w: Vec<f64>,
}

/// Violations of the certificate conditions, all zero for a valid one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub max_on_support_error: f64,
    pub max_off_support: f64,
    pub norm: f64,
}

impl CertificateCheck {
    pub fn holds(&self, q: usize) -> bool {
        self.max_on_support_error <= ON_SUPPORT_TOLERANCE
            && self.max_off_support <= OFF_SUPPORT_BOUND
            && self.norm <= 2.0 * (q as f64).sqrt()
    }
}

pub fn check_certificate(bank: &KeyBank, y: &[usize], w: &[f64]) -> CertificateCheck {
    let mut on = 0.0f64;
    let mut off = 0.0f64;
    for j in 1..=bank.n() {
        let ip = dot(bank.column(j), w);
        if y.contains(&j) {
            on = on.max((ip - 1.0).abs());
        } else {
            off = off.max(ip.abs());
        }
    }
    CertificateCheck {
        max_on_support_error: on,
        max_off_support: off,
        norm: norm2(w),
    }
}

fn interpolate(bank: &KeyBank, support: &[usize], targets: &[f64]) -> Result<Vec<f64>> {
    let k = support.len();
    let gram = Matrix::from_fn(k, k, |a, b| dot(bank.column(support[a]), bank.column(support[b])));
    let coef = cholesky_solve(&gram, targets)?;
    let mut w = vec![0.0; bank.m_prime()];
    for (c, &j) in coef.iter().zip(support) {
        for (wi, &u) in w.iter_mut().zip(bank.column(j)) {
            *wi += c * u;
        }
    }
    Ok(w)
}

/// Plain least-norm `w` with `<u_i, w> = 1` on `y`, no off-support repair.
pub fn least_norm_interpolant(bank: &KeyBank, y: &[usize]) -> Result<Vec<f64>> {
    if y.iter().any(|&j| j == 0 || j > bank.n()) {
        return Err(invalid("support index outside the bank"));
    }
    interpolate(bank, y, &vec![1.0; y.len()])
}

/// Least-norm `w` with `<u_i, w> = 1` on `y`.
///
/// When some off-support column sees more than 1/2, the worst such column is
/// pinned to 0 and the interpolation is redone; this repeats until the bounds
/// hold or the pinned set reaches `m' / 2` columns.
pub fn dual_certificate(bank: &KeyBank, y: &[usize]) -> Result<DualCertificate> {
    if y.is_empty() || y.len() > bank.q() {
        return Err(invalid(format!(
            "support of size {} outside [1, {}]",
            y.len(),
            bank.q()
        )));
    }
    for (a, &j) in y.iter().enumerate() {
        if j == 0 || j > bank.n() || y[..a].contains(&j) {
            return Err(invalid(format!("bad support index {j}")));
        }
    }
    let mut support = y.to_vec();
    let mut targets = vec![1.0; y.len()];
    loop {
        let w = interpolate(bank, &support, &targets)?;
        let mut worst: Option<(usize, f64)> = None;
        for j in 1..=bank.n() {
            if support.contains(&j) {
                continue;
            }
            let ip = dot(bank.column(j), &w).abs();
            if ip > OFF_SUPPORT_BOUND && worst.map_or(true, |(_, v)| ip > v) {
                worst = Some((j, ip));
            }
        }
        match worst {
            None => {
                let check = check_certificate(bank, y, &w);
                if !check.holds(y.len()) {
                    return Err(Error::CertificateFailure(format!(
                        "support {y:?}: on-support error {:e}, off-support {:.4}, norm {:.4} (bound {:.4})",
                        check.max_on_support_error,
                        check.max_off_support,
                        check.norm,
                        2.0 * (y.len() as f64).sqrt()
                    )));
                }
                return Ok(DualCertificate { y: y.to_vec(), w });
            }
            Some((j, ip)) => {
                if support.len() + 1 > bank.m_prime() / 2 {
                    return Err(Error::CertificateFailure(format!(
                        "support {y:?}: column {j} keeps inner product {ip:.4} > 1/2"
                    )));
                }
                support.push(j);
                targets.push(0.0);
            }
        }
    }
}

/// Rounds a certificate onto the grid of `fmt`.
pub fn quantize_certificate(w: &[f64], fmt: FixedFormat) -> Vec<f64> {
    w.iter().map(|&x| fmt.quantize(x)).collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn all_subsets(n: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=q).collect();
    loop {
        out.push(cur.clone());
        let mut i = q;
        while i > 0 && cur[i - 1] == n - q + i {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for k in i..q {
            cur[k] = cur[k - 1] + 1;
        }
    }
}

/// Subsets used to validate a bank: all of them when there are at most
/// 5000, otherwise 200 drawn with `seed`.
pub fn probe_subsets(n: usize, q: usize, seed: u64) -> Vec<Vec<usize>> {
    if binomial(n, q) <= EXHAUSTIVE_PROBE_LIMIT {
        return all_subsets(n, q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f5b_5e75);
    (0..SAMPLED_PROBES)
        .map(|_| {
            let mut s: Vec<usize> = sample(&mut rng, n, q).into_iter().map(|j| j + 1).collect();
            s.sort_unstable();
            s
        })
        .collect()
}

/// All `q`-subsets of the first `k` columns.
pub fn prefix_probe(k: usize, q: usize) -> Vec<Vec<usize>> {
    all_subsets(k, q)
}

/// Draws banks until one certifies every probe subset, at most 10 times.
///
/// Attempt `k > 0` uses the `k`-th output of a generator seeded with `seed`.
pub fn sample_key_bank_with(
    n: usize,
    q: usize,
    seed: u64,
    c0: f64,
    probes: Option<&[Vec<usize>]>,
) -> Result<KeyBank> {
    if n == 0 || q == 0 || q > n {
        return Err(invalid(format!("key bank needs N >= q >= 1 (N = {n}, q = {q})")));
    }
    if !(c0 > 0.0) {
        return Err(invalid(format!("C0 must be positive, got {c0}")));
    }
    let m_prime = bank_rows(n, q, c0);
    let owned;
    let probes = match probes {
        Some(p) => p,
        None => {
            owned = probe_subsets(n, q, seed);
            &owned
        }
    };
    let mut derive = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for attempt in 0..MAX_RESAMPLES {
        let s = if attempt == 0 { seed } else { derive.gen() };
        let mut bank = KeyBank::rademacher(n, q, m_prime, s)?;
        bank.attempts = attempt + 1;
        match probes.iter().try_for_each(|y| dual_certificate(&bank, y).map(|_| ())) {
            Ok(()) => return Ok(bank),
            Err(e) => failures.push(format!("seed {s}: {e}")),
        }
    }
    Err(Error::CertificateFailure(format!(
        "no valid bank after {MAX_RESAMPLES} draws with m' = {m_prime} (C0 = {c0} may be too small for N = {n}, q = {q}); {}",
        failures.join("; ")
    )))
}

pub fn sample_key_bank(n: usize, q: usize, seed: u64) -> Result<KeyBank> {
    sample_key_bank_with(n, q, seed, DEFAULT_C0, None)
}
