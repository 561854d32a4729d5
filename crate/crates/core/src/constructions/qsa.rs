use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{element_map, provenance, sparse};
use crate::certificates::{
    bank_rows, dual_certificate, face_hyperplane, least_norm_interpolant, sample_key_bank_with,
    CyclicPolytope, KeyBank, DEFAULT_C0, MIN_FACE_GAP,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{FixedFormat, Matrix, Precision};
use crate::tasks::QsaInstance;
use crate::transformer::{
    AttentionUnit, Head, IdentityMap, Layer, MlpLayer, MultiHeadLayer, TransformerModel,
};

/// Parameters of the fixed-precision sparse-averaging construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsaBuildSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    pub d_prime: usize,
    pub epsilon: f64,
    /// `ceil(2 ln(4N / ε))`.
    pub alpha: f64,
    /// Rows of the key bank, `ceil(C0 q ln N)`.
    pub m_prime: usize,
    pub format: FixedFormat,
    pub seed: u64,
    pub c0: f64,
}

impl QsaBuildSpec {
    pub fn new(n: usize, q: usize, d_prime: usize, epsilon: f64, seed: u64) -> Result<Self> {
        Self::with_c0(n, q, d_prime, epsilon, seed, DEFAULT_C0)
    }

    pub fn with_c0(
        n: usize,
        q: usize,
        d_prime: usize,
        epsilon: f64,
        seed: u64,
        c0: f64,
    ) -> Result<Self> {
        if n == 0 || q == 0 || q > n {
            return Err(invalid(format!("need 1 <= q <= N, got q = {q}, N = {n}")));
        }
        if d_prime == 0 {
            return Err(invalid("d' must be positive"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
        }
        let alpha = qsa_alpha(n, epsilon);
        let m_prime = bank_rows(n, q, c0);
        let frac = certificate_frac_bits(alpha, m_prime, epsilon);
        let reach = (n as f64).max(2.0 * alpha * (q as f64).sqrt());
        let format = FixedFormat::covering(reach, frac)?;
        Ok(Self {
            n,
            q,
            d_prime,
            epsilon,
            alpha,
            m_prime,
            format,
            seed,
            c0,
        })
    }

    /// Width of the per-element embedding, `d' + 2 m'`.
    pub fn embedding_dim(&self) -> usize {
        self.d_prime + 2 * self.m_prime
    }

    /// Bound on `‖w̃ - w‖` implied by the format, `sqrt(m') 2^-(f+1)`.
    pub fn certificate_rounding_bound(&self) -> f64 {
        (self.m_prime as f64).sqrt() * self.format.step() / 2.0
    }
}

pub fn qsa_alpha(n: usize, epsilon: f64) -> f64 {
    (2.0 * (4.0 * n as f64 / epsilon).ln()).ceil()
}

/// `ceil(log2(4 α sqrt(m') / ε)) + 2`, enough for `‖w̃ - w‖ <= ε / (4α)`.
pub fn certificate_frac_bits(alpha: f64, m_prime: usize, epsilon: f64) -> u32 {
    (4.0 * alpha * (m_prime as f64).sqrt() / epsilon).log2().ceil().max(0.0) as u32 + 2
}

/// Quantized key bank plus a cache of scaled, quantized certificates.
///
/// Rounding every `±1/sqrt(m')` entry to the grid rescales all columns by
/// the same factor, so certificates of the rounded bank have the same inner
/// products as those of the drawn one.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CertificateTable {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    pub m_prime: usize,
    pub seed: u64,
    pub alpha: f64,
    pub format: Option<FixedFormat>,
    #[serde(skip)]
    bank: OnceLock<KeyBank>,
    #[serde(skip)]
    cache: Mutex<HashMap<Vec<usize>, Arc<Vec<f64>>>>,
}

impl Clone for CertificateTable {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            q: self.q,
            m_prime: self.m_prime,
            seed: self.seed,
            alpha: self.alpha,
            format: self.format,
            ..Default::default()
        }
    }
}

impl CertificateTable {
    pub fn new(n: usize, q: usize, m_prime: usize, seed: u64, alpha: f64, format: FixedFormat) -> Self {
        Self {
            n,
            q,
            m_prime,
            seed,
            alpha,
            format: Some(format),
            ..Default::default()
        }
    }

    fn fmt(&self) -> FixedFormat {
        self.format.expect("certificate table has a format")
    }

    pub fn check(&self) -> Result<()> {
        if self.format.is_none() {
            return Err(invalid("certificate table lacks a number format"));
        }
        KeyBank::rademacher(self.n, self.q, self.m_prime, self.seed).map(|_| ())
    }

    pub fn bank(&self) -> &KeyBank {
        self.bank.get_or_init(|| {
            let raw = KeyBank::rademacher(self.n, self.q, self.m_prime, self.seed)
                .expect("checked bank parameters");
            let fmt = self.fmt();
            let cols = (1..=self.n)
                .map(|j| raw.column(j).iter().map(|&v| fmt.quantize(v)).collect())
                .collect();
            KeyBank::from_columns(cols, self.q).expect("same shape as the drawn bank")
        })
    }

    /// `u_i` on the grid, 1-based.
    pub fn key(&self, i: usize) -> &[f64] {
        self.bank().column(i)
    }

    /// `α w̃_y`: the certificate of `y`, rounded to the grid and scaled.
    /// Falls back to the plain least-norm interpolant if repair fails.
    pub fn scaled_certificate(&self, y: &[usize]) -> Arc<Vec<f64>> {
        let mut key: Vec<usize> = y.iter().copied().filter(|&j| j >= 1 && j <= self.n).collect();
        key.sort_unstable();
        key.dedup();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let bank = self.bank();
        let w = if key.is_empty() {
            vec![0.0; self.m_prime]
        } else {
            dual_certificate(bank, &key)
                .map(|c| c.w)
                .or_else(|_| least_norm_interpolant(bank, &key))
                .unwrap_or_else(|_| vec![0.0; self.m_prime])
        };
        let fmt = self.fmt();
        let scaled = Arc::new(w.iter().map(|&v| self.alpha * fmt.quantize(v)).collect::<Vec<_>>());
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, scaled.clone());
        scaled
    }
}

fn read_index(v: f64) -> usize {
    if v.is_finite() && v >= 0.5 {
        v.round() as usize
    } else {
        0
    }
}

/// `[z, y, i] -> (z; α w̃_y; u_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsaFixedFeatures {
    pub d_prime: usize,
    pub certificates: CertificateTable,
}

impl QsaFixedFeatures {
    fn in_width(&self) -> usize {
        self.d_prime + self.certificates.q + 1
    }
    fn out_width(&self) -> usize {
        self.d_prime + 2 * self.certificates.m_prime
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let (d, q) = (self.d_prime, self.certificates.q);
        let y: Vec<usize> = x[d..d + q].iter().map(|&v| read_index(v)).collect();
        let i = read_index(x[d + q]);
        let mut out = Vec::with_capacity(self.out_width());
        out.extend_from_slice(&x[..d]);
        out.extend_from_slice(&self.certificates.scaled_certificate(&y));
        if (1..=self.certificates.n).contains(&i) {
            out.extend_from_slice(self.certificates.key(i));
        } else {
            out.extend(std::iter::repeat(0.0).take(self.certificates.m_prime));
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        self.certificates.check()
    }
}
element_map!(QsaFixedFeatures, "qsa_fixed_features");

/// Attention head reading `α w̃` as the query block, `u` as the key block
/// and `z` as the value block of `(z; α w̃; u)`.
pub(crate) fn selector_unit(
    d_prime: usize,
    m_prime: usize,
    value_offset: usize,
    value_target: usize,
    width: usize,
    d_out: usize,
    p: Precision,
) -> Result<AttentionUnit> {
    let q_off = width - 2 * m_prime;
    let k_off = width - m_prime;
    let q: Vec<_> = (0..m_prime).map(|k| (q_off + k, k, 1.0)).collect();
    let k: Vec<_> = (0..m_prime).map(|k| (k_off + k, k, 1.0)).collect();
    let v: Vec<_> = (0..d_prime)
        .map(|k| (value_offset + k, value_target + k, 1.0))
        .collect();
    AttentionUnit::new(
        sparse(width, m_prime, &q),
        sparse(width, m_prime, &k),
        sparse(width, d_out, &v),
        p,
    )
}

/// Draws and validates the key bank for `spec`, certifying `probes` (or the
/// default probe set).
pub(crate) fn validated_bank(spec: &QsaBuildSpec, probes: Option<&[Vec<usize>]>) -> Result<KeyBank> {
    sample_key_bank_with(spec.n, spec.q, spec.seed, spec.c0, probes)
}

/// One attention layer approximating sparse averaging to within `ε` with
/// `p`-bit weights: query `α w̃_{y_i}`, keys `u_j`, values `z_j`.
pub fn build_qsa_fixed(spec: &QsaBuildSpec) -> Result<TransformerModel> {
    let bank = validated_bank(spec, None)?;
    let effective_seed = bank.seed().expect("drawn bank has a seed");
    let p = Precision::fixed(spec.format);
    let table = CertificateTable::new(
        spec.n,
        spec.q,
        spec.m_prime,
        effective_seed,
        spec.alpha,
        spec.format,
    );
    let features = QsaFixedFeatures {
        d_prime: spec.d_prime,
        certificates: table,
    };
    let width = features.out_width();
    let unit = selector_unit(spec.d_prime, spec.m_prime, 0, 0, width, spec.d_prime, p)?;
    let layers = vec![
        Layer::Mlp(MlpLayer::new(Arc::new(features), p)),
        Layer::Attention(MultiHeadLayer::single(unit)),
        Layer::Mlp(MlpLayer::identity(spec.d_prime, p)),
    ];
    TransformerModel::new(
        layers,
        false,
        provenance(
            "qsa_fixed",
            json!({"N": spec.n, "q": spec.q, "d_prime": spec.d_prime, "epsilon": spec.epsilon}),
            vec![spec.seed, effective_seed],
            &[
                ("alpha", json!(spec.alpha)),
                ("m_prime", json!(spec.m_prime)),
                ("C0", json!(spec.c0)),
                ("embedding_dim", json!(spec.embedding_dim())),
                ("p", json!(spec.format.total_bits())),
                ("f", json!(spec.format.frac_bits())),
                ("bank_draws", json!(bank.attempts())),
            ],
        ),
    )
}

/// `[z, y, i] -> (z; α_y w'_y; α_y b_y; θ(t_i); 1)` on the cyclic polytope,
/// with `α_y = ln(4N/ε) / gap_y`.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct QsaInfFeatures {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    pub d_prime: usize,
    pub epsilon: f64,
    #[serde(skip)]
    cache: Mutex<HashMap<Vec<usize>, Arc<Vec<f64>>>>,
}

impl Clone for QsaInfFeatures {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            q: self.q,
            d_prime: self.d_prime,
            epsilon: self.epsilon,
            cache: Mutex::default(),
        }
    }
}

impl QsaInfFeatures {
    fn poly(&self) -> CyclicPolytope {
        CyclicPolytope::standard(self.n, self.q).expect("checked polytope parameters")
    }

    fn m_prime(&self) -> usize {
        2 * self.q
    }

    fn in_width(&self) -> usize {
        self.d_prime + self.q + 1
    }
    fn out_width(&self) -> usize {
        self.d_prime + 2 * (self.m_prime() + 1)
    }

    fn query(&self, y: &[usize]) -> Arc<Vec<f64>> {
        let mut key: Vec<usize> = y.iter().copied().filter(|&j| j >= 1 && j <= self.n).collect();
        key.sort_unstable();
        key.dedup();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let q = match face_hyperplane(&self.poly(), &key) {
            Ok(h) => {
                let alpha = (4.0 * self.n as f64 / self.epsilon).ln() / h.gap;
                let mut v: Vec<f64> = h.w.iter().map(|&w| alpha * w).collect();
                v.push(alpha * h.b);
                v
            }
            Err(_) => vec![0.0; self.m_prime() + 1],
        };
        let q = Arc::new(q);
        self.cache.lock().expect("cache lock").insert(key, q.clone());
        q
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let (d, q) = (self.d_prime, self.q);
        let y: Vec<usize> = x[d..d + q].iter().map(|&v| read_index(v)).collect();
        let i = read_index(x[d + q]);
        let mut out = Vec::with_capacity(self.out_width());
        out.extend_from_slice(&x[..d]);
        out.extend_from_slice(&self.query(&y));
        if (1..=self.n).contains(&i) {
            out.extend(self.poly().theta(i));
            out.push(1.0);
        } else {
            out.extend(std::iter::repeat(0.0).take(self.m_prime() + 1));
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        CyclicPolytope::standard(self.n, self.q)?;
        if self.d_prime == 0 || !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("bad d' or ε for the cyclic construction"));
        }
        Ok(())
    }
}
element_map!(QsaInfFeatures, "qsa_inf_features");

/// Smallest off-face value of `Π (t - t_j)^2` over every face of size `q`:
/// the nearest points sit at distances `1, 1, 2, 2, ...` spacings away.
pub fn worst_face_gap(n: usize, q: usize) -> f64 {
    let h = 1.0 / n as f64;
    (1..=q)
        .map(|k| (k.div_ceil(2) as f64 * h).powi(2))
        .product()
}

/// Exact-selection construction on the cyclic polytope, embedding width
/// `d' + 4q + 2` independent of `N`.
pub fn build_qsa_inf(n: usize, q: usize, d_prime: usize, epsilon: f64) -> Result<TransformerModel> {
    if q == 0 || n < 2 * q {
        return Err(invalid(format!("need N >= 2q >= 2, got N = {n}, q = {q}")));
    }
    let features = QsaInfFeatures {
        n,
        q,
        d_prime,
        epsilon,
        cache: Mutex::default(),
    };
    features.check()?;
    let gap = worst_face_gap(n, q);
    if gap < MIN_FACE_GAP {
        return Err(Error::GapTooSmall {
            gap,
            threshold: MIN_FACE_GAP,
        });
    }
    let m_prime = 2 * q + 1;
    let width = features.out_width();
    let unit = selector_unit(d_prime, m_prime, 0, 0, width, d_prime, Precision::Carrier)?;
    let layers = vec![
        Layer::Mlp(MlpLayer::new(Arc::new(features), Precision::Carrier)),
        Layer::Attention(MultiHeadLayer::single(unit)),
        Layer::Mlp(MlpLayer::new(Arc::new(IdentityMap { dim: d_prime }), Precision::Carrier)),
    ];
    TransformerModel::new(
        layers,
        false,
        provenance(
            "qsa_inf",
            json!({"N": n, "q": q, "d_prime": d_prime, "epsilon": epsilon}),
            vec![],
            &[
                ("m_prime", json!(2 * q)),
                ("embedding_dim", json!(width)),
                ("worst_gap", json!(gap)),
                ("spacing", json!(1.0 / n as f64)),
            ],
        ),
    )
}

/// Attention weights of the single sparse-averaging head on `inst`.
pub fn qsa_attention_weights(model: &TransformerModel, inst: &QsaInstance) -> Result<Matrix> {
    let trace = model.trace(&inst.to_matrix())?;
    match model.attention_layers().next().and_then(|a| a.heads().first()) {
        Some(Head::Standard(u)) => u.weights(&trace.states[1]),
        _ => Err(invalid("model has no standard attention head")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{qsa_oracle, random_qsa};
    use crate::transformer::run_transformer;

    fn max_row_error(a: &Matrix, b: &Matrix) -> f64 {
        (0..a.rows())
            .map(|r| {
                a.row(r)
                    .iter()
                    .zip(b.row(r))
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn spec_constants() {
        let s = QsaBuildSpec::new(32, 4, 4, 0.1, 1).unwrap();
        assert_eq!(s.alpha, (2.0 * (1280.0f64).ln()).ceil());
        assert!(s.certificate_rounding_bound() <= s.epsilon / (4.0 * s.alpha));
    }

    #[test]
    fn self_selection_with_q_one() {
        let spec = QsaBuildSpec::new(8, 1, 2, 0.1, 3).unwrap();
        let model = build_qsa_fixed(&spec).unwrap();
        let z: Vec<Vec<f64>> = (0..8).map(|i| vec![0.1 * i as f64, -0.05 * i as f64]).collect();
        let y: Vec<Vec<usize>> = (1..=8).map(|i| vec![i]).collect();
        let inst = QsaInstance::new(z, y, 1).unwrap();
        let out = run_transformer(&model, &inst.to_matrix()).unwrap();
        assert!(max_row_error(&out, &qsa_oracle(&inst)) <= 0.1);
    }

    #[test]
    fn fixed_small_random() {
        let spec = QsaBuildSpec::new(12, 3, 2, 0.1, 5).unwrap();
        let model = build_qsa_fixed(&spec).unwrap();
        for seed in 0..5 {
            let inst = random_qsa(12, 3, 2, seed).unwrap();
            let out = run_transformer(&model, &inst.to_matrix()).unwrap();
            assert!(max_row_error(&out, &qsa_oracle(&inst)) <= 0.1);
        }
    }

    #[test]
    fn infinite_precision_small() {
        let model = build_qsa_inf(8, 2, 3, 0.05).unwrap();
        assert_eq!(model.max_embedding(), 2 * 2 + 1);
        for seed in 0..5 {
            let inst = random_qsa(8, 2, 3, seed).unwrap();
            let out = run_transformer(&model, &inst.to_matrix()).unwrap();
            assert!(max_row_error(&out, &qsa_oracle(&inst)) <= 0.05);
        }
        assert!(build_qsa_inf(3, 2, 1, 0.1).is_err());
    }

    #[test]
    fn worst_gap_matches_search() {
        let (n, q) = (10, 3);
        let poly = CyclicPolytope::standard(n, q).unwrap();
        let mut best = f64::INFINITY;
        for a in 1..=n {
            for b in a + 1..=n {
                for c in b + 1..=n {
                    best = best.min(face_hyperplane(&poly, &[a, b, c]).unwrap().gap);
                }
            }
        }
        assert!((best - worst_face_gap(n, q)).abs() < 1e-15);
    }
}
