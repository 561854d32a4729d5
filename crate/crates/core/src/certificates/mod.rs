//! Dual certificates for sparse averaging: near-orthogonal key banks with
//! least-norm interpolating witnesses, and exact faces of cyclic polytopes.

mod cyclic;
mod keybank;

pub use cyclic::{cyclic_keys, face_hyperplane, CyclicPolytope, FaceHyperplane, MIN_FACE_GAP};
pub use keybank::{
    bank_rows, check_certificate, dual_certificate, least_norm_interpolant, prefix_probe, probe_subsets,
    quantize_certificate, sample_key_bank, sample_key_bank_with, CertificateCheck, DualCertificate, KeyBank, DEFAULT_C0, DELTA, MAX_RESAMPLES,
    OFF_SUPPORT_BOUND, ON_SUPPORT_TOLERANCE,
};
