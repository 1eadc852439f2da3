//! Weight certificates: sampled Jacobians, LP weight search, the
//! nonexpansive-plus-strict fallback and weight-sequence refinement.

mod sampling;
mod weights;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use sampling::{
    sample_jacobians, sample_jacobians_with, JacobianSampleSet, SampleStrategy, SamplingOptions, DEFAULT_GRID_CAP, DEFAULT_GRID_PER_AXIS, DEFAULT_KINK_MARGIN,
};
pub use weights::{
    certify, certify_nonexpansive_strict, find_max_weights, find_sum_weights, refine_weight_sequence, verify_certificate, CertificationOutcome, CertifyOptions,
    VerificationReport, WeightFamily,
};

use crate::error::{invalid, Result};
use crate::norm::{NormKind, WeightedNorm};
use crate::scalar::Scalar;
use crate::system::Bounds;

/// Default strictness margin separating "contractive" from "nonexpansive".
pub const DEFAULT_MARGIN: f64 = 1e-6;

/// Slack allowed on measure comparisons that should hold exactly.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertKind {
    /// Column condition `vᵀJ ≤ c·vᵀ`, weighted ℓ1 norm.
    SumL1,
    /// Row condition `J w ≤ c·w`, weighted ℓ∞ norm.
    MaxLinf,
}

impl CertKind {
    pub fn norm_kind(self) -> NormKind {
        match self {
            CertKind::SumL1 => NormKind::L1,
            CertKind::MaxLinf => NormKind::Linf,
        }
    }

    pub fn from_norm(kind: NormKind) -> Self {
        match kind {
            NormKind::L1 => CertKind::SumL1,
            NormKind::Linf => CertKind::MaxLinf,
        }
    }
}

impl fmt::Display for CertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertKind::SumL1 => "SUM_L1",
            CertKind::MaxLinf => "MAX_LINF",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Contractive,
    NonexpansiveStrictAtEq,
    NonexpansiveOnly,
    Failed,
}

impl Status {
    /// Higher is stronger.
    pub fn rank(self) -> u8 {
        match self {
            Status::Failed => 0,
            Status::NonexpansiveOnly => 1,
            Status::NonexpansiveStrictAtEq => 2,
            Status::Contractive => 3,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Contractive => "CONTRACTIVE",
            Status::NonexpansiveStrictAtEq => "NONEXPANSIVE_STRICT_AT_EQ",
            Status::NonexpansiveOnly => "NONEXPANSIVE_ONLY",
            Status::Failed => "FAILED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightCertificate<T> {
    pub kind: CertKind,
    /// `v` for SUM_L1, `w` for MAX_LINF; every entry is at least 1.
    pub weights: Vec<T>,
    /// Largest weighted measure over the samples.
    pub rate_c: T,
    pub margin: T,
    pub status: Status,
    /// Box the samples were drawn from.
    pub domain: Bounds<T>,
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<T>>,
    #[serde(default)]
    pub limit_of_valid_sequence: bool,
    /// `s` in `vᵀJ(x*) ≤ -s·1ᵀ` (or `J(x*)w ≤ -s·1`) when an equilibrium was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strictness: Option<T>,
}

impl<T: Scalar> WeightCertificate<T> {
    pub fn norm(&self) -> Result<WeightedNorm<T>> {
        WeightedNorm::new(self.kind.norm_kind(), self.weights.clone())
    }

    /// Whether the certificate justifies Lyapunov functions: a valid contraction
    /// or strict-at-equilibrium certificate, or the limit of a sequence of them.
    pub fn is_usable(&self) -> bool {
        matches!(self.status, Status::Contractive | Status::NonexpansiveStrictAtEq) || self.limit_of_valid_sequence
    }

    /// Envelope rate implied by the certificate: `rate_c` when contractive, else 0.
    pub fn envelope_rate(&self) -> T {
        match self.status {
            Status::Contractive => self.rate_c,
            _ => T::zero(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cert: Self = serde_json::from_str(s).map_err(|e| crate::error::Error::Spec(e.to_string()))?;
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|&w| !(w >= T::one()) || !w.is_finite()) {
            return Err(invalid("weights", "every weight must be finite and at least 1"));
        }
        if self.status == Status::Contractive && !(self.rate_c < T::zero()) {
            return Err(invalid("rate_c", "a contractive certificate needs a negative rate"));
        }
        if self.status == Status::NonexpansiveStrictAtEq && self.equilibrium.is_none() {
            return Err(invalid("equilibrium", "required for NONEXPANSIVE_STRICT_AT_EQ"));
        }
        Ok(())
    }
}
