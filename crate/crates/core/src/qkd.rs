//! BBM92 measurement model: exact polarization error rate of a pair state,
//! an intrinsic error floor, and finite-block sampling of the estimated QBER.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polcore::{apply_local, TwoPhotonState, Unitary2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("pair state is not normalized (norm^2 = {0})")]
    Unnormalized(f64),
    #[error("invalid detection config: {0}")]
    InvalidConfig(String),
}

/// Rates and timing of the detection system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Pair coincidences per second at the receivers, after link loss.
    pub coincidence_rate: f64,
    /// Fraction of coincidences surviving basis sifting.
    pub sift_ratio: f64,
    /// Length of one QBER accumulation block, seconds.
    pub accumulation_time: f64,
    /// Error rate contributed by everything except the fiber rotation.
    pub intrinsic_error: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            coincidence_rate: 670.0,
            sift_ratio: 0.5,
            accumulation_time: 2.0,
            intrinsic_error: 0.04,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), QkdError> {
        let bad = |m: &str| Err(QkdError::InvalidConfig(m.to_string()));
        if !(self.coincidence_rate.is_finite() && self.coincidence_rate >= 0.0) {
            return bad("coincidence_rate must be >= 0");
        }
        if !(self.sift_ratio > 0.0 && self.sift_ratio <= 1.0) {
            return bad("sift_ratio must be in (0, 1]");
        }
        if !(self.accumulation_time.is_finite() && self.accumulation_time > 0.0) {
            return bad("accumulation_time must be > 0");
        }
        if !(self.intrinsic_error >= 0.0 && self.intrinsic_error < 0.5) {
            return bad("intrinsic_error must be in [0, 0.5)");
        }
        Ok(())
    }

    /// Expected sifted bits per accumulation block.
    pub fn mean_sifted_bits(&self) -> f64 {
        self.coincidence_rate * self.sift_ratio * self.accumulation_time
    }
}

/// A QBER measured from a finite block of sifted bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub value: f64,
    /// One binomial standard deviation.
    pub uncertainty: f64,
    pub sample_size: u64,
}

impl QberEstimate {
    pub fn from_counts(errors: u64, sample_size: u64) -> Self {
        if sample_size == 0 {
            return Self::empty();
        }
        let value = errors as f64 / sample_size as f64;
        QberEstimate {
            value,
            uncertainty: (value * (1.0 - value) / sample_size as f64).sqrt(),
            sample_size,
        }
    }

    /// Block with no sifted bits: the value carries no information, so it sits
    /// at the uninformative midpoint.
    pub fn empty() -> Self {
        QberEstimate {
            value: 0.5,
            uncertainty: 0.5,
            sample_size: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sample_size == 0
    }

    /// Key used when ranking estimates; empty blocks rank last.
    pub fn rank_key(&self) -> f64 {
        if self.is_empty() {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

/// Probability that both photons give the same outcome in the H/V basis.
fn same_outcome_probability(s: &TwoPhotonState) -> f64 {
    s.amplitude(0, 0).norm_sqr() + s.amplitude(1, 1).norm_sqr()
}

/// Error rate of a pair state measured in BBM92 with equal-weight H/V and
/// D/A bases. Outcomes should be anticorrelated, so identical outcomes in a
/// shared basis are errors.
pub fn polarization_qber(s: &TwoPhotonState) -> Result<f64, QkdError> {
    let n = s.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(QkdError::Unnormalized(n));
    }
    let hv = same_outcome_probability(s);
    let h = Unitary2::HADAMARD;
    let da = same_outcome_probability(&apply_local(&h, &h, s));
    Ok(((hv + da) / 2.0).clamp(0.0, 1.0))
}

/// Mixes the fiber-induced error with the symmetric intrinsic floor `e0`:
/// `e0 + (1 - 2 e0) q_pol`.
pub fn true_qber(q_pol: f64, cfg: &DetectionConfig) -> f64 {
    let e0 = cfg.intrinsic_error;
    e0 + (1.0 - 2.0 * e0) * q_pol
}

/// Draws one accumulation block: `N ~ Poisson(rate * sift * T)` sifted bits,
/// of which `k ~ Binomial(N, q_true)` are errors.
pub fn sample_qber_estimate<R: Rng + ?Sized>(
    q_true: f64,
    cfg: &DetectionConfig,
    rng: &mut R,
) -> QberEstimate {
    let mean = cfg.mean_sifted_bits();
    let n = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    };
    if n == 0 {
        return QberEstimate::empty();
    }
    let k = Binomial::new(n, q_true.clamp(0.0, 1.0))
        .map(|b| b.sample(rng))
        .unwrap_or(0);
    QberEstimate::from_counts(k, n)
}
