//! Multiplexed pseudo-number-resolving detection.
//!
//! Each output arm fans out over seven binary detectors. The chance of an
//! m / (5−m) click pattern given m photons in arm a and 5−m in arm b is
//!
//! ```text
//! Σ_m = m! e_m(σ_a) · (5−m)! e_{5−m}(σ_b)
//! ```
//!
//! with e_k the elementary symmetric polynomial of the per-detector
//! single-photon detection probabilities. The model assumes m clicks mean
//! m photons: no two photons hit the same detector, no dark counts,
//! afterpulsing, or cross-talk.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of resolvable coincidence outcomes (m = 0..=5).
pub const OUTCOMES: usize = 6;
/// Binary detectors multiplexed per arm.
pub const DETECTORS_PER_ARM: usize = 7;

/// Per-detector single-photon detection probabilities for both arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub arm_a: [f64; DETECTORS_PER_ARM],
    pub arm_b: [f64; DETECTORS_PER_ARM],
}

impl EfficiencyTable {
    pub fn new(arm_a: [f64; DETECTORS_PER_ARM], arm_b: [f64; DETECTORS_PER_ARM]) -> Result<Self> {
        for &sigma in arm_a.iter().chain(arm_b.iter()) {
            if !(0.0..=1.0).contains(&sigma) {
                return Err(Error::OutOfRange {
                    name: "detection probability",
                    value: sigma,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self { arm_a, arm_b })
    }

    /// Uniform table, handy for synthetic data.
    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new([sigma; DETECTORS_PER_ARM], [sigma; DETECTORS_PER_ARM])
    }

    /// All six Σ_m factors.
    pub fn coincidence_efficiencies(&self) -> [f64; OUTCOMES] {
        let e_a = elementary_symmetric(&self.arm_a);
        let e_b = elementary_symmetric(&self.arm_b);
        let mut out = [0.0; OUTCOMES];
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = FACT[m] * e_a[m] * FACT[5 - m] * e_b[5 - m];
        }
        out
    }
}

const FACT: [f64; 6] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];

/// Elementary symmetric polynomials e_0..e_n of the inputs, by the
/// standard one-pass recurrence.
fn elementary_symmetric(sigma: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; sigma.len() + 1];
    e[0] = 1.0;
    for (i, &x) in sigma.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// Σ_m for one outcome; m must lie in 0..=5.
pub fn coincidence_efficiency(table: &EfficiencyTable, m: usize) -> Result<f64> {
    if m >= OUTCOMES {
        return Err(Error::OutcomeOutOfRange {
            got: m,
            max: OUTCOMES - 1,
        });
    }
    Ok(table.coincidence_efficiencies()[m])
}

/// Raw five-fold coincidence counts at one phase setting.
///
/// Counts are held as nonnegative reals: the Poisson sampler produces
/// integers, while noiseless synthetic data keeps exact expected rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub phase: f64,
    pub counts: [f64; OUTCOMES],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub integration_time: Option<f64>,
}

impl CoincidenceRecord {
    pub fn new(phase: f64, counts: [f64; OUTCOMES]) -> Result<Self> {
        if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::DegenerateData("negative or non-finite count"));
        }
        Ok(Self {
            phase,
            counts,
            integration_time: None,
        })
    }
}

/// Efficiency-corrected rates D′_m = D_m / Σ_m.
pub fn rescale_counts(record: &CoincidenceRecord, table: &EfficiencyTable) -> Result<[f64; OUTCOMES]> {
    let sigmas = table.coincidence_efficiencies();
    let mut out = [0.0; OUTCOMES];
    for m in 0..OUTCOMES {
        if sigmas[m] <= 0.0 {
            return Err(Error::ZeroEfficiency { outcome: m });
        }
        out[m] = record.counts[m] / sigmas[m];
    }
    Ok(out)
}

/// Expected raw counts M · P_m · Σ_m for a normalized outcome
/// distribution and overall scale M.
pub fn expected_counts(
    probabilities: &[f64],
    scale: f64,
    table: &EfficiencyTable,
) -> Result<[f64; OUTCOMES]> {
    if probabilities.len() != OUTCOMES {
        return Err(Error::DimensionMismatch {
            left: probabilities.len(),
            right: OUTCOMES,
        });
    }
    if !(scale >= 0.0) {
        return Err(Error::OutOfRange {
            name: "scale",
            value: scale,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let sigmas = table.coincidence_efficiencies();
    let mut out = [0.0; OUTCOMES];
    for m in 0..OUTCOMES {
        out[m] = scale * probabilities[m] * sigmas[m];
    }
    Ok(out)
}

/// Independent Poisson draws around the expected rates.
pub fn sample_poisson_counts<R: Rng + ?Sized>(
    expected: &[f64; OUTCOMES],
    phase: f64,
    rng: &mut R,
) -> Result<CoincidenceRecord> {
    let mut counts = [0.0; OUTCOMES];
    for m in 0..OUTCOMES {
        let rate = expected[m];
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::NegativeRate { rate, outcome: m });
        }
        counts[m] = if rate == 0.0 {
            0.0
        } else {
            let poisson = Poisson::new(rate).expect("positive finite rate");
            poisson.sample(rng)
        };
    }
    CoincidenceRecord::new(phase, counts)
}
