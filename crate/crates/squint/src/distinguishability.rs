//! Partial distinguishability of the two down-conversion arms.
//!
//! The source ideally holds (n+1)/2 photons in H and (n+1)/2 in V. With
//! imperfect temporal overlap, each V photon lives in the matched mode
//! with amplitude √I and in an orthogonal mode V⊥ with amplitude √(1−I).
//! Dropping coherences between sectors of different mismatch count d
//! leaves a classical mixture over
//!
//! ```text
//! |(n+1)/2⟩_H ⊗ |(n+1)/2 − d⟩_V ⊗ |d⟩_V⊥,   weight C((n+1)/2, d) I^((n+1)/2−d) (1−I)^d
//! ```
//!
//! which is pushed through the diagonal-basis photon subtraction and the
//! phase rotation. Detectors see polarization only, so the outcome m sums
//! the H and H⊥ occupations.

use num_integer::binomial;

use crate::error::{Error, Result};
use crate::fock::{FourModeState, NORM_TOL};
use crate::interferometer::evolve_four_mode;
use crate::states::subtract_one_photon_diagonal;

/// Weight of the phase-insensitive noise admixture, bounded to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParameter(f64);

impl NoiseParameter {
    pub fn new(s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfRange {
                name: "noise weight",
                value: s,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self(s))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Classical mixture of four-mode pure states with an indistinguishability
/// tag. Weights sum to one; states are normalized.
#[derive(Debug, Clone)]
pub struct BranchMixture {
    indistinguishability: f64,
    branches: Vec<(f64, FourModeState)>,
}

impl BranchMixture {
    pub fn new(indistinguishability: f64, branches: Vec<(f64, FourModeState)>) -> Result<Self> {
        let total: f64 = branches.iter().map(|(w, _)| *w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized {
                phi: f64::NAN,
                sum: total,
            });
        }
        for (_, state) in &branches {
            if (state.norm() - 1.0).abs() > NORM_TOL * 10.0 {
                return Err(Error::ZeroNorm);
            }
        }
        Ok(Self {
            indistinguishability,
            branches,
        })
    }

    pub fn indistinguishability(&self) -> f64 {
        self.indistinguishability
    }

    pub fn branches(&self) -> &[(f64, FourModeState)] {
        &self.branches
    }

    /// Applies the conditional one-photon subtraction to every branch,
    /// splitting each into its D and D⊥ outcomes weighted by their norms.
    pub fn subtract_one_diagonal(&self) -> Result<Self> {
        let mut branches = Vec::new();
        for (weight, state) in &self.branches {
            for (w, sub) in subtract_one_photon_diagonal(state)? {
                if w > 0.0 {
                    branches.push((weight * w, sub));
                }
            }
        }
        // Weights compose to one exactly up to rounding; renormalize the sum.
        let total: f64 = branches.iter().map(|(w, _)| *w).sum();
        for (w, _) in &mut branches {
            *w /= total;
        }
        Self::new(self.indistinguishability, branches)
    }

    /// Mixture outcome distribution after a phase shift: the probability of
    /// m detected H-polarized photons, summing hidden splittings between
    /// the matched and mismatched sectors.
    pub fn outcome_distribution(&self, phi: f64) -> Vec<f64> {
        let n = self
            .branches
            .first()
            .map(|(_, s)| s.photon_number())
            .unwrap_or(0);
        let mut probs = vec![0.0; n + 1];
        for (weight, state) in &self.branches {
            let evolved = evolve_four_mode(state, phi);
            for (occ, amp) in evolved.iter() {
                let m = (occ[0] + occ[2]) as usize;
                probs[m] += weight * amp.norm_sqr();
            }
        }
        probs
    }
}

/// Mixture over mismatch sectors for the (n+1)-photon source of an
/// n-photon Yurke preparation. Requires odd n ≥ 3 and I in [0, 1].
pub fn mismatched_source(n: usize, indistinguishability: f64) -> Result<BranchMixture> {
    if n % 2 == 0 {
        return Err(Error::WrongParity {
            got: n,
            expected: "odd",
        });
    }
    if n < 3 {
        return Err(Error::InvalidPhotonNumber { got: n, min: 3 });
    }
    if !(0.0..=1.0).contains(&indistinguishability) {
        return Err(Error::OutOfRange {
            name: "indistinguishability",
            value: indistinguishability,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let half = (n + 1) / 2;
    let weights = mismatch_weights(half, indistinguishability);
    let mut branches = Vec::new();
    for (d, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            let occ = [half as u8, (half - d) as u8, 0, d as u8];
            branches.push((w, FourModeState::basis_state(occ)));
        }
    }
    BranchMixture::new(indistinguishability, branches)
}

/// Binomial sector weights C(half, d) I^(half−d) (1−I)^d for d = 0..=half.
pub fn mismatch_weights(half: usize, indistinguishability: f64) -> Vec<f64> {
    let i = indistinguishability;
    (0..=half)
        .map(|d| {
            binomial(half as u64, d as u64) as f64
                * i.powi((half - d) as i32)
                * (1.0 - i).powi(d as i32)
        })
        .collect()
}

/// Outcome distribution P_m(φ) of the full mismatch pipeline:
/// source mixture → diagonal one-photon subtraction → phase shift →
/// polarization-resolved counting.
pub fn probability_with_mismatch(n: usize, indistinguishability: f64, phi: f64) -> Result<Vec<f64>> {
    let mixture = mismatched_source(n, indistinguishability)?.subtract_one_diagonal()?;
    Ok(mixture.outcome_distribution(phi))
}

/// Convex admixture of the uniform distribution:
/// (1 − s) p_m + s/(len). The length-six case matches the five-photon
/// coincidence analysis; other lengths generalize the same rule.
pub fn add_phase_insensitive_noise(probs: &[f64], s: NoiseParameter) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("probability vector"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized {
            phi: f64::NAN,
            sum,
        });
    }
    let s = s.value();
    let uniform = 1.0 / probs.len() as f64;
    Ok(probs.iter().map(|p| (1.0 - s) * p + s * uniform).collect())
}

/// Precomputed subtraction branches for repeated distribution evaluation.
///
/// The branch states do not depend on the indistinguishability — only the
/// sector weights do — so fitting loops reuse one of these across all
/// (I, s, φ) evaluations.
#[derive(Debug, Clone)]
pub struct MismatchModel {
    n: usize,
    half: usize,
    /// (d, normalized subtracted state, share of the sector weight).
    branches: Vec<(usize, FourModeState, f64)>,
}

impl MismatchModel {
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::WrongParity {
                got: n,
                expected: "odd",
            });
        }
        if n < 3 {
            return Err(Error::InvalidPhotonNumber { got: n, min: 3 });
        }
        let half = (n + 1) / 2;
        let mut branches = Vec::new();
        for d in 0..=half {
            let occ = [half as u8, (half - d) as u8, 0, d as u8];
            let source = FourModeState::basis_state(occ);
            for (share, sub) in subtract_one_photon_diagonal(&source)? {
                if share > 0.0 {
                    branches.push((d, sub, share));
                }
            }
        }
        Ok(Self { n, half, branches })
    }

    pub fn photon_number(&self) -> usize {
        self.n
    }

    /// P_m(I, φ) for m = 0..=n.
    pub fn probabilities(&self, indistinguishability: f64, phi: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&indistinguishability) {
            return Err(Error::OutOfRange {
                name: "indistinguishability",
                value: indistinguishability,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let sector = mismatch_weights(self.half, indistinguishability);
        let mut probs = vec![0.0; self.n + 1];
        for (d, state, share) in &self.branches {
            let weight = sector[*d] * share;
            if weight == 0.0 {
                continue;
            }
            let evolved = evolve_four_mode(state, phi);
            for (occ, amp) in evolved.iter() {
                probs[(occ[0] + occ[2]) as usize] += weight * amp.norm_sqr();
            }
        }
        Ok(probs)
    }

    /// P_m(I, s, φ) including the phase-insensitive noise admixture.
    pub fn probabilities_with_noise(
        &self,
        indistinguishability: f64,
        noise: NoiseParameter,
        phi: f64,
    ) -> Result<Vec<f64>> {
        let p = self.probabilities(indistinguishability, phi)?;
        add_phase_insensitive_noise(&p, noise)
    }
}
